#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rsv/admm.hpp"
#include "rsv/partition.hpp"
#include "rsv/variables.hpp"

namespace rsv {

enum class AttackKind { none, measurement, state_update, stealth };

const char* to_string(AttackKind kind);
AttackKind parse_attack_kind(const std::string& text);

struct AttackSpec {
  int attacker = 0;
  AttackKind kind = AttackKind::none;
  double rho = 0.5;  // state_update: ‖a‖₂ = ρ·√(message length)
  std::vector<std::pair<std::string, double>> perturbations;  // measurement: (variable name, offset)
  std::uint64_t seed = 0;
  int start_iteration = 1;
  // state_update: corrupt the attacker's own iterate instead of each message.
  bool corrupt_own_state = false;
  double magnitude = 0.1;  // stealth: ‖a‖₂
  int victim = 0;          // stealth: 0 targets every neighbor with a null space

  bool active() const { return kind != AttackKind::none; }
  bool fires_at(int k) const { return active() && k >= start_iteration; }
  void validate(const Partition& partition, const SystemVariableSpace& space) const;
};

/// s over the attacker's measured variables with the listed offsets added.
Eigen::VectorXd perturb_measurements(const Eigen::VectorXd& s, const RegionView& view,
                                     const SystemVariableSpace& space, const AttackSpec& spec);

/// Random direction scaled to ρ·√length; a pure function of (seed, k, neighbor, t).
Eigen::VectorXd state_attack_vector(Eigen::Index length, const AttackSpec& spec, int k, int neighbor,
                                    std::size_t t);

SharedSlice perturb_outgoing_state(const SharedSlice& message, const AttackSpec& spec, int k, int neighbor);

struct StealthReport {
  int victim = 0;
  int attacker = 0;
  std::size_t shared_dimension = 0;
  std::size_t null_dimension = 0;
  Eigen::MatrixXd basis;  // shared_dimension x null_dimension, orthonormal columns
};

/// Null space of H⁽ⁱ⁾S_ijᵀ, i.e. of the victim's constraint columns at the
/// variables it shares with the attacker.
StealthReport stealth_feasibility(const RegionView& victim, int attacker);
StealthReport stealth_feasibility(const Eigen::MatrixXd& H, const std::vector<int>& shared_columns);

struct StealthAttack {
  bool feasible = false;
  Eigen::VectorXd vector;     // over the shared variables
  double certificate = 0.0;   // ‖H⁽ⁱ⁾S_ijᵀ a‖∞
};

StealthAttack craft_stealth_attack(const StealthReport& report, double magnitude, std::uint64_t seed,
                                   const Eigen::MatrixXd* H_shared = nullptr);

/// Constraint columns the report was computed from, for certificates.
Eigen::MatrixXd shared_constraint_columns(const RegionView& victim, int attacker);

}  // namespace rsv
