#pragma once

#include <Eigen/Dense>
#include <map>
#include <utility>
#include <vector>

#include "rsv/admm.hpp"
#include "rsv/partition.hpp"

namespace rsv {

struct DetectionConfig {
  enum class Alpha { harmonic, constant };
  Alpha alpha_schedule = Alpha::harmonic;  // α_k = 1/k
  double alpha_constant = 0.5;
  double pi_tolerance = 1e-3;
  double beta = 2.0;
  std::map<int, double> beta_overrides;  // per-region β_i
  double normalization_guard = 1e-9;
  // Smallest neighbor disagreement toward the flagged region that lets a
  // verdict through.
  double min_disagreement = 1e-3;
  double damping = 0.99;
  int power_iteration_cap = 100000;
  double power_iteration_tolerance = 1e-12;

  double alpha(int k) const;
  double beta_for(int region) const;
  void validate() const;
};

/// d_ij ← (α_k/4) / (n·|T|) Σ_t ‖own(t) − received(t)‖² + (1 − α_k) d_ij
double update_disagreement(double previous, const SharedSlice& own, const SharedSlice& received, int k,
                           const DetectionConfig& config);

using DisagreementMap = std::map<std::pair<int, int>, double>;

struct TrustMatrix {
  std::vector<int> regions;  // row/column order
  Eigen::MatrixXd B;
};

TrustMatrix build_trust_matrix(const DisagreementMap& d, const CommunicationGraph& graph,
                               const DetectionConfig& config);

struct StationaryResult {
  Eigen::VectorXd pi;
  int iterations = 0;
  bool damped = false;       // fallback engaged
  Eigen::MatrixXd chain;     // the matrix π is stationary for
};

/// Left Perron vector of a row-stochastic B by power iteration from uniform.
/// Periodic or non-converging chains fall back to damping toward uniform.
StationaryResult stationary_distribution(const Eigen::MatrixXd& B, const DetectionConfig& config);

/// Period of the chain's support graph (0 when some state reaches nothing).
int chain_period(const Eigen::MatrixXd& B);

struct ExcludedStats {
  double mean = 0.0;
  double stddev = 0.0;  // population
};

/// Mean and standard deviation of π_j over j ≠ i (positions, not region ids).
ExcludedStats excluded_stats(const Eigen::VectorXd& pi, Eigen::Index i);

enum class VerdictKind { inconclusive, none, attacker };

struct Verdict {
  VerdictKind kind = VerdictKind::inconclusive;
  int region = 0;
};

/// Disagreement scores, trust matrix and trust scores over one communication graph.
class TrustState {
 public:
  TrustState(const CommunicationGraph& graph, DetectionConfig config);

  void update(int i, int j, const SharedSlice& own, const SharedSlice& received, int k);
  void set_disagreement(int i, int j, double value);
  double disagreement(int i, int j) const;
  const DisagreementMap& disagreements() const { return d_; }

  /// Rebuilds B and π from the current scores; counts one detection round.
  void refresh();

  const std::vector<int>& regions() const { return regions_; }
  const CommunicationGraph& graph() const { return graph_; }
  const DetectionConfig& config() const { return config_; }
  const Eigen::MatrixXd& trust_matrix() const { return B_; }
  const Eigen::VectorXd& pi() const { return pi_; }
  const Eigen::VectorXd& previous_pi() const { return pi_prev_; }
  double pi_of(int region) const;
  bool damped() const { return damped_; }
  int rounds() const { return rounds_; }

 private:
  CommunicationGraph graph_;
  DetectionConfig config_;
  std::vector<int> regions_;
  DisagreementMap d_;
  Eigen::MatrixXd B_;
  Eigen::VectorXd pi_, pi_prev_;
  bool damped_ = false;
  int rounds_ = 0;
};

/// Stability and threshold test alone: inconclusive while π still moves by
/// more than the tolerance, otherwise attacker(arg max π) if any entry clears
/// its excluded-mean threshold, else none.
Verdict threshold_verdict(const Eigen::VectorXd& pi, const Eigen::VectorXd& previous, const std::vector<int>& regions,
                          const DetectionConfig& config);
/// threshold_verdict after two rounds, with the suspect's largest incoming
/// disagreement required to exceed min_disagreement.
Verdict check_verdict(const TrustState& trust);

}  // namespace rsv
