#pragma once

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <vector>

#include "rsv/partition.hpp"

namespace rsv {

enum class StartPolicy { flat, schedule_seeded };

struct AdmmConfig {
  double c1 = 0.5;
  double c2 = 0.5;
  double tolerance = 1e-3;  // ε, ∞-norm
  int max_iterations = 500;
  std::vector<int> horizon{0};
  // Weight the schedule term by 1 instead of c1 in the x-update.
  bool unweighted_schedule_update = false;
  // Run the explicit multiplier form instead of the υ recursion.
  bool canonical_dual = false;
  double ridge = 0.0;
  StartPolicy start = StartPolicy::flat;

  void validate() const;
  std::size_t horizon_size() const { return horizon.size(); }
};

/// What one region reads from its local ledger before iterating.
struct RegionInputs {
  std::vector<Eigen::VectorXd> measurements;  // per t, over view.measured
  std::vector<Eigen::VectorXd> schedule;      // per t, over view.scheduled
};

/// S_ji x⁽ʲ⁾(t) for every t, in canonical shared order.
using SharedSlice = std::vector<Eigen::VectorXd>;
/// Messages received by one region, keyed by sender.
using Inbox = std::map<int, SharedSlice>;

/// ADMM state of a single region over the whole horizon.
class RegionAdmm {
 public:
  /// Builds and factors the x-update matrix. Throws UnderdeterminedError when
  /// it is singular.
  RegionAdmm(const RegionView& view, const AdmmConfig& config, RegionInputs inputs);

  const RegionView& view() const { return *view_; }
  int id() const { return view_->id; }
  std::size_t horizon() const { return x_.size(); }

  /// x₀ per the configured start policy.
  void set_start();
  void set_state(std::size_t t, const Eigen::VectorXd& x);
  /// Adds `delta` to x(t) at the given local positions, leaving x⁻ alone.
  void offset_state(std::size_t t, const std::vector<int>& local, const Eigen::VectorXd& delta);
  /// ψ₀ = D̄ Σ_j S_ijᵀ S_ji x₀⁽ʲ⁾, υ₀ = ½(ψ₀ + x₀).
  void complete_initialization(const Inbox& inbox);

  void x_update();
  void psi_update(const Inbox& inbox);
  void upsilon_update();

  SharedSlice extract_shared(int neighbor) const;
  /// max over t of ‖x − x⁻‖∞
  double displacement() const;
  bool has_converged() const { return displacement() <= config_.tolerance; }

  const Eigen::VectorXd& x(std::size_t t) const { return x_.at(t); }
  const Eigen::VectorXd& psi(std::size_t t) const { return psi_.at(t); }
  const Eigen::VectorXd& upsilon(std::size_t t) const { return upsilon_.at(t); }
  const Eigen::MatrixXd& system_matrix() const { return system_; }
  /// Right-hand side the next x_update would use.
  Eigen::VectorXd rhs(std::size_t t) const;

 private:
  Eigen::VectorXd scatter(const Inbox& inbox, std::size_t t) const;

  const RegionView* view_;
  AdmmConfig config_;
  RegionInputs inputs_;
  Eigen::MatrixXd system_;
  Eigen::LLT<Eigen::MatrixXd> factor_;
  std::vector<Eigen::VectorXd> base_rhs_;  // S_aᵀs + c1 S_pᵀ𝔭*
  std::vector<Eigen::VectorXd> x_, x_prev_, psi_, psi_prev_, upsilon_, lambda_;
};

struct CentralizedSolution {
  std::vector<Eigen::VectorXd> x;  // per t, global ordering
  std::vector<int> used;           // variables held by at least one region
};

/// Minimizes Σ_i Σ_t ‖s⁽ⁱ⁾ − S_a x⁽ⁱ⁾‖² + ‖H⁽ⁱ⁾x⁽ⁱ⁾‖² + c1‖𝔭*⁽ⁱ⁾ − S_p x⁽ⁱ⁾‖² with
/// x⁽ⁱ⁾ = S⁽ⁱ⁾x, i.e. the regional objectives with consensus eliminated.
/// Variables no region holds are left at 0.
CentralizedSolution solve_centralized(const Partition& partition,
                                      const std::map<int, RegionInputs>& inputs,
                                      const AdmmConfig& config, int global_dimension);

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Work is split by
/// index so results do not depend on the thread count.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace rsv
