#include "rsv/admm.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <exception>
#include <thread>

#include "rsv/errors.hpp"

namespace rsv {

void AdmmConfig::validate() const {
  if (!(c1 >= 0.0)) throw ConfigError("c1 must be >= 0");
  if (!(c2 > 0.0)) throw ConfigError("c2 must be > 0");
  if (!(tolerance > 0.0)) throw ConfigError("tolerance must be > 0");
  if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
  if (horizon.empty()) throw ConfigError("horizon must hold at least one time index");
  if (!(ridge >= 0.0)) throw ConfigError("ridge must be >= 0");
}

namespace {

std::size_t null_dimension(const Eigen::MatrixXd& A) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(A, Eigen::EigenvaluesOnly);
  const auto& ev = eig.eigenvalues();
  const double top = std::max(ev.cwiseAbs().maxCoeff(), 1.0);
  return static_cast<std::size_t>((ev.array() <= 1e-12 * top).count());
}

// A Cholesky factor that succeeded but has a pivot this small relative to the
// matrix is treated as a failure.
bool factor_is_sound(const Eigen::LLT<Eigen::MatrixXd>& llt, const Eigen::MatrixXd& A) {
  if (llt.info() != Eigen::Success) return false;
  if (A.rows() == 0) return true;
  const Eigen::VectorXd piv = llt.matrixLLT().diagonal().array().square();
  return piv.minCoeff() > 1e-12 * std::max(A.diagonal().maxCoeff(), 1.0);
}

}  // namespace

RegionAdmm::RegionAdmm(const RegionView& view, const AdmmConfig& config, RegionInputs inputs)
    : view_(&view), config_(config), inputs_(std::move(inputs)) {
  config.validate();
  const std::size_t T = config.horizon_size();
  if (inputs_.measurements.size() != T || inputs_.schedule.size() != T)
    throw DimensionError("region " + std::to_string(view.id) + ": inputs do not cover the horizon");
  const auto na = static_cast<Eigen::Index>(view.measured.size());
  const auto np = static_cast<Eigen::Index>(view.scheduled.size());
  for (std::size_t t = 0; t < T; ++t) {
    if (inputs_.measurements[t].size() != na || inputs_.schedule[t].size() != np)
      throw DimensionError("region " + std::to_string(view.id) + ": input dimension mismatch");
  }

  const int n = view.dimension();
  const double w = config.unweighted_schedule_update ? 1.0 : config.c1;
  system_ = view.H.transpose() * view.H;
  for (int k : view.measured) system_(k, k) += 1.0;
  for (int k : view.scheduled) system_(k, k) += w;
  system_.diagonal() += config.c2 * view.degree;
  if (config.ridge > 0.0) system_.diagonal().array() += config.ridge;

  factor_.compute(system_);
  if (!factor_is_sound(factor_, system_)) {
    const auto nd = std::max<std::size_t>(null_dimension(system_), 1);
    throw UnderdeterminedError("region " + std::to_string(view.id) +
                                   ": x-update matrix is singular (null dimension " +
                                   std::to_string(nd) + ")",
                               nd);
  }

  base_rhs_.assign(T, Eigen::VectorXd::Zero(n));
  for (std::size_t t = 0; t < T; ++t) {
    for (Eigen::Index a = 0; a < na; ++a) base_rhs_[t][view.measured[a]] += inputs_.measurements[t][a];
    for (Eigen::Index p = 0; p < np; ++p) base_rhs_[t][view.scheduled[p]] += w * inputs_.schedule[t][p];
  }

  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
  x_.assign(T, zero);
  x_prev_ = psi_ = psi_prev_ = upsilon_ = lambda_ = x_;
}

void RegionAdmm::set_start() {
  for (std::size_t t = 0; t < x_.size(); ++t) {
    x_[t].setZero();
    for (int k : view_->voltages) x_[t][k] = 1.0;
    if (config_.start == StartPolicy::schedule_seeded) {
      for (std::size_t p = 0; p < view_->scheduled.size(); ++p)
        x_[t][view_->scheduled[p]] = inputs_.schedule[t][static_cast<Eigen::Index>(p)];
    }
    x_prev_[t] = x_[t];
  }
}

void RegionAdmm::set_state(std::size_t t, const Eigen::VectorXd& x) {
  if (x.size() != view_->dimension()) throw DimensionError("state has the wrong dimension");
  x_.at(t) = x;
  x_prev_.at(t) = x;
}

void RegionAdmm::offset_state(std::size_t t, const std::vector<int>& local, const Eigen::VectorXd& delta) {
  if (delta.size() != static_cast<Eigen::Index>(local.size())) throw DimensionError("offset has the wrong length");
  for (std::size_t k = 0; k < local.size(); ++k) x_.at(t)[local[k]] += delta[static_cast<Eigen::Index>(k)];
}

Eigen::VectorXd RegionAdmm::scatter(const Inbox& inbox, std::size_t t) const {
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(view_->dimension());
  for (const auto& blk : view_->shared) {
    auto it = inbox.find(blk.neighbor);
    if (it == inbox.end())
      throw StructuralError("region " + std::to_string(view_->id) + " is missing the message from region " +
                            std::to_string(blk.neighbor));
    const auto& msg = it->second.at(t);
    if (msg.size() != static_cast<Eigen::Index>(blk.local.size()))
      throw DimensionError("message from region " + std::to_string(blk.neighbor) + " has " +
                           std::to_string(msg.size()) + " entries, expected " +
                           std::to_string(blk.local.size()));
    for (std::size_t s = 0; s < blk.local.size(); ++s) acc[blk.local[s]] += msg[static_cast<Eigen::Index>(s)];
  }
  return view_->degree_pinv.cwiseProduct(acc);
}

void RegionAdmm::complete_initialization(const Inbox& inbox) {
  for (std::size_t t = 0; t < x_.size(); ++t) {
    psi_[t] = scatter(inbox, t);
    psi_prev_[t] = psi_[t];
    upsilon_[t] = 0.5 * (psi_[t] + x_[t]);
    lambda_[t].setZero();
  }
}

Eigen::VectorXd RegionAdmm::rhs(std::size_t t) const {
  return base_rhs_.at(t) + config_.c2 * view_->degree.cwiseProduct(upsilon_.at(t));
}

void RegionAdmm::x_update() {
  for (std::size_t t = 0; t < x_.size(); ++t) {
    x_prev_[t] = x_[t];
    x_[t] = factor_.solve(rhs(t));
    if (!x_[t].allFinite())
      throw Error("region " + std::to_string(view_->id) + ": x-update produced non-finite values");
  }
}

void RegionAdmm::psi_update(const Inbox& inbox) {
  for (std::size_t t = 0; t < x_.size(); ++t) {
    psi_prev_[t] = psi_[t];
    psi_[t] = scatter(inbox, t);
  }
}

void RegionAdmm::upsilon_update() {
  const double c2 = config_.c2;
  for (std::size_t t = 0; t < x_.size(); ++t) {
    if (!config_.canonical_dual) {
      upsilon_[t] += psi_[t] - 0.5 * (psi_prev_[t] + x_prev_[t]);
      continue;
    }
    // λ ← λ + (c2/2) D (x − ψ);  c2 D υ = c2 D (x + ψ)/2 − λ
    lambda_[t] += 0.5 * c2 * view_->degree.cwiseProduct(x_[t] - psi_[t]);
    const Eigen::VectorXd mid = 0.5 * (x_[t] + psi_[t]);
    for (Eigen::Index k = 0; k < mid.size(); ++k) {
      const double d = view_->degree[k];
      upsilon_[t][k] = d > 0.0 ? mid[k] - lambda_[t][k] / (c2 * d) : 0.0;
    }
  }
}

SharedSlice RegionAdmm::extract_shared(int neighbor) const {
  const auto& blk = view_->shared_with(neighbor);
  SharedSlice out;
  out.reserve(x_.size());
  for (const auto& x : x_) {
    Eigen::VectorXd s(static_cast<Eigen::Index>(blk.local.size()));
    for (std::size_t k = 0; k < blk.local.size(); ++k) s[static_cast<Eigen::Index>(k)] = x[blk.local[k]];
    out.push_back(std::move(s));
  }
  return out;
}

double RegionAdmm::displacement() const {
  double worst = 0.0;
  for (std::size_t t = 0; t < x_.size(); ++t)
    if (x_[t].size()) worst = std::max(worst, (x_[t] - x_prev_[t]).cwiseAbs().maxCoeff());
  return worst;
}

CentralizedSolution solve_centralized(const Partition& partition,
                                      const std::map<int, RegionInputs>& inputs,
                                      const AdmmConfig& config, int global_dimension) {
  config.validate();
  const std::size_t T = config.horizon_size();
  const double w = config.unweighted_schedule_update ? 1.0 : config.c1;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(global_dimension, global_dimension);
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(global_dimension, static_cast<Eigen::Index>(T));

  for (const auto& v : partition.views) {
    auto it = inputs.find(v.id);
    if (it == inputs.end()) throw StructuralError("no inputs for region " + std::to_string(v.id));
    const auto& in = it->second;
    if (in.measurements.size() != T || in.schedule.size() != T)
      throw DimensionError("region " + std::to_string(v.id) + ": inputs do not cover the horizon");
    const Eigen::MatrixXd HtH = v.H.transpose() * v.H;
    for (int a = 0; a < v.dimension(); ++a)
      for (int c = 0; c < v.dimension(); ++c) A(v.variables[a], v.variables[c]) += HtH(a, c);
    for (std::size_t m = 0; m < v.measured.size(); ++m) {
      const int g = v.variables[v.measured[m]];
      A(g, g) += 1.0;
      for (std::size_t t = 0; t < T; ++t) b(g, static_cast<Eigen::Index>(t)) += in.measurements[t][static_cast<Eigen::Index>(m)];
    }
    for (std::size_t p = 0; p < v.scheduled.size(); ++p) {
      const int g = v.variables[v.scheduled[p]];
      A(g, g) += w;
      for (std::size_t t = 0; t < T; ++t) b(g, static_cast<Eigen::Index>(t)) += w * in.schedule[t][static_cast<Eigen::Index>(p)];
    }
  }

  CentralizedSolution out;
  std::vector<bool> held(global_dimension, false);
  for (const auto& v : partition.views)
    for (int g : v.variables) held[g] = true;
  for (int g = 0; g < global_dimension; ++g)
    if (held[g]) out.used.push_back(g);

  const auto n = static_cast<Eigen::Index>(out.used.size());
  Eigen::MatrixXd Au(n, n);
  Eigen::MatrixXd bu(n, static_cast<Eigen::Index>(T));
  for (Eigen::Index a = 0; a < n; ++a) {
    bu.row(a) = b.row(out.used[a]);
    for (Eigen::Index c = 0; c < n; ++c) Au(a, c) = A(out.used[a], out.used[c]);
  }
  Eigen::LLT<Eigen::MatrixXd> llt(Au);
  if (!factor_is_sound(llt, Au)) {
    const auto nd = std::max<std::size_t>(null_dimension(Au), 1);
    throw UnderdeterminedError("centralized normal matrix is singular (null dimension " +
                                   std::to_string(nd) + ")",
                               nd);
  }
  const Eigen::MatrixXd xu = llt.solve(bu);
  out.x.assign(T, Eigen::VectorXd::Zero(global_dimension));
  for (std::size_t t = 0; t < T; ++t)
    for (Eigen::Index a = 0; a < n; ++a) out.x[t][out.used[a]] = xu(a, static_cast<Eigen::Index>(t));
  return out;
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  const std::size_t used = std::min(workers, n);
  pool.reserve(used);
  for (std::size_t w = 0; w < used; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += used) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace rsv
