#include "rsv/detection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>

#include "rsv/errors.hpp"

namespace rsv {

double DetectionConfig::alpha(int k) const {
  if (k < 1) throw ConfigError("detection rounds start at k = 1");
  return alpha_schedule == Alpha::harmonic ? 1.0 / k : alpha_constant;
}

double DetectionConfig::beta_for(int region) const {
  auto it = beta_overrides.find(region);
  return it == beta_overrides.end() ? beta : it->second;
}

void DetectionConfig::validate() const {
  if (alpha_schedule == Alpha::constant && !(alpha_constant > 0.0 && alpha_constant <= 1.0))
    throw ConfigError("constant alpha must lie in (0, 1]");
  if (!(pi_tolerance > 0.0)) throw ConfigError("pi_tolerance must be > 0");
  if (!(beta > 0.0)) throw ConfigError("beta must be > 0");
  for (const auto& [r, b] : beta_overrides)
    if (!(b > 0.0)) throw ConfigError("beta for region " + std::to_string(r) + " must be > 0");
  if (!(normalization_guard > 0.0)) throw ConfigError("normalization_guard must be > 0");
  if (!(min_disagreement >= 0.0)) throw ConfigError("min_disagreement must be >= 0");
  if (!(damping > 0.0 && damping < 1.0)) throw ConfigError("damping must lie in (0, 1)");
  if (power_iteration_cap < 1) throw ConfigError("power_iteration_cap must be >= 1");
}

double update_disagreement(double previous, const SharedSlice& own, const SharedSlice& received, int k,
                           const DetectionConfig& config) {
  if (own.size() != received.size() || own.empty())
    throw DimensionError("disagreement needs one slice per time index on both sides");
  const auto n = own.front().size();
  double sum = 0.0;
  for (std::size_t t = 0; t < own.size(); ++t) {
    if (own[t].size() != received[t].size() || own[t].size() != n)
      throw DimensionError("shared slices differ in length");
    sum += (own[t] - received[t]).squaredNorm();
  }
  const double a = config.alpha(k);
  if (n == 0) return (1.0 - a) * previous;
  return a / 4.0 / (static_cast<double>(n) * static_cast<double>(own.size())) * sum + (1.0 - a) * previous;
}

TrustMatrix build_trust_matrix(const DisagreementMap& d, const CommunicationGraph& graph,
                               const DetectionConfig& config) {
  TrustMatrix out;
  out.regions = graph.nodes();
  const auto N = static_cast<Eigen::Index>(out.regions.size());
  out.B = Eigen::MatrixXd::Zero(N, N);
  auto pos = [&](int r) {
    return static_cast<Eigen::Index>(std::lower_bound(out.regions.begin(), out.regions.end(), r) -
                                     out.regions.begin());
  };
  for (Eigen::Index a = 0; a < N; ++a) {
    const int i = out.regions[a];
    const auto& nbrs = graph.neighbors(i);
    if (nbrs.empty()) throw StructuralError("region " + std::to_string(i) + " has no neighbors");
    double total = 0.0;
    for (int j : nbrs) {
      auto it = d.find({i, j});
      if (it == d.end())
        throw StructuralError("missing disagreement score d_" + std::to_string(i) + "," + std::to_string(j));
      total += it->second;
    }
    for (int j : nbrs) out.B(a, pos(j)) = d.at({i, j}) / (total + config.normalization_guard);
    const double row = out.B.row(a).sum();
    if (row > 0.0) {
      out.B.row(a) /= row;
    } else {
      for (int j : nbrs) out.B(a, pos(j)) = 1.0 / static_cast<double>(nbrs.size());
    }
  }
  return out;
}

int chain_period(const Eigen::MatrixXd& B) {
  const auto N = B.rows();
  if (N == 0) return 0;
  std::vector<long> level(N, -1);
  level[0] = 0;
  std::queue<Eigen::Index> todo;
  todo.push(0);
  long g = 0;
  while (!todo.empty()) {
    const auto u = todo.front();
    todo.pop();
    for (Eigen::Index v = 0; v < N; ++v) {
      if (B(u, v) <= 0.0) continue;
      if (level[v] < 0) {
        level[v] = level[u] + 1;
        todo.push(v);
      } else {
        g = std::gcd(g, std::abs(level[u] + 1 - level[v]));
      }
    }
  }
  if (std::any_of(level.begin(), level.end(), [](long l) { return l < 0; })) return 0;
  return static_cast<int>(g);
}

namespace {

bool power_iterate(const Eigen::MatrixXd& M, const DetectionConfig& config, StationaryResult& out) {
  const auto N = M.rows();
  Eigen::RowVectorXd pi = Eigen::RowVectorXd::Constant(N, 1.0 / static_cast<double>(N));
  for (int it = 1; it <= config.power_iteration_cap; ++it) {
    Eigen::RowVectorXd next = pi * M;
    next /= next.sum();
    const double change = (next - pi).cwiseAbs().maxCoeff();
    pi = next;
    if (change < config.power_iteration_tolerance) {
      out.pi = pi.transpose();
      out.iterations = it;
      return true;
    }
  }
  out.pi = pi.transpose();
  out.iterations = config.power_iteration_cap;
  return false;
}

}  // namespace

StationaryResult stationary_distribution(const Eigen::MatrixXd& B, const DetectionConfig& config) {
  if (B.rows() != B.cols() || B.rows() == 0) throw DimensionError("trust matrix must be square and non-empty");
  StationaryResult out;
  const auto N = B.rows();
  // A periodic chain never settles from a generic start, so go straight to
  // the damped chain; a periodic chain can still look converged from the
  // uniform start by symmetry.
  if (chain_period(B) == 1) {
    out.chain = B;
    if (power_iterate(B, config, out)) return out;
  }
  out.damped = true;
  out.chain = config.damping * B +
              Eigen::MatrixXd::Constant(N, N, (1.0 - config.damping) / static_cast<double>(N));
  if (!power_iterate(out.chain, config, out))
    throw Error("damped power iteration did not converge");
  return out;
}

ExcludedStats excluded_stats(const Eigen::VectorXd& pi, Eigen::Index i) {
  const auto N = pi.size();
  if (N < 2) throw StructuralError("excluded statistics need at least two regions");
  if (i < 0 || i >= N) throw IndexError("excluded index out of range");
  double sum = 0.0;
  for (Eigen::Index j = 0; j < N; ++j)
    if (j != i) sum += pi[j];
  ExcludedStats s;
  s.mean = sum / static_cast<double>(N - 1);
  double var = 0.0;
  for (Eigen::Index j = 0; j < N; ++j)
    if (j != i) var += (pi[j] - s.mean) * (pi[j] - s.mean);
  s.stddev = std::sqrt(var / static_cast<double>(N - 1));
  return s;
}

TrustState::TrustState(const CommunicationGraph& graph, DetectionConfig config)
    : graph_(graph), config_(std::move(config)), regions_(graph.nodes()) {
  config_.validate();
  for (int i : regions_)
    for (int j : graph_.neighbors(i)) d_[{i, j}] = 0.0;
  const auto N = static_cast<Eigen::Index>(regions_.size());
  pi_ = Eigen::VectorXd::Zero(N);
  pi_prev_ = pi_;
  B_ = Eigen::MatrixXd::Zero(N, N);
}

void TrustState::update(int i, int j, const SharedSlice& own, const SharedSlice& received, int k) {
  auto it = d_.find({i, j});
  if (it == d_.end())
    throw IndexError("regions " + std::to_string(i) + " and " + std::to_string(j) + " are not neighbors");
  it->second = update_disagreement(it->second, own, received, k, config_);
}

void TrustState::set_disagreement(int i, int j, double value) {
  auto it = d_.find({i, j});
  if (it == d_.end())
    throw IndexError("regions " + std::to_string(i) + " and " + std::to_string(j) + " are not neighbors");
  if (!(value >= 0.0)) throw DimensionError("disagreement scores are nonnegative");
  it->second = value;
}

double TrustState::disagreement(int i, int j) const {
  auto it = d_.find({i, j});
  if (it == d_.end())
    throw IndexError("regions " + std::to_string(i) + " and " + std::to_string(j) + " are not neighbors");
  return it->second;
}

void TrustState::refresh() {
  auto tm = build_trust_matrix(d_, graph_, config_);
  B_ = std::move(tm.B);
  auto st = stationary_distribution(B_, config_);
  pi_prev_ = pi_;
  pi_ = std::move(st.pi);
  damped_ = st.damped;
  ++rounds_;
}

double TrustState::pi_of(int region) const {
  auto it = std::lower_bound(regions_.begin(), regions_.end(), region);
  if (it == regions_.end() || *it != region) throw IndexError("region " + std::to_string(region) + " not tracked");
  return pi_[it - regions_.begin()];
}

Verdict threshold_verdict(const Eigen::VectorXd& pi, const Eigen::VectorXd& previous, const std::vector<int>& regions,
                          const DetectionConfig& config) {
  Verdict v;
  if (pi.size() != previous.size() || pi.size() != static_cast<Eigen::Index>(regions.size()))
    throw DimensionError("trust vectors and region list differ in length");
  if ((pi - previous).cwiseAbs().maxCoeff() > config.pi_tolerance) return v;
  v.kind = VerdictKind::none;
  bool exceeded = false;
  for (Eigen::Index i = 0; i < pi.size() && !exceeded; ++i) {
    const auto s = excluded_stats(pi, i);
    exceeded = pi[i] > s.mean + config.beta_for(regions[static_cast<std::size_t>(i)]) * s.stddev;
  }
  if (!exceeded) return v;
  Eigen::Index top = 0;
  for (Eigen::Index i = 1; i < pi.size(); ++i) {
    const auto at = [&](Eigen::Index n) { return regions[static_cast<std::size_t>(n)]; };
    if (pi[i] > pi[top] || (pi[i] == pi[top] && at(i) < at(top))) top = i;
  }
  v.kind = VerdictKind::attacker;
  v.region = regions[static_cast<std::size_t>(top)];
  return v;
}

Verdict check_verdict(const TrustState& trust) {
  if (trust.rounds() < 2) return {};
  Verdict v = threshold_verdict(trust.pi(), trust.previous_pi(), trust.regions(), trust.config());
  if (v.kind != VerdictKind::attacker) return v;
  double strongest = 0.0;
  for (int a : trust.graph().neighbors(v.region)) strongest = std::max(strongest, trust.disagreement(a, v.region));
  if (strongest <= trust.config().min_disagreement) return {VerdictKind::none, 0};
  return v;
}

}  // namespace rsv
