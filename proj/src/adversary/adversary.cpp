#include "rsv/adversary.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <random>

#include "rsv/errors.hpp"

namespace rsv {

const char* to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::none: return "none";
    case AttackKind::measurement: return "measurement";
    case AttackKind::state_update: return "state_update";
    case AttackKind::stealth: return "stealth";
  }
  return "none";
}

AttackKind parse_attack_kind(const std::string& text) {
  if (text == "none") return AttackKind::none;
  if (text == "measurement") return AttackKind::measurement;
  if (text == "state_update" || text == "state") return AttackKind::state_update;
  if (text == "stealth") return AttackKind::stealth;
  throw ConfigError("unknown attack kind '" + text + "'");
}

void AttackSpec::validate(const Partition& partition, const SystemVariableSpace& space) const {
  if (!active()) return;
  const auto& view = partition.view(attacker);  // throws for unknown regions
  if (start_iteration < 1) throw ConfigError("attack start_iteration must be >= 1");
  switch (kind) {
    case AttackKind::state_update:
      if (!(rho > 0.0)) throw ConfigError("state_update attacks need rho > 0");
      break;
    case AttackKind::measurement:
      for (const auto& [name, value] : perturbations) {
        const int g = space.parse_name(name);
        const int k = view.local_index(g);
        if (k < 0 || !std::binary_search(view.measured.begin(), view.measured.end(), k))
          throw ConfigError(name + " is not measured by region " + std::to_string(attacker));
      }
      break;
    case AttackKind::stealth:
      if (!(magnitude > 0.0)) throw ConfigError("stealth attacks need magnitude > 0");
      if (victim != 0 && !view.is_neighbor(victim))
        throw ConfigError("stealth victim " + std::to_string(victim) + " is not a neighbor of the attacker");
      break;
    case AttackKind::none: break;
  }
}

Eigen::VectorXd perturb_measurements(const Eigen::VectorXd& s, const RegionView& view,
                                     const SystemVariableSpace& space, const AttackSpec& spec) {
  if (s.size() != static_cast<Eigen::Index>(view.measured.size()))
    throw DimensionError("measurement vector does not match the region");
  Eigen::VectorXd out = s;
  if (spec.kind != AttackKind::measurement) return out;
  for (const auto& [name, value] : spec.perturbations) {
    const int k = view.local_index(space.parse_name(name));
    auto it = std::lower_bound(view.measured.begin(), view.measured.end(), k);
    if (k < 0 || it == view.measured.end() || *it != k)
      throw IndexError(name + " is not in region " + std::to_string(view.id) + "'s measured set");
    out[it - view.measured.begin()] += value;
  }
  return out;
}

namespace {

std::uint64_t splitmix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

Eigen::VectorXd state_attack_vector(Eigen::Index length, const AttackSpec& spec, int k, int neighbor,
                                    std::size_t t) {
  std::uint64_t h = splitmix(spec.seed);
  for (std::uint64_t part : {static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(neighbor),
                             static_cast<std::uint64_t>(t)})
    h = splitmix(h ^ part);
  std::mt19937_64 rng(h);
  std::normal_distribution<double> normal;
  Eigen::VectorXd a(length);
  if (length == 0) return a;
  do {
    for (Eigen::Index i = 0; i < length; ++i) a[i] = normal(rng);
  } while (a.norm() == 0.0);
  a *= spec.rho * std::sqrt(static_cast<double>(length)) / a.norm();
  return a;
}

SharedSlice perturb_outgoing_state(const SharedSlice& message, const AttackSpec& spec, int k, int neighbor) {
  SharedSlice out = message;
  if (spec.kind != AttackKind::state_update || !spec.fires_at(k)) return out;
  for (std::size_t t = 0; t < out.size(); ++t)
    out[t] += state_attack_vector(out[t].size(), spec, k, neighbor, t);
  return out;
}

Eigen::MatrixXd shared_constraint_columns(const RegionView& victim, int attacker) {
  const auto& blk = victim.shared_with(attacker);
  Eigen::MatrixXd M(victim.H.rows(), static_cast<Eigen::Index>(blk.local.size()));
  for (std::size_t c = 0; c < blk.local.size(); ++c) M.col(static_cast<Eigen::Index>(c)) = victim.H.col(blk.local[c]);
  return M;
}

StealthReport stealth_feasibility(const Eigen::MatrixXd& H, const std::vector<int>& shared_columns) {
  StealthReport r;
  const auto n = static_cast<Eigen::Index>(shared_columns.size());
  r.shared_dimension = shared_columns.size();
  Eigen::MatrixXd M(H.rows(), n);
  for (Eigen::Index c = 0; c < n; ++c) M.col(c) = H.col(shared_columns[c]);
  if (M.rows() == 0 || n == 0) {
    r.basis = Eigen::MatrixXd::Identity(n, n);
    r.null_dimension = static_cast<std::size_t>(n);
    return r;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double top = sv.size() ? sv.maxCoeff() : 0.0;
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (top > 0.0 && sv[i] > 1e-10 * top) ++rank;
  r.null_dimension = static_cast<std::size_t>(n - rank);
  r.basis = svd.matrixV().rightCols(n - rank);
  return r;
}

StealthReport stealth_feasibility(const RegionView& victim, int attacker) {
  const auto& blk = victim.shared_with(attacker);
  auto r = stealth_feasibility(victim.H, blk.local);
  r.victim = victim.id;
  r.attacker = attacker;
  return r;
}

StealthAttack craft_stealth_attack(const StealthReport& report, double magnitude, std::uint64_t seed,
                                   const Eigen::MatrixXd* H_shared) {
  StealthAttack out;
  if (report.null_dimension == 0) return out;
  std::mt19937_64 rng(splitmix(seed));
  std::uniform_real_distribution<double> coeff(-1.0, 1.0);
  Eigen::VectorXd c(static_cast<Eigen::Index>(report.null_dimension));
  do {
    for (Eigen::Index i = 0; i < c.size(); ++i) c[i] = coeff(rng);
  } while (c.norm() == 0.0);
  out.vector = report.basis * c;
  out.vector *= magnitude / out.vector.norm();
  out.feasible = true;
  if (H_shared && H_shared->rows() > 0) out.certificate = (*H_shared * out.vector).cwiseAbs().maxCoeff();
  return out;
}

}  // namespace rsv
