#include "rsv/power_flow.hpp"

#include <array>
#include <cmath>

#include "rsv/errors.hpp"

namespace rsv {

Eigen::VectorXd PowerFlowSolution::to_system_vector(const SystemVariableSpace& space) const {
  Eigen::VectorXd x(space.dimension());
  for (Eigen::Index b = 0; b < p.size(); ++b) {
    x[space.bus_var(b, VarKind::p)] = p[b];
    x[space.bus_var(b, VarKind::q)] = q[b];
    x[space.bus_var(b, VarKind::v2)] = v2[b];
  }
  for (Eigen::Index l = 0; l < P.size(); ++l) {
    x[space.branch_var(l, VarKind::P)] = P[l];
    x[space.branch_var(l, VarKind::Q)] = Q[l];
    x[space.branch_var(l, VarKind::c2)] = c2[l];
    x[space.branch_var(l, VarKind::aux)] = aux[l];
  }
  return x;
}

PowerFlowSolution solve_power_flow(const GridNetwork& net, const Eigen::VectorXd& p,
                                   const Eigen::VectorXd& q, const PowerFlowOptions& opt) {
  const auto nb = static_cast<Eigen::Index>(net.bus_count());
  const auto nl = static_cast<Eigen::Index>(net.branch_count());
  if (p.size() != nb || q.size() != nb)
    throw DimensionError("injection vectors must have one entry per bus");

  PowerFlowSolution s;
  s.p = p;
  s.q = q;
  s.v2 = Eigen::VectorXd::Constant(nb, opt.substation_v2);
  s.P = Eigen::VectorXd::Zero(nl);
  s.Q = Eigen::VectorXd::Zero(nl);
  s.c2 = Eigen::VectorXd::Zero(nl);

  const auto& order = net.branch_order();
  const auto& branches = net.branches();

  auto sweep = [&] {
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const int l = *it;
      const int to = branches[l].to_bus - 1;
      double P = p[to] + branches[l].impedance.real() * s.c2[l];
      double Q = q[to] + branches[l].impedance.imag() * s.c2[l];
      for (int child : net.outgoing_branches(to)) {
        P += s.P[child];
        Q += s.Q[child];
      }
      s.P[l] = P;
      s.Q[l] = Q;
    }
    for (int l : order) {
      const auto& br = branches[l];
      s.v2[br.to_bus - 1] = s.v2[br.from_bus - 1] -
                            2.0 * (br.impedance.real() * s.P[l] + br.impedance.imag() * s.Q[l]) +
                            std::norm(br.impedance) * s.c2[l];
    }
  };

  double mismatch = 0.0;
  for (int it = 1; it <= opt.max_sweeps; ++it) {
    sweep();
    mismatch = 0.0;
    for (Eigen::Index l = 0; l < nl; ++l) {
      const double vf = s.v2[branches[l].from_bus - 1];
      if (!(vf > 0.0) || !std::isfinite(vf))
        throw OracleDivergence("power flow produced non-positive v² (infeasible loading)");
      const double c2 = (s.P[l] * s.P[l] + s.Q[l] * s.Q[l]) / vf;
      mismatch = std::max(mismatch, std::abs(c2 - s.c2[l]));
      s.c2[l] = c2;
    }
    if (mismatch < opt.tolerance) {
      sweep();  // make the balance and drop equations exact for the final currents
      s.iterations = it;
      s.max_mismatch = mismatch;
      s.aux.resize(nl);
      for (Eigen::Index l = 0; l < nl; ++l) {
        const double vf = s.v2[branches[l].from_bus - 1];
        s.aux[l] = s.c2[l] > 0.0 ? (s.P[l] * s.P[l] + s.Q[l] * s.Q[l]) / s.c2[l] : vf;
      }
      // The substation balances the feeder.
      const int root = net.substation();
      s.p[root] = 0.0;
      s.q[root] = 0.0;
      for (int l : net.outgoing_branches(root)) {
        s.p[root] += s.P[l];
        s.q[root] += s.Q[l];
      }
      return s;
    }
  }
  throw OracleDivergence("power flow did not converge in " + std::to_string(opt.max_sweeps) +
                         " sweeps (last mismatch " + std::to_string(mismatch) + ")");
}

std::array<double, 4> distflow_residuals(const GridNetwork& net, const PowerFlowSolution& s) {
  std::array<double, 4> worst{};
  const auto& branches = net.branches();
  for (std::size_t l = 0; l < branches.size(); ++l) {
    const auto& br = branches[l];
    const int to = br.to_bus - 1;
    const int fr = br.from_bus - 1;
    double sumP = 0.0;
    double sumQ = 0.0;
    for (int child : net.outgoing_branches(to)) {
      sumP += s.P[child];
      sumQ += s.Q[child];
    }
    const double r = br.impedance.real();
    const double x = br.impedance.imag();
    const double e1 = s.p[to] - (s.P[l] - sumP - r * s.c2[l]);
    const double e2 = s.q[to] - (s.Q[l] - sumQ - x * s.c2[l]);
    const double e3 = s.v2[fr] - (s.v2[to] + 2.0 * (r * s.P[l] + x * s.Q[l]) -
                                  std::norm(br.impedance) * s.c2[l]);
    // current equation in multiplied-out form so unloaded branches (c² = 0) stay defined.
    const double e4 = s.v2[fr] * s.c2[l] - (s.P[l] * s.P[l] + s.Q[l] * s.Q[l]);
    worst[0] = std::max(worst[0], std::abs(e1));
    worst[1] = std::max(worst[1], std::abs(e2));
    worst[2] = std::max(worst[2], std::abs(e3));
    worst[3] = std::max(worst[3], std::abs(e4));
  }
  return worst;
}

}  // namespace rsv
