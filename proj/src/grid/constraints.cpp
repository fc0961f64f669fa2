#include "rsv/constraints.hpp"

#include "rsv/errors.hpp"

namespace rsv {

ConstraintMatrix assemble_constraints(const GridNetwork& net, const SystemVariableSpace& space) {
  const int nl = static_cast<int>(net.branch_count());
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(nl) * 16);
  ConstraintMatrix out;
  out.rows.reserve(4 * nl);

  for (int l = 0; l < nl; ++l) {
    const Branch& br = net.branches()[l];
    const int fr = br.from_bus - 1;
    const int to = br.to_bus - 1;
    const double r = br.impedance.real();
    const double x = br.impedance.imag();
    const double z2 = std::norm(br.impedance);
    const auto ra = ConstraintMatrix::row_of(l, RowFamily::active_balance);
    const auto rr = ConstraintMatrix::row_of(l, RowFamily::reactive_balance);
    const auto rv = ConstraintMatrix::row_of(l, RowFamily::voltage_drop);
    const auto rx = ConstraintMatrix::row_of(l, RowFamily::aux_surrogate);

    // p_to - P_l + sum_{l' in fr^-1(to)} P_l' + Re(z) c2_l = 0
    t.emplace_back(ra, space.bus_var(to, VarKind::p), 1.0);
    t.emplace_back(ra, space.branch_var(l, VarKind::P), -1.0);
    t.emplace_back(ra, space.branch_var(l, VarKind::c2), r);
    t.emplace_back(rr, space.bus_var(to, VarKind::q), 1.0);
    t.emplace_back(rr, space.branch_var(l, VarKind::Q), -1.0);
    t.emplace_back(rr, space.branch_var(l, VarKind::c2), x);
    for (int child : net.outgoing_branches(to)) {
      t.emplace_back(ra, space.branch_var(child, VarKind::P), 1.0);
      t.emplace_back(rr, space.branch_var(child, VarKind::Q), 1.0);
    }

    // v2_fr - v2_to - 2 Re(z) P - 2 Im(z) Q + |z|² c2 = 0
    t.emplace_back(rv, space.bus_var(fr, VarKind::v2), 1.0);
    t.emplace_back(rv, space.bus_var(to, VarKind::v2), -1.0);
    t.emplace_back(rv, space.branch_var(l, VarKind::P), -2.0 * r);
    t.emplace_back(rv, space.branch_var(l, VarKind::Q), -2.0 * x);
    t.emplace_back(rv, space.branch_var(l, VarKind::c2), z2);

    t.emplace_back(rx, space.bus_var(fr, VarKind::v2), 1.0);
    t.emplace_back(rx, space.branch_var(l, VarKind::aux), -1.0);

    out.rows.push_back({RowFamily::active_balance, l});
    out.rows.push_back({RowFamily::reactive_balance, l});
    out.rows.push_back({RowFamily::voltage_drop, l});
    out.rows.push_back({RowFamily::aux_surrogate, l});
  }

  out.H.resize(4 * nl, space.dimension());
  out.H.setFromTriplets(t.begin(), t.end());
  out.H.prune(0.0);  // zero-impedance edges leave explicit zeros behind
  out.H.makeCompressed();
  return out;
}

Eigen::VectorXd evaluate_residual(const ConstraintMatrix& H, const Eigen::VectorXd& x) {
  if (x.size() != H.col_count())
    throw DimensionError("system vector has " + std::to_string(x.size()) + " entries, H expects " +
                         std::to_string(H.col_count()));
  return H.H * x;
}

}  // namespace rsv
