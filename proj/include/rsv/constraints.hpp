#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <vector>

#include "rsv/network.hpp"
#include "rsv/variables.hpp"

namespace rsv {

enum class RowFamily : std::uint8_t {
  active_balance,    // p at to(l) against P_l, child flows and r·c²
  reactive_balance,  // same for q and Q with x·c²
  voltage_drop,      // v² drop along the branch
  aux_surrogate,     // v²_fr(l) - x'_l = 0, the relaxed current equation
};

struct RowTag {
  RowFamily family;
  int branch;  // 0-based
};

/// Linear DistFlow system H x = 0, four rows per branch in the order
/// active balance, reactive balance, voltage drop, aux surrogate.
struct ConstraintMatrix {
  Eigen::SparseMatrix<double, Eigen::RowMajor> H;
  std::vector<RowTag> rows;

  Eigen::Index row_count() const { return H.rows(); }
  Eigen::Index col_count() const { return H.cols(); }
  static Eigen::Index row_of(int branch, RowFamily family) {
    return 4 * branch + static_cast<int>(family);
  }
};

ConstraintMatrix assemble_constraints(const GridNetwork& net, const SystemVariableSpace& space);

/// Hx. Throws DimensionError when x has the wrong length.
Eigen::VectorXd evaluate_residual(const ConstraintMatrix& H, const Eigen::VectorXd& x);

}  // namespace rsv
