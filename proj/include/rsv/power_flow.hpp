#pragma once

#include <Eigen/Dense>
#include <array>

#include "rsv/network.hpp"
#include "rsv/variables.hpp"

namespace rsv {

struct PowerFlowOptions {
  double tolerance = 1e-10;
  int max_sweeps = 200;
  double substation_v2 = 1.0;
};

/// Full nonlinear DistFlow state.
struct PowerFlowSolution {
  Eigen::VectorXd p, q, v2;       // per bus
  Eigen::VectorXd P, Q, c2, aux;  // per branch
  int iterations = 0;
  double max_mismatch = 0.0;

  /// Stacks the solution into the global ordering of `space`.
  Eigen::VectorXd to_system_vector(const SystemVariableSpace& space) const;
};

/// Backward/forward sweep on the four branch-flow equations. `p`/`q` hold the
/// per-bus injections; the substation entries are ignored and come back as
/// whatever balances the feeder (the substation bus never appears as to(l)).
/// Throws OracleDivergence when the sweep cap is reached.
PowerFlowSolution solve_power_flow(const GridNetwork& net, const Eigen::VectorXd& p,
                                   const Eigen::VectorXd& q, const PowerFlowOptions& opt = {});

/// Max |residual| of each nonlinear equation family, in RowFamily order.
std::array<double, 4> distflow_residuals(const GridNetwork& net, const PowerFlowSolution& s);

}  // namespace rsv
