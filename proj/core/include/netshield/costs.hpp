#pragma once

#include <Eigen/Dense>
#include <variant>
#include <vector>

namespace netshield {

/// Affine travel time c_a(x) = phi_a * x_a + beta_a.
struct LinearCost {
  Eigen::VectorXd phi;   // time per unit flow, >= 0
  Eigen::VectorXd beta;  // free-flow travel time, >= 0
};

/// BPR travel time c_a(x) = t0_a * (1 + alpha_a * (x_a / capacity_a)^4).
struct BprCost {
  Eigen::VectorXd t0;        // free-flow travel time, > 0
  Eigen::VectorXd capacity;  // practical capacity c', > 0
  Eigen::VectorXd alpha;     // congestion coefficient, >= 0
  static constexpr int exponent = 4;
};

using CostFunction = std::variant<LinearCost, BprCost>;

int arc_count(const CostFunction& cost);

/// Per-arc travel time at the given nonnegative flow.
Eigen::VectorXd eval_cost(const CostFunction& cost, const Eigen::VectorXd& flow);

/// Sum over arcs of the integral of c_a from 0 to flow_a.
/// Linear: sum phi x^2/2 + beta x.  BPR: sum t0 x + t0 alpha x^5 / (5 c'^4).
double beckmann_potential(const CostFunction& cost, const Eigen::VectorXd& flow);

/// Piecewise-linear interpolant of a BPR cost on uniform breakpoints over
/// [0, capacity_a] per arc. Exact at breakpoints; max_error holds an
/// empirical bound on the interpolation error per arc.
struct PiecewiseLinearCost {
  std::vector<Eigen::VectorXd> breakpoints;  // per arc, strictly increasing, starts at 0
  std::vector<Eigen::VectorXd> values;       // exact BPR value at each breakpoint
  Eigen::VectorXd max_error;                 // per arc

  int arc_count() const { return static_cast<int>(breakpoints.size()); }
  /// Interpolated travel time on one arc (clamped to the last segment's
  /// slope beyond the final breakpoint).
  double eval(int arc, double flow) const;
};

PiecewiseLinearCost linearize(const BprCost& cost, int segments);

}  // namespace netshield
