#pragma once

#include <Eigen/Dense>
#include <functional>
#include <tuple>
#include <utility>
#include <vector>

#include "netshield/costs.hpp"
#include "netshield/network.hpp"

namespace netshield {

/// One observed equilibrium: arc flows, the demand that produced them, and
/// per-node potentials (minimum travel time to the destination).
struct FlowObservation {
  Eigen::VectorXd flow;
  DemandVector demand;
  Eigen::VectorXd potentials;
};

struct TepDiagnostics {
  std::vector<double> beckmann_history;  // one entry per outer iteration
  std::vector<double> gap_history;       // relative gap per outer iteration
  int iterations = 0;
};

/// Wardrop equilibrium for a single-destination demand: minimizes the
/// Beckmann potential over {x >= 0 : N x = d} by path equilibration with
/// safeguarded line search, until the relative optimality gap
/// (c(x)'x - demand * shortest-path cost) / max(1, c(x)'x) is <= rel_gap.
FlowObservation solve_tep(const Network& net, const CostFunction& cost,
                          const DemandVector& demand, double rel_gap = 1e-8,
                          TepDiagnostics* diag = nullptr);

/// Separable per-arc cost as a callable: (arc index, arc flow) -> cost.
/// Must be nonnegative and nondecreasing in the flow argument.
using ArcCostFn = std::function<double(int, double)>;

struct AssignmentResult {
  Eigen::VectorXd flow;
  /// Origins (with amounts) that cannot reach the destination through the
  /// enabled arcs; their demand is left unrouted.
  std::vector<std::pair<NodeId, double>> shed;
};

/// Path-equilibration engine behind solve_tep, generalized to an arbitrary
/// separable nondecreasing arc cost and an optional arc mask (disabled arcs
/// carry no flow). Unreachable origins are reported in `shed` instead of
/// raising. `on_iteration(flow, rel)` is invoked once per outer iteration.
AssignmentResult equilibrate_single_destination(
    const Network& net, const ArcCostFn& arc_cost, const DemandVector& demand,
    double rel_gap, const std::vector<char>* enabled = nullptr,
    const std::function<void(const Eigen::VectorXd&, double)>& on_iteration = {});

/// Residuals of the equilibrium complementarity system at an observation.
struct ComplementarityReport {
  double stationarity = 0.0;      // max_a clip(min(x_a, (c + N'y)_a), 0)
  double dual_feasibility = 0.0;  // max_a clip(-(c + N'y)_a, 0)
  double demand_residual = 0.0;   // ||d - N x||_inf
  double demand_comp = 0.0;       // max_i |min(y_i, (d - N x)_i)|
  double max_residual() const;
  bool passes(double tol) const { return max_residual() <= tol; }
};

ComplementarityReport check_complementarity(const Network& net, const CostFunction& cost,
                                            const FlowObservation& obs);

struct OdPair {
  NodeId origin = 0;
  NodeId dest = 0;
  double amount = 0.0;
};

/// One independent equilibrium solve per OD configuration; output order
/// matches input order.
std::vector<FlowObservation> generate_data(const Network& net, const CostFunction& cost,
                                           const std::vector<OdPair>& pairs,
                                           double rel_gap = 1e-8);

/// All ordered node pairs of the network with a fixed demand amount.
std::vector<OdPair> all_od_pairs(const Network& net, double amount);

}  // namespace netshield
