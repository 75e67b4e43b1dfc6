#pragma once

#include <vector>

#include "netshield/costs.hpp"
#include "netshield/equilibrium.hpp"
#include "netshield/network.hpp"
#include "netshield/quadprog.hpp"

namespace netshield {

enum class CostFamily { linear_phi, bpr_alpha };

/// Per-arc parameter vector under recovery, with its family box bounds.
struct Theta {
  CostFamily family = CostFamily::linear_phi;
  Eigen::VectorXd values;
  double lower = 0.0;
  double upper = 0.0;
};

/// Box bounds for the recovered parameter: phi in [2,10], alpha in [0.1,0.2].
std::pair<double, double> theta_bounds(CostFamily family);

/// Parameters assumed known during recovery: beta for the linear family,
/// t0 and capacity for BPR.
struct KnownParams {
  Eigen::VectorXd beta;
  Eigen::VectorXd t0;
  Eigen::VectorXd capacity;
};

CostFunction make_cost(CostFamily family, const Eigen::VectorXd& theta_values,
                       const KnownParams& known);

/// Duality-gap fitting QP: variables (theta, y^1..y^J, eps^1..eps^J) in that
/// order with y^j and eps^j interleaved per observation; objective
/// sum eps_j^2; constraints -N'y^j <= c(x^j; theta), y^j >= 0,
/// c(x^j; theta)'x^j + d^j'y^j <= eps^j, theta in its box.
QpProblem build_io_qp(const Network& net, const std::vector<FlowObservation>& observations,
                      CostFamily family, const KnownParams& known);

struct IoSolution {
  Theta theta;
  std::vector<Eigen::VectorXd> duals;  // y^j per observation
  Eigen::VectorXd epsilons;
  double objective = 0.0;
};

IoSolution recover(const Network& net, const std::vector<FlowObservation>& observations,
                   CostFamily family, const KnownParams& known, double tol = 1e-8);

/// Frobenius norm of the difference between the J x m equilibrium flow
/// matrices generated under the two costs.
double flow_error(const Network& net, const CostFunction& cost_true,
                  const CostFunction& cost_recovered, const std::vector<OdPair>& pairs,
                  double rel_gap = 1e-8);

}  // namespace netshield
