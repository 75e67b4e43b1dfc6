#pragma once

#include <iosfwd>
#include <vector>

#include "netshield/snpp.hpp"
#include "netshield/worker_pool.hpp"

namespace netshield {

struct PhOptions {
  double rho = 5.0;
  double epsilon = 0.01;     // consensus threshold on the dispersion metric
  int max_iterations = 300;  // cap on hedging iterations after the relaxed pass
  MiqpOptions miqp;          // knobs for each scenario subproblem
};

struct PhIterationRecord {
  int iteration = 0;
  double g = 0.0;         // dispersion of scenario decisions around the anchor
  double anchor_l1 = 0.0; // ||u_bar||_1
  double seconds = 0.0;   // wall time of this iteration
};

struct PhResult {
  Eigen::VectorXd u;  // consensus protection, projected onto budget and box
  std::vector<Eigen::VectorXd> scenario_u;
  std::vector<double> scenario_objectives;  // Q^s at each scenario's last solution
  double expected_cost = 0.0;  // sum_s p^s Q^s with u fixed to the consensus
  std::vector<PhIterationRecord> history;
  int iterations = 0;
  bool converged = false;
};

/// Probability-weighted dispersion sum_s p^s ||u^s - u_bar||_1 / max(1,
/// ||u_bar||_1); probabilities are renormalized to sum to one.
double convergence_metric(const std::vector<Eigen::VectorXd>& scenario_u,
                          const std::vector<double>& probabilities,
                          const Eigen::VectorXd& u_bar);

/// Euclidean projection onto {u : 0 <= u <= 1, sum u <= budget}.
Eigen::VectorXd project_protection(const Eigen::VectorXd& u, double budget);

/// Progressive hedging over the scenario subproblems: an initial pass without
/// hedging terms, then multiplier updates w^s += rho (u^s - u_bar) and
/// proximal terms anchored at u_bar until the dispersion drops below epsilon
/// or the iteration cap is hit. A null pool runs scenarios sequentially.
PhResult progressive_hedging(const SnppInstance& inst, const PhOptions& opts = {},
                             WorkerPool* pool = nullptr);

/// Per-scenario second-stage cost with the protection frozen: returns Q^s for
/// every scenario and leaves the probability weighting to the caller.
std::vector<double> evaluate_protection(const SnppInstance& inst, const Eigen::VectorXd& u,
                                        const MiqpOptions& opts = {}, WorkerPool* pool = nullptr);

void write_history_csv(std::ostream& out, const std::vector<PhIterationRecord>& history);

}  // namespace netshield
