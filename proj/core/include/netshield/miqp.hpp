#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "netshield/quadprog.hpp"

namespace netshield {

/// Convex MIQP: the base QP plus a set of variable indices restricted to
/// {0,1}. Binary indices must carry [0,1] bounds in the base problem.
struct MiqpProblem {
  QpProblem base;
  std::vector<int> binary_indices;
};

struct MiqpOptions {
  double gap_tol = 1e-6;
  long node_limit = 100000;
  std::optional<Eigen::VectorXd> initial_incumbent;
  /// Extra warm incumbents; infeasible candidates are silently skipped and
  /// the best feasible one seeds the upper bound.
  std::vector<Eigen::VectorXd> incumbent_candidates;
  double qp_tol = 1e-6;
  double binary_tol = 1e-6;  // integrality tolerance at nodes
  /// Optional rounding heuristic: maps a relaxation point to an integer
  /// feasible point (or nullopt). Called on node relaxations to seed
  /// incumbents early; candidates that violate the constraints are skipped.
  std::function<std::optional<Eigen::VectorXd>(const Eigen::VectorXd&)> rounding;
};

enum class MiqpStatus { optimal, node_limit, infeasible };

struct MiqpSolution {
  Eigen::VectorXd incumbent;  // binaries exactly 0/1
  double objective = 0.0;
  double lower_bound = 0.0;
  double gap = 0.0;  // (objective - lower_bound) / max(1, |objective|)
  long nodes = 0;
  double root_bound = 0.0;
  MiqpStatus status = MiqpStatus::infeasible;
};

/// Branch-and-bound: most-fractional branching (ties by lowest index),
/// best-bound node selection with depth-first plunging. Subproblem
/// relaxations are solved by solve_qp.
MiqpSolution solve_miqp(const MiqpProblem& p, const MiqpOptions& opts = {});

}  // namespace netshield
