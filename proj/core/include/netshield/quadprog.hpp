#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <optional>

namespace netshield {

/// Convex QP:  min 1/2 z'Qz + c'z  s.t.  A z <= b,  E z = f,  lo <= z <= hi.
/// Q must be symmetric positive semidefinite. A and E may have zero rows;
/// lo/hi may be empty (no bounds) and entries may be +-inf.
struct QpProblem {
  Eigen::SparseMatrix<double> Q;
  Eigen::VectorXd c;
  Eigen::SparseMatrix<double> A;
  Eigen::VectorXd b;
  Eigen::SparseMatrix<double> E;
  Eigen::VectorXd f;
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  int num_vars() const { return static_cast<int>(c.size()); }
};

enum class QpStatus { optimal, infeasible, unbounded, max_iter };

/// When status == optimal, the max KKT residual (stationarity, primal
/// feasibility, complementarity scaled by 1 + |objective|) is <= the solve
/// tolerance. Inequality and bound duals are nonnegative.
struct QpSolution {
  Eigen::VectorXd z;
  Eigen::VectorXd ineq_dual;  // one per A row
  Eigen::VectorXd eq_dual;    // one per E row
  Eigen::VectorXd lo_dual;    // one per variable (0 where bound absent)
  Eigen::VectorXd hi_dual;
  double objective = 0.0;
  double dual_objective = 0.0;
  double kkt_residual = 0.0;
  QpStatus status = QpStatus::max_iter;
  int iterations = 0;
};

/// Primal-dual interior-point solve (Mehrotra predictor-corrector on the
/// regularized KKT system). Throws on dimension mismatch or when negative
/// curvature is detected in Q.
QpSolution solve_qp(const QpProblem& p, double tol = 1e-8,
                    const std::optional<Eigen::VectorXd>& z0 = std::nullopt);

const char* to_string(QpStatus s);

}  // namespace netshield
