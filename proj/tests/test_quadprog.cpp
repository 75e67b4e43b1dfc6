#include <doctest.h>

#include <cmath>
#include <random>

#include "netshield/quadprog.hpp"

using namespace netshield;

namespace {

struct DenseQp {
  Eigen::MatrixXd Q;
  Eigen::VectorXd c;
  Eigen::MatrixXd A;  // all inequalities, bounds included
  Eigen::VectorXd b;
  Eigen::MatrixXd E;
  Eigen::VectorXd f;
};

// Flatten a QpProblem into dense form with bounds expanded to rows.
DenseQp densify(const QpProblem& p) {
  const int n = p.num_vars();
  DenseQp d;
  d.Q = Eigen::MatrixXd(p.Q);
  d.Q = 0.5 * (d.Q + d.Q.transpose().eval());
  d.c = p.c;
  std::vector<Eigen::VectorXd> rows;
  std::vector<double> rhs;
  Eigen::MatrixXd A = Eigen::MatrixXd(p.A);
  for (int r = 0; r < A.rows(); ++r) {
    rows.push_back(A.row(r));
    rhs.push_back(p.b[r]);
  }
  if (p.lo.size() == n) {
    for (int i = 0; i < n; ++i) {
      if (std::isfinite(p.hi[i])) {
        Eigen::VectorXd row = Eigen::VectorXd::Zero(n);
        row[i] = 1.0;
        rows.push_back(row);
        rhs.push_back(p.hi[i]);
      }
      if (std::isfinite(p.lo[i])) {
        Eigen::VectorXd row = Eigen::VectorXd::Zero(n);
        row[i] = -1.0;
        rows.push_back(row);
        rhs.push_back(-p.lo[i]);
      }
    }
  }
  d.A.resize(static_cast<int>(rows.size()), n);
  d.b.resize(static_cast<int>(rows.size()));
  for (size_t r = 0; r < rows.size(); ++r) {
    d.A.row(static_cast<int>(r)) = rows[r];
    d.b[static_cast<int>(r)] = rhs[r];
  }
  d.E = Eigen::MatrixXd(p.E);
  d.f = p.f;
  return d;
}

// Exhaustive active-set oracle: try every subset of inequality rows as the
// active set, solve the resulting equality-constrained QP, and keep the best
// point that is primal feasible with nonnegative multipliers on the subset.
// Exponential, so only for tiny problems.
double active_set_oracle(const QpProblem& p, Eigen::VectorXd* argmin = nullptr) {
  DenseQp d = densify(p);
  const int n = static_cast<int>(d.c.size());
  const int mi = static_cast<int>(d.A.rows());
  const int me = static_cast<int>(d.E.rows());
  REQUIRE(mi <= 16);
  double best = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_z;
  for (unsigned mask = 0; mask < (1u << mi); ++mask) {
    std::vector<int> act;
    for (int r = 0; r < mi; ++r)
      if (mask & (1u << r)) act.push_back(r);
    const int k = static_cast<int>(act.size()) + me;
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + k, n + k);
    Eigen::VectorXd rhs(n + k);
    K.topLeftCorner(n, n) = d.Q;
    rhs.head(n) = -d.c;
    int row = 0;
    for (int r : act) {
      K.block(n + row, 0, 1, n) = d.A.row(r);
      K.block(0, n + row, n, 1) = d.A.row(r).transpose();
      rhs[n + row] = d.b[r];
      ++row;
    }
    for (int r = 0; r < me; ++r) {
      K.block(n + row, 0, 1, n) = d.E.row(r);
      K.block(0, n + row, n, 1) = d.E.row(r).transpose();
      rhs[n + row] = d.f[r];
      ++row;
    }
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(K);
    if (cod.rank() < n + k) continue;  // degenerate subset
    Eigen::VectorXd sol = cod.solve(rhs);
    Eigen::VectorXd z = sol.head(n);
    // Primal feasibility of the full system.
    if (mi > 0 && ((d.A * z - d.b).array() > 1e-7).any()) continue;
    if (me > 0 && (d.E * z - d.f).cwiseAbs().maxCoeff() > 1e-7) continue;
    // Dual feasibility on the active subset.
    bool dual_ok = true;
    for (int r = 0; r < static_cast<int>(act.size()); ++r)
      if (sol[n + r] < -1e-7) dual_ok = false;
    if (!dual_ok) continue;
    const double obj = 0.5 * z.dot(d.Q * z) + d.c.dot(z);
    if (obj < best) {
      best = obj;
      best_z = z;
    }
  }
  if (argmin && best_z.size() > 0) *argmin = best_z;
  return best;
}

Eigen::SparseMatrix<double> sparse(const Eigen::MatrixXd& m) {
  return m.sparseView();
}

}  // namespace

TEST_CASE("matches the active-set oracle on random strictly convex problems") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> gauss;
  for (int rep = 0; rep < 40; ++rep) {
    const int n = 2 + static_cast<int>(rng() % 3);
    const int mi = 1 + static_cast<int>(rng() % 4);
    Eigen::MatrixXd B(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) B(i, j) = gauss(rng);
    Eigen::MatrixXd Q = B.transpose() * B + 0.2 * Eigen::MatrixXd::Identity(n, n);
    QpProblem p;
    p.Q = sparse(Q);
    p.c.resize(n);
    for (int i = 0; i < n; ++i) p.c[i] = gauss(rng);
    Eigen::MatrixXd A(mi, n);
    p.b.resize(mi);
    for (int r = 0; r < mi; ++r) {
      for (int j = 0; j < n; ++j) A(r, j) = gauss(rng);
      p.b[r] = 1.0 + std::abs(gauss(rng));  // keeps z = 0 strictly feasible
    }
    p.A = sparse(A);
    p.E.resize(0, n);
    p.f.resize(0);

    QpSolution got = solve_qp(p, 1e-9);
    REQUIRE(got.status == QpStatus::optimal);
    const double want = active_set_oracle(p);
    CHECK(got.objective == doctest::Approx(want).epsilon(1e-6));
  }
}

TEST_CASE("matches the oracle with equalities and box bounds") {
  std::mt19937_64 rng(22);
  std::normal_distribution<double> gauss;
  for (int rep = 0; rep < 25; ++rep) {
    const int n = 3;
    Eigen::MatrixXd B(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) B(i, j) = gauss(rng);
    Eigen::MatrixXd Q = B.transpose() * B + 0.1 * Eigen::MatrixXd::Identity(n, n);
    QpProblem p;
    p.Q = sparse(Q);
    p.c = Eigen::VectorXd::NullaryExpr(n, [&](int) { return gauss(rng); });
    Eigen::MatrixXd E(1, n);
    E << 1.0, 1.0, 1.0;
    p.E = sparse(E);
    p.f = Eigen::VectorXd::Constant(1, 1.5);
    p.A.resize(0, n);
    p.b.resize(0);
    p.lo = Eigen::VectorXd::Constant(n, -1.0);
    p.hi = Eigen::VectorXd::Constant(n, 2.0);
    QpSolution got = solve_qp(p, 1e-9);
    REQUIRE(got.status == QpStatus::optimal);
    const double want = active_set_oracle(p);
    CHECK(got.objective == doctest::Approx(want).epsilon(1e-6));
  }
}

TEST_CASE("reports duals satisfying stationarity") {
  QpProblem p;
  const int n = 2;
  Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(n, n) * 2.0;
  p.Q = sparse(Q);
  p.c = (Eigen::VectorXd(n) << -4.0, -6.0).finished();
  Eigen::MatrixXd A(1, n);
  A << 1.0, 1.0;
  p.A = sparse(A);
  p.b = Eigen::VectorXd::Constant(1, 1.0);
  p.E.resize(0, n);
  p.f.resize(0);
  p.lo = Eigen::VectorXd::Zero(n);
  p.hi = Eigen::VectorXd::Constant(n, 10.0);
  QpSolution s = solve_qp(p, 1e-10);
  REQUIRE(s.status == QpStatus::optimal);
  // grad + A'mu + hi_dual - lo_dual = 0
  Eigen::VectorXd grad = Q * s.z + p.c;
  Eigen::VectorXd res = grad + A.transpose() * s.ineq_dual + s.hi_dual - s.lo_dual;
  CHECK(res.cwiseAbs().maxCoeff() < 1e-6);
  CHECK(s.ineq_dual.minCoeff() >= 0.0);
  CHECK(std::abs(s.objective - s.dual_objective) < 1e-6);
}

TEST_CASE("pinned bounds act as equalities") {
  QpProblem p;
  p.Q = sparse(Eigen::MatrixXd::Identity(2, 2));
  p.c = Eigen::VectorXd::Zero(2);
  p.A.resize(0, 2);
  p.b.resize(0);
  p.E.resize(0, 2);
  p.f.resize(0);
  p.lo = (Eigen::VectorXd(2) << 3.0, -10.0).finished();
  p.hi = (Eigen::VectorXd(2) << 3.0, 10.0).finished();
  QpSolution s = solve_qp(p, 1e-10);
  REQUIRE(s.status == QpStatus::optimal);
  CHECK(s.z[0] == doctest::Approx(3.0));
  CHECK(s.z[1] == doctest::Approx(0.0).epsilon(1e-8));
}

TEST_CASE("detects infeasible constraint systems") {
  QpProblem p;
  p.Q = sparse(Eigen::MatrixXd::Identity(1, 1));
  p.c = Eigen::VectorXd::Zero(1);
  Eigen::MatrixXd A(2, 1);
  A << 1.0, -1.0;
  p.A = sparse(A);
  p.b = (Eigen::VectorXd(2) << -1.0, -1.0).finished();  // z <= -1 and z >= 1
  p.E.resize(0, 1);
  p.f.resize(0);
  QpSolution s = solve_qp(p, 1e-8);
  CHECK(s.status == QpStatus::infeasible);
}

TEST_CASE("presolve reduces pinned big-M style rows to a feasible pin") {
  // x <= M b with b pinned to 0 and x in [0, 10] forces x = 0.
  QpProblem p;
  p.Q = sparse(Eigen::MatrixXd::Identity(2, 2) * 1e-3);
  p.c = (Eigen::VectorXd(2) << -1.0, 0.0).finished();
  Eigen::MatrixXd A(1, 2);
  A << 1.0, -1440.0;
  p.A = sparse(A);
  p.b = Eigen::VectorXd::Zero(1);
  p.E.resize(0, 2);
  p.f.resize(0);
  p.lo = Eigen::VectorXd::Zero(2);
  p.hi = (Eigen::VectorXd(2) << 10.0, 0.0).finished();  // b pinned to 0
  QpSolution s = solve_qp(p, 1e-9);
  REQUIRE(s.status == QpStatus::optimal);
  CHECK(std::abs(s.z[0]) < 1e-8);
  CHECK(std::abs(s.z[1]) < 1e-12);
}

TEST_CASE("contradictory pins are reported infeasible, not thrown") {
  // b pinned to 0 makes x <= 0 clash with x >= 1.
  QpProblem p;
  p.Q = sparse(Eigen::MatrixXd::Identity(2, 2));
  p.c = Eigen::VectorXd::Zero(2);
  Eigen::MatrixXd A(1, 2);
  A << 1.0, -5.0;
  p.A = sparse(A);
  p.b = Eigen::VectorXd::Zero(1);
  p.E.resize(0, 2);
  p.f.resize(0);
  p.lo = (Eigen::VectorXd(2) << 1.0, 0.0).finished();
  p.hi = (Eigen::VectorXd(2) << 10.0, 0.0).finished();
  QpSolution s = solve_qp(p, 1e-9);
  CHECK(s.status == QpStatus::infeasible);
}

TEST_CASE("rejects nonconvex objectives") {
  QpProblem p;
  p.Q = sparse(-Eigen::MatrixXd::Identity(2, 2));
  p.c = Eigen::VectorXd::Zero(2);
  p.A.resize(0, 2);
  p.b.resize(0);
  p.E.resize(0, 2);
  p.f.resize(0);
  p.lo = Eigen::VectorXd::Constant(2, -1.0);
  p.hi = Eigen::VectorXd::Constant(2, 1.0);
  CHECK_THROWS(solve_qp(p));
}
