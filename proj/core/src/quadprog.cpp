#include "netshield/quadprog.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace netshield {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kReg = 1e-9;      // static KKT regularization
constexpr int kMaxIter = 200;
constexpr int kRefineSteps = 2;

struct InternalProblem {
  // min 1/2 z'Qz + c'z  s.t.  At z + s = bt (s >= 0),  Et z = ft.
  Eigen::SparseMatrix<double> Q;  // symmetrized
  Eigen::VectorXd c;
  Eigen::SparseMatrix<double> At;
  Eigen::VectorXd bt;
  Eigen::SparseMatrix<double> Et;
  Eigen::VectorXd ft;
  // Row provenance for mapping duals back.
  std::vector<int> ineq_src;  // >=0: A row index; -(i+1): lo bound on var i; -(i+1+n*?) handled via second vector
  std::vector<int> ineq_bound_var;  // -1 for A rows; else variable index
  std::vector<bool> ineq_is_hi;     // valid when ineq_bound_var >= 0
  std::vector<int> eq_src;          // >=0: E row; else pinned bound on var -(k+1)
  bool trivially_infeasible = false;  // presolve found contradictory constraints
};

InternalProblem build_internal(const QpProblem& p) {
  const int n = p.num_vars();
  if (p.Q.rows() != n || p.Q.cols() != n) throw std::invalid_argument("Q dimension mismatch");
  if (p.A.rows() != p.b.size() || (p.A.rows() > 0 && p.A.cols() != n))
    throw std::invalid_argument("inequality block dimension mismatch");
  if (p.E.rows() != p.f.size() || (p.E.rows() > 0 && p.E.cols() != n))
    throw std::invalid_argument("equality block dimension mismatch");
  const bool has_bounds = p.lo.size() > 0 || p.hi.size() > 0;
  if (has_bounds && (p.lo.size() != n || p.hi.size() != n))
    throw std::invalid_argument("bound dimension mismatch");

  InternalProblem ip;
  Eigen::SparseMatrix<double> Qt = p.Q.transpose();
  ip.Q = 0.5 * (p.Q + Qt);
  ip.c = p.c;

  Eigen::VectorXd lo = has_bounds ? p.lo : Eigen::VectorXd::Constant(n, -kInf);
  Eigen::VectorXd hi = has_bounds ? p.hi : Eigen::VectorXd::Constant(n, kInf);
  for (int i = 0; i < n; ++i)
    if (lo[i] > hi[i] + 1e-12) throw std::invalid_argument("lo exceeds hi");

  auto pinned = [&](int i) {
    return std::isfinite(lo[i]) && std::isfinite(hi[i]) && hi[i] - lo[i] <= 1e-9;
  };

  // Row-major copies of A and E for the presolve scan.
  const int mA = static_cast<int>(p.A.rows());
  const int mE = static_cast<int>(p.E.rows());
  std::vector<std::vector<std::pair<int, double>>> arows(static_cast<size_t>(mA)),
      erows(static_cast<size_t>(mE));
  for (int k = 0; k < p.A.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(p.A, k); it; ++it)
      arows[static_cast<size_t>(it.row())].emplace_back(static_cast<int>(it.col()), it.value());
  for (int k = 0; k < p.E.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(p.E, k); it; ++it)
      erows[static_cast<size_t>(it.row())].emplace_back(static_cast<int>(it.col()), it.value());

  // Presolve: with pinned variables substituted, rows with at most one free
  // variable become bound updates (and cascade further pins). This replaces
  // degenerate opposing-inequality pairs like {x <= M*b with b pinned to 0,
  // x >= 0} by a plain pinned variable, which the interior-point iteration
  // handles without stalling. Only runs when pins are present so unpinned
  // problems keep their row structure (and dual report) untouched.
  std::vector<char> adrop(static_cast<size_t>(mA), 0), edrop(static_cast<size_t>(mE), 0);
  bool any_pin = false;
  for (int i = 0; i < n && !any_pin; ++i) any_pin = pinned(i);
  if (any_pin) {
    bool changed = true;
    while (changed && !ip.trivially_infeasible) {
      changed = false;
      auto scan = [&](bool is_eq) {
        const int rows = is_eq ? mE : mA;
        for (int r = 0; r < rows && !ip.trivially_infeasible; ++r) {
          std::vector<char>& drop = is_eq ? edrop : adrop;
          if (drop[static_cast<size_t>(r)]) continue;
          double rhs = is_eq ? p.f[r] : p.b[r];
          int fv = -1;
          double fc = 0.0;
          int nfree = 0;
          for (auto [j, a] : (is_eq ? erows : arows)[static_cast<size_t>(r)]) {
            if (a == 0.0) continue;
            if (pinned(j)) {
              rhs -= a * 0.5 * (lo[j] + hi[j]);
            } else {
              ++nfree;
              fv = j;
              fc = a;
            }
          }
          if (nfree > 1) continue;
          drop[static_cast<size_t>(r)] = 1;
          changed = true;
          if (nfree == 0) {
            const bool bad = is_eq ? std::abs(rhs) > 1e-7 : rhs < -1e-7;
            if (bad) ip.trivially_infeasible = true;
            continue;
          }
          const double v = rhs / fc;
          if (is_eq) {
            lo[fv] = std::max(lo[fv], v);
            hi[fv] = std::min(hi[fv], v);
          } else if (fc > 0) {
            hi[fv] = std::min(hi[fv], v);
          } else {
            lo[fv] = std::max(lo[fv], v);
          }
          if (lo[fv] > hi[fv] + 1e-7) ip.trivially_infeasible = true;
          if (lo[fv] > hi[fv]) lo[fv] = hi[fv] = 0.5 * (lo[fv] + hi[fv]);
        }
      };
      scan(false);
      scan(true);
    }
  }
  if (ip.trivially_infeasible) return ip;

  std::vector<Eigen::Triplet<double>> atrips, etrips;
  std::vector<double> bvals, fvals;
  // Surviving A rows.
  for (int r = 0; r < mA; ++r) {
    if (adrop[static_cast<size_t>(r)]) continue;
    for (auto [j, a] : arows[static_cast<size_t>(r)])
      atrips.emplace_back(static_cast<int>(bvals.size()), j, a);
    bvals.push_back(p.b[r]);
    ip.ineq_src.push_back(r);
    ip.ineq_bound_var.push_back(-1);
    ip.ineq_is_hi.push_back(false);
  }
  // Surviving E rows.
  for (int r = 0; r < mE; ++r) {
    if (edrop[static_cast<size_t>(r)]) continue;
    for (auto [j, a] : erows[static_cast<size_t>(r)])
      etrips.emplace_back(static_cast<int>(fvals.size()), j, a);
    fvals.push_back(p.f[r]);
    ip.eq_src.push_back(r);
  }
  // Bounds: pinned variables become equalities; finite one-sided bounds
  // become inequality rows.
  for (int i = 0; i < n; ++i) {
    if (pinned(i)) {
      etrips.emplace_back(static_cast<int>(fvals.size()), i, 1.0);
      fvals.push_back(0.5 * (lo[i] + hi[i]));
      ip.eq_src.push_back(-(i + 1));
      continue;
    }
    if (std::isfinite(hi[i])) {
      atrips.emplace_back(static_cast<int>(bvals.size()), i, 1.0);
      bvals.push_back(hi[i]);
      ip.ineq_src.push_back(-1);
      ip.ineq_bound_var.push_back(i);
      ip.ineq_is_hi.push_back(true);
    }
    if (std::isfinite(lo[i])) {
      atrips.emplace_back(static_cast<int>(bvals.size()), i, -1.0);
      bvals.push_back(-lo[i]);
      ip.ineq_src.push_back(-1);
      ip.ineq_bound_var.push_back(i);
      ip.ineq_is_hi.push_back(false);
    }
  }
  ip.At.resize(static_cast<int>(bvals.size()), n);
  ip.At.setFromTriplets(atrips.begin(), atrips.end());
  ip.bt = Eigen::Map<Eigen::VectorXd>(bvals.data(), static_cast<int>(bvals.size()));
  ip.Et.resize(static_cast<int>(fvals.size()), n);
  ip.Et.setFromTriplets(etrips.begin(), etrips.end());
  ip.ft = Eigen::Map<Eigen::VectorXd>(fvals.data(), static_cast<int>(fvals.size()));
  return ip;
}

void check_psd(const Eigen::SparseMatrix<double>& Q) {
  if (Q.rows() == 0) return;
  double scale = 1.0;
  for (int i = 0; i < Q.rows(); ++i) scale = std::max(scale, std::abs(Q.coeff(i, i)));
  Eigen::SparseMatrix<double> shifted = Q;
  for (int i = 0; i < Q.rows(); ++i) shifted.coeffRef(i, i) += 1e-9 * scale;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(shifted);
  if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() < -1e-6 * scale)
    throw std::invalid_argument("nonconvex objective");
}

// Assemble the regularized KKT matrix [Q + At'D At + dI, Et'; Et, -dI].
Eigen::SparseMatrix<double> assemble_kkt(const InternalProblem& ip, const Eigen::VectorXd& D,
                                         double reg) {
  const int n = static_cast<int>(ip.c.size());
  const int me = static_cast<int>(ip.Et.rows());
  Eigen::SparseMatrix<double> H = ip.Q;
  if (ip.At.rows() > 0) {
    Eigen::SparseMatrix<double> DA = D.cwiseSqrt().asDiagonal() * ip.At;
    Eigen::SparseMatrix<double> AtDA = Eigen::SparseMatrix<double>(DA.transpose()) * DA;
    H = H + AtDA;
  }
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<size_t>(H.nonZeros() + 2 * ip.Et.nonZeros() + n + me));
  for (int k = 0; k < H.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(H, k); it; ++it)
      trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
  for (int i = 0; i < n; ++i) trips.emplace_back(i, i, reg);
  for (int k = 0; k < ip.Et.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(ip.Et, k); it; ++it) {
      trips.emplace_back(n + static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
      trips.emplace_back(static_cast<int>(it.col()), n + static_cast<int>(it.row()), it.value());
    }
  for (int r = 0; r < me; ++r) trips.emplace_back(n + r, n + r, -reg);
  Eigen::SparseMatrix<double> K(n + me, n + me);
  K.setFromTriplets(trips.begin(), trips.end());
  return K;
}

using KktFactor = Eigen::SparseLU<Eigen::SparseMatrix<double>>;

// Factor the regularized KKT matrix, escalating the regularization when the
// barrier term makes the pivots degenerate.
bool factorize_kkt(const InternalProblem& ip, const Eigen::VectorXd& D, KktFactor& lu) {
  double reg = kReg;
  for (int attempt = 0; attempt < 4; ++attempt) {
    lu.compute(assemble_kkt(ip, D, reg));
    if (lu.info() == Eigen::Success) return true;
    reg *= 1e3;
  }
  return false;
}

// Solve K0 x = rhs with iterative refinement against the unregularized
// blocks (K0 = [H Et'; Et 0] with H = Q + At'DAt).
Eigen::VectorXd kkt_solve(const KktFactor& ldlt, const InternalProblem& ip,
                          const Eigen::VectorXd& D, const Eigen::VectorXd& rhs) {
  const int n = static_cast<int>(ip.c.size());
  const int me = static_cast<int>(ip.Et.rows());
  auto apply_exact = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd out(n + me);
    Eigen::VectorXd vz = v.head(n);
    Eigen::VectorXd top = ip.Q * vz;
    if (ip.At.rows() > 0) top += ip.At.transpose() * (D.asDiagonal() * (ip.At * vz));
    if (me > 0) top += ip.Et.transpose() * v.tail(me);
    out.head(n) = top;
    if (me > 0) out.tail(me) = ip.Et * vz;
    return out;
  };
  Eigen::VectorXd x = ldlt.solve(rhs);
  for (int r = 0; r < kRefineSteps; ++r) {
    Eigen::VectorXd resid = rhs - apply_exact(x);
    x += ldlt.solve(resid);
  }
  return x;
}

double step_to_boundary(const Eigen::VectorXd& v, const Eigen::VectorXd& dv, double tau) {
  double alpha = 1.0;
  for (int i = 0; i < v.size(); ++i)
    if (dv[i] < 0) alpha = std::min(alpha, -tau * v[i] / dv[i]);
  return alpha;
}

}  // namespace

const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::optimal: return "optimal";
    case QpStatus::infeasible: return "infeasible";
    case QpStatus::unbounded: return "unbounded";
    case QpStatus::max_iter: return "max_iter";
  }
  return "unknown";
}

QpSolution solve_qp(const QpProblem& p, double tol, const std::optional<Eigen::VectorXd>& z0) {
  if (tol <= 0) throw std::invalid_argument("tol must be positive");
  InternalProblem ip = build_internal(p);
  const int n = p.num_vars();
  if (ip.trivially_infeasible) {
    QpSolution sol;
    sol.z = Eigen::VectorXd::Zero(n);
    sol.ineq_dual = Eigen::VectorXd::Zero(p.A.rows());
    sol.eq_dual = Eigen::VectorXd::Zero(p.E.rows());
    sol.lo_dual = Eigen::VectorXd::Zero(n);
    sol.hi_dual = Eigen::VectorXd::Zero(n);
    sol.status = QpStatus::infeasible;
    return sol;
  }
  check_psd(ip.Q);

  const int mi = static_cast<int>(ip.At.rows());
  const int me = static_cast<int>(ip.Et.rows());

  QpSolution sol;
  sol.ineq_dual = Eigen::VectorXd::Zero(p.A.rows());
  sol.eq_dual = Eigen::VectorXd::Zero(p.E.rows());
  sol.lo_dual = Eigen::VectorXd::Zero(n);
  sol.hi_dual = Eigen::VectorXd::Zero(n);

  Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
  if (z0 && z0->size() == n) z = *z0;
  Eigen::VectorXd lam_eq = Eigen::VectorXd::Zero(me);
  Eigen::VectorXd lam = Eigen::VectorXd::Ones(mi);
  Eigen::VectorXd s(mi);
  if (mi > 0) s = (ip.bt - ip.At * z).cwiseMax(1.0);

  const double scale_c = 1.0 + ip.c.lpNorm<Eigen::Infinity>();
  const double scale_b = 1.0 + (mi > 0 ? ip.bt.lpNorm<Eigen::Infinity>() : 0.0) +
                         (me > 0 ? ip.ft.lpNorm<Eigen::Infinity>() : 0.0);

  auto finalize = [&](QpStatus status, int iters) {
    sol.z = z;
    sol.objective = 0.5 * z.dot(ip.Q * z) + ip.c.dot(z);
    double dgap = 0.0;
    if (mi > 0) dgap += lam.dot(ip.At * z - ip.bt);
    if (me > 0) dgap += lam_eq.dot(ip.Et * z - ip.ft);
    sol.dual_objective = sol.objective + dgap;
    for (int r = 0; r < mi; ++r) {
      if (ip.ineq_bound_var[static_cast<size_t>(r)] < 0)
        sol.ineq_dual[ip.ineq_src[static_cast<size_t>(r)]] = lam[r];
      else if (ip.ineq_is_hi[static_cast<size_t>(r)])
        sol.hi_dual[ip.ineq_bound_var[static_cast<size_t>(r)]] = lam[r];
      else
        sol.lo_dual[ip.ineq_bound_var[static_cast<size_t>(r)]] = lam[r];
    }
    for (int r = 0; r < me; ++r) {
      const int src = ip.eq_src[static_cast<size_t>(r)];
      if (src >= 0) {
        sol.eq_dual[src] = lam_eq[r];
      } else {
        const int var = -src - 1;
        if (lam_eq[r] >= 0)
          sol.hi_dual[var] = lam_eq[r];
        else
          sol.lo_dual[var] = -lam_eq[r];
      }
    }
    sol.status = status;
    sol.iterations = iters;
    return sol;
  };

  // No inequalities: one regularized KKT solve.
  if (mi == 0) {
    Eigen::VectorXd D;  // unused
    KktFactor ldlt;
    if (!factorize_kkt(ip, D, ldlt)) throw std::runtime_error("KKT factorization failed");
    Eigen::VectorXd rhs(n + me);
    rhs.head(n) = -ip.c;
    if (me > 0) rhs.tail(me) = ip.ft;
    Eigen::VectorXd x = kkt_solve(ldlt, ip, D, rhs);
    z = x.head(n);
    if (me > 0) lam_eq = x.tail(me);
    Eigen::VectorXd rd = ip.Q * z + ip.c;
    if (me > 0) rd += ip.Et.transpose() * lam_eq;
    double re = me > 0 ? (ip.Et * z - ip.ft).lpNorm<Eigen::Infinity>() : 0.0;
    sol.kkt_residual = std::max(rd.lpNorm<Eigen::Infinity>() / scale_c, re / scale_b);
    if (!z.allFinite() || sol.kkt_residual > std::max(tol, 1e-6)) {
      // Singular reduced system: either unbounded objective or inconsistent
      // equalities.
      return finalize(re / scale_b > std::max(tol, 1e-6) ? QpStatus::infeasible
                                                         : QpStatus::unbounded,
                      1);
    }
    return finalize(QpStatus::optimal, 1);
  }

  QpStatus verdict = QpStatus::max_iter;
  int iter = 0;
  for (; iter < kMaxIter; ++iter) {
    Eigen::VectorXd rd = ip.Q * z + ip.c + ip.At.transpose() * lam;
    if (me > 0) rd += ip.Et.transpose() * lam_eq;
    Eigen::VectorXd rp = ip.At * z + s - ip.bt;
    Eigen::VectorXd re = me > 0 ? Eigen::VectorXd(ip.Et * z - ip.ft) : Eigen::VectorXd();
    const double gap = s.dot(lam);
    const double obj = 0.5 * z.dot(ip.Q * z) + ip.c.dot(z);

    const double res_d = rd.lpNorm<Eigen::Infinity>() / scale_c;
    const double res_p =
        std::max(rp.lpNorm<Eigen::Infinity>(), me > 0 ? re.lpNorm<Eigen::Infinity>() : 0.0) /
        scale_b;
    const double res_g = gap / (1.0 + std::abs(obj));
    sol.kkt_residual = std::max({res_d, res_p, res_g});
    if (sol.kkt_residual <= tol) {
      verdict = QpStatus::optimal;
      break;
    }
    if (!z.allFinite() || !lam.allFinite()) break;
    if (lam.lpNorm<Eigen::Infinity>() > 1e11 && res_p > 1e3 * tol) {
      verdict = QpStatus::infeasible;
      break;
    }
    if (z.lpNorm<Eigen::Infinity>() > 1e11) {
      verdict = QpStatus::unbounded;
      break;
    }

    const double mu = gap / mi;
    Eigen::VectorXd D = lam.cwiseQuotient(s).cwiseMin(1e14).cwiseMax(1e-14);
    KktFactor ldlt;
    if (!factorize_kkt(ip, D, ldlt)) throw std::runtime_error("KKT factorization failed");

    auto direction = [&](const Eigen::VectorXd& rc) {
      Eigen::VectorXd rhs(n + me);
      rhs.head(n) =
          -rd + ip.At.transpose() * (rc.cwiseQuotient(s) - D.cwiseProduct(rp));
      if (me > 0) rhs.tail(me) = -re;
      Eigen::VectorXd x = kkt_solve(ldlt, ip, D, rhs);
      Eigen::VectorXd dz = x.head(n);
      Eigen::VectorXd dnu = me > 0 ? Eigen::VectorXd(x.tail(me)) : Eigen::VectorXd();
      Eigen::VectorXd ds = -rp - ip.At * dz;
      Eigen::VectorXd dl = -(rc.cwiseQuotient(s)) - D.cwiseProduct(ds);
      return std::make_tuple(dz, dnu, ds, dl);
    };

    // Affine scaling (predictor) step.
    Eigen::VectorXd rc_aff = s.cwiseProduct(lam);
    auto [dz_a, dnu_a, ds_a, dl_a] = direction(rc_aff);
    const double ap_a = step_to_boundary(s, ds_a, 1.0);
    const double ad_a = step_to_boundary(lam, dl_a, 1.0);
    const double mu_aff = (s + ap_a * ds_a).dot(lam + ad_a * dl_a) / mi;
    const double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);

    // Corrector step.
    Eigen::VectorXd rc = s.cwiseProduct(lam) + ds_a.cwiseProduct(dl_a) -
                         Eigen::VectorXd::Constant(mi, sigma * mu);
    auto [dz, dnu, ds, dl] = direction(rc);

    const double tau = std::max(0.99, 1.0 - 10.0 * mu);
    const double ap = step_to_boundary(s, ds, tau);
    const double ad = step_to_boundary(lam, dl, tau);
    if (std::min(ap, ad) < 1e-12) break;  // stalled
    z += ap * dz;
    s += ap * ds;
    lam += ad * dl;
    if (me > 0) lam_eq += ad * dnu;
  }

  if (verdict == QpStatus::max_iter) {
    // Classify a stall: tiny complementarity with stuck primal residual is
    // treated as infeasible.
    Eigen::VectorXd rp = ip.At * z + s - ip.bt;
    double res_p = rp.lpNorm<Eigen::Infinity>() / scale_b;
    if (me > 0) res_p = std::max(res_p, (ip.Et * z - ip.ft).lpNorm<Eigen::Infinity>() / scale_b);
    if (s.dot(lam) / mi < 1e3 * tol && res_p > 1e3 * tol) verdict = QpStatus::infeasible;
  }
  return finalize(verdict, iter);
}

}  // namespace netshield
