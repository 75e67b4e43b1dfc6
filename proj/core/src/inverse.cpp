#include "netshield/inverse.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace netshield {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void validate_known(CostFamily family, const KnownParams& known, int m) {
  if (family == CostFamily::linear_phi) {
    if (known.beta.size() != m)
      throw std::invalid_argument("linear family requires known beta per arc");
  } else {
    if (known.t0.size() != m || known.capacity.size() != m)
      throw std::invalid_argument("BPR family requires known t0 and capacity per arc");
  }
}

// c_a(x; theta) = coeff_a(x) * theta_a + offset_a, affine in theta at fixed
// flow.
void cost_affine_parts(CostFamily family, const KnownParams& known, const Eigen::VectorXd& flow,
                       Eigen::VectorXd& coeff, Eigen::VectorXd& offset) {
  if (family == CostFamily::linear_phi) {
    coeff = flow;
    offset = known.beta;
  } else {
    coeff = (known.t0.array() *
             (flow.array() / known.capacity.array()).pow(BprCost::exponent))
                .matrix();
    offset = known.t0;
  }
}

}  // namespace

std::pair<double, double> theta_bounds(CostFamily family) {
  return family == CostFamily::linear_phi ? std::make_pair(2.0, 10.0)
                                          : std::make_pair(0.1, 0.2);
}

CostFunction make_cost(CostFamily family, const Eigen::VectorXd& theta_values,
                       const KnownParams& known) {
  validate_known(family, known, static_cast<int>(theta_values.size()));
  if (family == CostFamily::linear_phi) return LinearCost{theta_values, known.beta};
  return BprCost{known.t0, known.capacity, theta_values};
}

QpProblem build_io_qp(const Network& net, const std::vector<FlowObservation>& observations,
                      CostFamily family, const KnownParams& known) {
  if (observations.empty()) throw std::invalid_argument("no observations");
  const int n = net.node_count();
  const int m = net.arc_count();
  const int J = static_cast<int>(observations.size());
  validate_known(family, known, m);

  // Layout: theta (m), then per observation j: y^j (n), eps^j (1).
  const int nvars = m + J * (n + 1);
  auto y_off = [&](int j) { return m + j * (n + 1); };
  auto eps_off = [&](int j) { return m + j * (n + 1) + n; };

  QpProblem qp;
  qp.c = Eigen::VectorXd::Zero(nvars);
  std::vector<Eigen::Triplet<double>> qtrips;
  for (int j = 0; j < J; ++j) qtrips.emplace_back(eps_off(j), eps_off(j), 2.0);
  qp.Q.resize(nvars, nvars);
  qp.Q.setFromTriplets(qtrips.begin(), qtrips.end());

  std::vector<Eigen::Triplet<double>> atrips;
  std::vector<double> bvals;
  for (int j = 0; j < J; ++j) {
    const FlowObservation& obs = observations[static_cast<size_t>(j)];
    if (obs.flow.size() != m || obs.demand.entries.size() != n)
      throw std::invalid_argument("observation dimension mismatch");
    Eigen::VectorXd coeff, offset;
    cost_affine_parts(family, known, obs.flow, coeff, offset);

    // Dual feasibility: -(N'y)_a - coeff_a theta_a <= offset_a, i.e.
    // y_tail - y_head - coeff_a theta_a <= offset_a.
    for (int a = 0; a < m; ++a) {
      const int row = static_cast<int>(bvals.size());
      atrips.emplace_back(row, y_off(j) + net.arc(a).tail, 1.0);
      atrips.emplace_back(row, y_off(j) + net.arc(a).head, -1.0);
      if (coeff[a] != 0.0) atrips.emplace_back(row, a, -coeff[a]);
      bvals.push_back(offset[a]);
    }
    // Duality gap: c(x;theta)'x + d'y - eps <= 0.
    {
      const int row = static_cast<int>(bvals.size());
      double rhs = 0.0;
      for (int a = 0; a < m; ++a) {
        const double w = coeff[a] * obs.flow[a];
        if (w != 0.0) atrips.emplace_back(row, a, w);
        rhs -= offset[a] * obs.flow[a];
      }
      for (int i = 0; i < n; ++i)
        if (obs.demand.entries[i] != 0.0)
          atrips.emplace_back(row, y_off(j) + i, obs.demand.entries[i]);
      atrips.emplace_back(row, eps_off(j), -1.0);
      bvals.push_back(rhs);
    }
  }
  qp.A.resize(static_cast<int>(bvals.size()), nvars);
  qp.A.setFromTriplets(atrips.begin(), atrips.end());
  qp.b = Eigen::Map<Eigen::VectorXd>(bvals.data(), static_cast<int>(bvals.size()));
  qp.E.resize(0, nvars);
  qp.f.resize(0);

  const auto [lo_theta, hi_theta] = theta_bounds(family);
  qp.lo = Eigen::VectorXd::Constant(nvars, -kInf);
  qp.hi = Eigen::VectorXd::Constant(nvars, kInf);
  qp.lo.head(m).setConstant(lo_theta);
  qp.hi.head(m).setConstant(hi_theta);
  for (int j = 0; j < J; ++j) qp.lo.segment(y_off(j), n).setZero();
  return qp;
}

IoSolution recover(const Network& net, const std::vector<FlowObservation>& observations,
                   CostFamily family, const KnownParams& known, double tol) {
  QpProblem qp = build_io_qp(net, observations, family, known);
  QpSolution qs = solve_qp(qp, tol);
  if (qs.status != QpStatus::optimal)
    throw std::runtime_error(std::string("inverse QP solve failed: ") + to_string(qs.status));

  const int n = net.node_count();
  const int m = net.arc_count();
  const int J = static_cast<int>(observations.size());
  IoSolution sol;
  const auto [lo, hi] = theta_bounds(family);
  sol.theta = Theta{family, qs.z.head(m).cwiseMax(lo).cwiseMin(hi), lo, hi};
  sol.epsilons.resize(J);
  for (int j = 0; j < J; ++j) {
    sol.duals.push_back(qs.z.segment(m + j * (n + 1), n).cwiseMax(0.0));
    sol.epsilons[j] = qs.z[m + j * (n + 1) + n];
  }
  sol.objective = sol.epsilons.squaredNorm();
  return sol;
}

double flow_error(const Network& net, const CostFunction& cost_true,
                  const CostFunction& cost_recovered, const std::vector<OdPair>& pairs,
                  double rel_gap) {
  if (cost_true.index() != cost_recovered.index())
    throw std::invalid_argument("cost families differ");
  double sq = 0.0;
  for (const OdPair& p : pairs) {
    const DemandVector d = demand_vector(net, p.origin, p.dest, p.amount);
    const FlowObservation a = solve_tep(net, cost_true, d, rel_gap);
    const FlowObservation b = solve_tep(net, cost_recovered, d, rel_gap);
    sq += (a.flow - b.flow).squaredNorm();
  }
  return std::sqrt(sq);
}

}  // namespace netshield
