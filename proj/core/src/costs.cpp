#include "netshield/costs.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace netshield {

namespace {

void check_flow(const Eigen::VectorXd& flow, int m) {
  if (flow.size() != m) throw std::invalid_argument("flow length does not match arc count");
  if ((flow.array() < 0).any()) throw std::invalid_argument("negative flow");
}

}  // namespace

int arc_count(const CostFunction& cost) {
  if (const auto* lin = std::get_if<LinearCost>(&cost)) return static_cast<int>(lin->phi.size());
  return static_cast<int>(std::get<BprCost>(cost).t0.size());
}

Eigen::VectorXd eval_cost(const CostFunction& cost, const Eigen::VectorXd& flow) {
  if (const auto* lin = std::get_if<LinearCost>(&cost)) {
    check_flow(flow, static_cast<int>(lin->phi.size()));
    return lin->phi.cwiseProduct(flow) + lin->beta;
  }
  const auto& bpr = std::get<BprCost>(cost);
  check_flow(flow, static_cast<int>(bpr.t0.size()));
  Eigen::ArrayXd ratio = flow.array() / bpr.capacity.array();
  return (bpr.t0.array() * (1.0 + bpr.alpha.array() * ratio.pow(BprCost::exponent))).matrix();
}

double beckmann_potential(const CostFunction& cost, const Eigen::VectorXd& flow) {
  if (const auto* lin = std::get_if<LinearCost>(&cost)) {
    check_flow(flow, static_cast<int>(lin->phi.size()));
    return (lin->phi.array() * flow.array().square() / 2.0 + lin->beta.array() * flow.array()).sum();
  }
  const auto& bpr = std::get<BprCost>(cost);
  check_flow(flow, static_cast<int>(bpr.t0.size()));
  Eigen::ArrayXd x = flow.array();
  return (bpr.t0.array() * x +
          bpr.t0.array() * bpr.alpha.array() * x.pow(5) / (5.0 * bpr.capacity.array().pow(4)))
      .sum();
}

double PiecewiseLinearCost::eval(int arc, double flow) const {
  const Eigen::VectorXd& bp = breakpoints[static_cast<size_t>(arc)];
  const Eigen::VectorXd& v = values[static_cast<size_t>(arc)];
  const int n = static_cast<int>(bp.size());
  int seg = n - 2;
  for (int i = 0; i + 1 < n; ++i) {
    if (flow <= bp[i + 1]) {
      seg = i;
      break;
    }
  }
  const double slope = (v[seg + 1] - v[seg]) / (bp[seg + 1] - bp[seg]);
  return v[seg] + slope * (flow - bp[seg]);
}

PiecewiseLinearCost linearize(const BprCost& cost, int segments) {
  if (segments < 1) throw std::invalid_argument("segments must be >= 1");
  const int m = static_cast<int>(cost.t0.size());
  PiecewiseLinearCost pwl;
  pwl.breakpoints.resize(static_cast<size_t>(m));
  pwl.values.resize(static_cast<size_t>(m));
  pwl.max_error = Eigen::VectorXd::Zero(m);
  auto exact = [&cost](int a, double x) {
    return cost.t0[a] * (1.0 + cost.alpha[a] * std::pow(x / cost.capacity[a], BprCost::exponent));
  };
  for (int a = 0; a < m; ++a) {
    Eigen::VectorXd bp(segments + 1), v(segments + 1);
    for (int i = 0; i <= segments; ++i) {
      bp[i] = cost.capacity[a] * static_cast<double>(i) / segments;
      v[i] = exact(a, bp[i]);
    }
    pwl.breakpoints[static_cast<size_t>(a)] = bp;
    pwl.values[static_cast<size_t>(a)] = v;
    // The chord overestimates the convex curve; the gap peaks where the
    // derivative matches the chord slope, which has a closed form here.
    double err = 0.0;
    for (int i = 0; i < segments; ++i) {
      const double slope = (v[i + 1] - v[i]) / (bp[i + 1] - bp[i]);
      const double scale = cost.t0[a] * cost.alpha[a] * BprCost::exponent /
                           std::pow(cost.capacity[a], BprCost::exponent);
      double x = bp[i + 1];
      if (scale > 0.0)
        x = std::pow(slope / scale, 1.0 / (BprCost::exponent - 1));
      x = std::clamp(x, bp[i], bp[i + 1]);
      err = std::max(err, v[i] + slope * (x - bp[i]) - exact(a, x));
    }
    pwl.max_error[a] = err;
  }
  return pwl;
}

}  // namespace netshield
