#include "netshield/snpp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "netshield/equilibrium.hpp"
#include "netshield/shortest_path.hpp"

namespace netshield {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

int pwl_segments(const PwlBprCost& c, int m) {
  if (c.pwl.arc_count() != m) throw std::invalid_argument("piecewise-linear cost missing");
  const int S = static_cast<int>(c.pwl.breakpoints[0].size()) - 1;
  if (S < 1) throw std::invalid_argument("piecewise-linear cost needs at least one segment");
  for (int a = 0; a < m; ++a)
    if (static_cast<int>(c.pwl.breakpoints[static_cast<size_t>(a)].size()) != S + 1)
      throw std::invalid_argument("piecewise-linear segment counts differ across arcs");
  return S;
}

void validate_instance(const SnppInstance& inst) {
  const int m = inst.network.arc_count();
  const int n = inst.network.node_count();
  if (inst.demands.empty()) throw std::invalid_argument("instance has no demand");
  for (const DemandVector& d : inst.demands)
    if (d.entries.size() != n) throw std::invalid_argument("demand length mismatch");
  if (inst.cap.size() != m || inst.psi.size() != m)
    throw std::invalid_argument("cap/psi length mismatch");
  if ((inst.cap.array() <= 0).any()) throw std::invalid_argument("capacity must be positive");
  if (inst.budget < 0) throw std::invalid_argument("budget must be nonnegative");
  if (inst.big_m_value <= 0) throw std::invalid_argument("big-M must be positive");
  for (const Scenario& s : inst.scenarios) {
    if (s.damage.size() != m) throw std::invalid_argument("scenario damage length mismatch");
    if ((s.damage.array() < 0).any()) throw std::invalid_argument("negative damage");
    if ((s.damage.array() > inst.cap.array() + 1e-12).any())
      throw std::invalid_argument("damage exceeds capacity");
    if (s.probability < 0) throw std::invalid_argument("negative scenario probability");
  }
  if (const auto* bpr = std::get_if<PwlBprCost>(&inst.cost)) (void)pwl_segments(*bpr, m);
  else if (std::get<LinearCost>(inst.cost).phi.size() != m)
    throw std::invalid_argument("cost length mismatch");
}

SubproblemLayout make_layout(const SnppInstance& inst) {
  SubproblemLayout L;
  L.m = inst.network.arc_count();
  L.n = inst.network.node_count();
  L.K = static_cast<int>(inst.demands.size());
  if (const auto* bpr = std::get_if<PwlBprCost>(&inst.cost)) L.segments = pwl_segments(*bpr, L.m);
  return L;
}

// Maps subproblem variable indices into a larger problem: u stays at the
// shared block, everything else shifts into this scenario's block.
struct VarMap {
  int m = 0;
  int base = 0;  // where this scenario's non-u variables start
  int operator()(int v) const { return v < m ? v : base + (v - m); }
};

struct Builder {
  Eigen::VectorXd c;
  std::vector<Eigen::Triplet<double>> q, a, e;
  std::vector<double> b, f;
  Eigen::VectorXd lo, hi;
  std::vector<int> binaries;

  explicit Builder(int nv)
      : c(Eigen::VectorXd::Zero(nv)),
        lo(Eigen::VectorXd::Constant(nv, -kInf)),
        hi(Eigen::VectorXd::Constant(nv, kInf)) {}

  int ineq_row() { return static_cast<int>(b.size()); }
  int eq_row() { return static_cast<int>(f.size()); }

  QpProblem finish() const {
    QpProblem p;
    const int nv = static_cast<int>(c.size());
    p.c = c;
    p.Q.resize(nv, nv);
    p.Q.setFromTriplets(q.begin(), q.end());
    p.A.resize(static_cast<int>(b.size()), nv);
    p.A.setFromTriplets(a.begin(), a.end());
    p.b = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<long>(b.size()));
    p.E.resize(static_cast<int>(f.size()), nv);
    p.E.setFromTriplets(e.begin(), e.end());
    p.f = Eigen::Map<const Eigen::VectorXd>(f.data(), static_cast<long>(f.size()));
    p.lo = lo;
    p.hi = hi;
    return p;
  }
};

// Emits one scenario's second-stage variables, constraints, and
// probability-weighted objective contribution (excluding psi'u and the
// shared budget row).
void emit_scenario(Builder& bld, const SnppInstance& inst, const SubproblemLayout& L,
                   const VarMap& vm, int s, double weight) {
  const Network& net = inst.network;
  const int m = L.m, n = L.n, K = L.K, S = L.segments;
  const double M = inst.big_m_value;
  const Scenario& sc = inst.scenarios[static_cast<size_t>(s)];
  const auto* lin = std::get_if<LinearCost>(&inst.cost);
  const auto* bpr = std::get_if<PwlBprCost>(&inst.cost);

  // Bounds.
  for (int k = 0; k < K; ++k) {
    for (int a = 0; a < m; ++a) bld.lo[vm(L.x_off(k) + a)] = 0.0;
    for (int i = 0; i < n; ++i) bld.lo[vm(L.lambda_off(k) + i)] = 0.0;
    for (int a = 0; a < m; ++a) {
      const int v = vm(L.b_off(k) + a);
      bld.lo[v] = 0.0;
      bld.hi[v] = 1.0;
      bld.binaries.push_back(v);
    }
    for (int i = 0; i < n; ++i) {
      const int v = vm(L.bprime_off(k) + i);
      bld.lo[v] = 0.0;
      bld.hi[v] = 1.0;
      bld.binaries.push_back(v);
    }
  }
  for (int a = 0; a < m; ++a) bld.lo[vm(L.f_off() + a)] = 0.0;
  if (bpr) {
    for (int a = 0; a < m; ++a) {
      const Eigen::VectorXd& bp = bpr->pwl.breakpoints[static_cast<size_t>(a)];
      for (int seg = 0; seg < S; ++seg) {
        const int v = vm(L.delta_off(a) + seg);
        bld.lo[v] = 0.0;
        bld.hi[v] = bp[seg + 1] - bp[seg];
      }
      for (int seg = 0; seg + 1 < S; ++seg) {
        const int v = vm(L.z_off(a) + seg);
        bld.lo[v] = 0.0;
        bld.hi[v] = 1.0;
        bld.binaries.push_back(v);
      }
    }
  }

  // f = sum_k x^k.
  for (int a = 0; a < m; ++a) {
    const int row = bld.eq_row();
    bld.e.emplace_back(row, vm(L.f_off() + a), 1.0);
    for (int k = 0; k < K; ++k) bld.e.emplace_back(row, vm(L.x_off(k) + a), -1.0);
    bld.f.push_back(0.0);
  }
  // f = sum of segment fills.
  if (bpr) {
    for (int a = 0; a < m; ++a) {
      const int row = bld.eq_row();
      bld.e.emplace_back(row, vm(L.f_off() + a), 1.0);
      for (int seg = 0; seg < S; ++seg) bld.e.emplace_back(row, vm(L.delta_off(a) + seg), -1.0);
      bld.f.push_back(0.0);
    }
  }

  // Residual capacity: f_a <= cap_a - damage_a (1 - u_a).
  for (int a = 0; a < m; ++a) {
    const int row = bld.ineq_row();
    bld.a.emplace_back(row, vm(L.f_off() + a), 1.0);
    if (sc.damage[a] != 0.0) bld.a.emplace_back(row, a, -sc.damage[a]);
    bld.b.push_back(inst.cap[a] - sc.damage[a]);
  }

  // Travel time on arc a as an affine expression T_a = t_const_a + (terms);
  // writes the terms with the given sign into row.
  auto add_travel_terms = [&](int row, int a, double sign) {
    if (lin) {
      if (lin->phi[a] != 0.0) bld.a.emplace_back(row, vm(L.f_off() + a), sign * lin->phi[a]);
      return lin->beta[a];
    }
    const Eigen::VectorXd& bp = bpr->pwl.breakpoints[static_cast<size_t>(a)];
    const Eigen::VectorXd& val = bpr->pwl.values[static_cast<size_t>(a)];
    for (int seg = 0; seg < S; ++seg) {
      const double slope = (val[seg + 1] - val[seg]) / (bp[seg + 1] - bp[seg]);
      if (slope != 0.0) bld.a.emplace_back(row, vm(L.delta_off(a) + seg), sign * slope);
    }
    return val[0];
  };

  for (int k = 0; k < K; ++k) {
    const DemandVector& q = inst.demands[static_cast<size_t>(k)];
    for (int a = 0; a < m; ++a) {
      const int tail = vm(L.lambda_off(k) + net.arc(a).tail);
      const int head = vm(L.lambda_off(k) + net.arc(a).head);
      // x <= M b.
      {
        const int row = bld.ineq_row();
        bld.a.emplace_back(row, vm(L.x_off(k) + a), 1.0);
        bld.a.emplace_back(row, vm(L.b_off(k) + a), -M);
        bld.b.push_back(0.0);
      }
      // Reduced cost T_a + lambda_head - lambda_tail >= 0.
      {
        const int row = bld.ineq_row();
        const double t_const = add_travel_terms(row, a, -1.0);
        bld.a.emplace_back(row, head, -1.0);
        bld.a.emplace_back(row, tail, 1.0);
        bld.b.push_back(t_const);
      }
      // Reduced cost <= M (1 - b).
      {
        const int row = bld.ineq_row();
        const double t_const = add_travel_terms(row, a, 1.0);
        bld.a.emplace_back(row, head, 1.0);
        bld.a.emplace_back(row, tail, -1.0);
        bld.a.emplace_back(row, vm(L.b_off(k) + a), M);
        bld.b.push_back(M - t_const);
      }
    }
    for (int i = 0; i < n; ++i) {
      // Node excess e_i = q_i + d_i - (N x^k)_i with
      // (N x^k)_i = inflow - outflow.
      auto add_flow_balance = [&](int row, double sign) {
        for (int a : net.in_arcs(i)) bld.a.emplace_back(row, vm(L.x_off(k) + a), sign);
        for (int a : net.out_arcs(i)) bld.a.emplace_back(row, vm(L.x_off(k) + a), -sign);
      };
      // e >= 0.
      {
        const int row = bld.ineq_row();
        bld.a.emplace_back(row, vm(L.d_off(k) + i), -1.0);
        add_flow_balance(row, 1.0);
        bld.b.push_back(q.entries[i]);
      }
      // e <= M (1 - b').
      {
        const int row = bld.ineq_row();
        bld.a.emplace_back(row, vm(L.d_off(k) + i), 1.0);
        add_flow_balance(row, -1.0);
        bld.a.emplace_back(row, vm(L.bprime_off(k) + i), M);
        bld.b.push_back(M - q.entries[i]);
      }
      // lambda <= M b'.
      {
        const int row = bld.ineq_row();
        bld.a.emplace_back(row, vm(L.lambda_off(k) + i), 1.0);
        bld.a.emplace_back(row, vm(L.bprime_off(k) + i), -M);
        bld.b.push_back(0.0);
      }
    }
  }

  // Segment ordering: segment s+1 opens only after segment s is full.
  if (bpr) {
    for (int a = 0; a < m; ++a) {
      const Eigen::VectorXd& bp = bpr->pwl.breakpoints[static_cast<size_t>(a)];
      for (int seg = 0; seg + 1 < S; ++seg) {
        {
          const int row = bld.ineq_row();
          bld.a.emplace_back(row, vm(L.delta_off(a) + seg + 1), 1.0);
          bld.a.emplace_back(row, vm(L.z_off(a) + seg), -(bp[seg + 2] - bp[seg + 1]));
          bld.b.push_back(0.0);
        }
        {
          const int row = bld.ineq_row();
          bld.a.emplace_back(row, vm(L.z_off(a) + seg), bp[seg + 1] - bp[seg]);
          bld.a.emplace_back(row, vm(L.delta_off(a) + seg), -1.0);
          bld.b.push_back(0.0);
        }
      }
    }
  }

  // Objective: gamma f't(f) + penalty sum_k ||d^k||^2, weighted.
  if (lin) {
    for (int a = 0; a < m; ++a) {
      if (lin->phi[a] != 0.0)
        bld.q.emplace_back(vm(L.f_off() + a), vm(L.f_off() + a), 2.0 * weight * inst.gamma * lin->phi[a]);
      bld.c[vm(L.f_off() + a)] += weight * inst.gamma * lin->beta[a];
    }
  } else {
    // f t(f) interpolated at the breakpoints shares the fill variables, so
    // the product is linear in them; it vanishes at zero flow.
    for (int a = 0; a < m; ++a) {
      const Eigen::VectorXd& bp = bpr->pwl.breakpoints[static_cast<size_t>(a)];
      const Eigen::VectorXd& val = bpr->pwl.values[static_cast<size_t>(a)];
      for (int seg = 0; seg < S; ++seg) {
        const double g0 = bp[seg] * val[seg];
        const double g1 = bp[seg + 1] * val[seg + 1];
        bld.c[vm(L.delta_off(a) + seg)] +=
            weight * inst.gamma * (g1 - g0) / (bp[seg + 1] - bp[seg]);
      }
    }
  }
  for (int k = 0; k < K; ++k)
    for (int i = 0; i < n; ++i)
      bld.q.emplace_back(vm(L.d_off(k) + i), vm(L.d_off(k) + i), 2.0 * weight * inst.d_penalty);
}

void emit_first_stage(Builder& bld, const SnppInstance& inst, double psi_weight) {
  const int m = inst.network.arc_count();
  for (int a = 0; a < m; ++a) {
    bld.lo[a] = 0.0;
    bld.hi[a] = 1.0;
    bld.c[a] += psi_weight * inst.psi[a];
  }
  const int row = bld.ineq_row();
  for (int a = 0; a < m; ++a) bld.a.emplace_back(row, a, 1.0);
  bld.b.push_back(inst.budget);
}

}  // namespace

SnppInstance make_snpp_instance(Network network, SnppCost cost, std::vector<DemandVector> demands,
                                std::vector<Scenario> scenarios) {
  const int m = network.arc_count();
  SnppInstance inst{std::move(network), std::move(cost),      std::move(demands),
                    std::move(scenarios), Eigen::VectorXd::Constant(m, 8.0),
                    Eigen::VectorXd::Ones(m)};
  inst.big_m_value = big_m(inst.network);
  validate_instance(inst);
  return inst;
}

Eigen::VectorXd capacity(const Eigen::VectorXd& cap, const Eigen::VectorXd& damage,
                         const Eigen::VectorXd& u) {
  if (damage.size() != cap.size() || u.size() != cap.size())
    throw std::invalid_argument("capacity length mismatch");
  if ((u.array() < -1e-12).any() || (u.array() > 1.0 + 1e-12).any())
    throw std::invalid_argument("protection level outside [0,1]");
  return (cap - damage.cwiseProduct(Eigen::VectorXd::Ones(u.size()) - u)).cwiseMax(0.0);
}

double big_m(const Network& net) { return 90.0 * net.arc_count() * 2.0; }

std::pair<MiqpProblem, SubproblemLayout> build_scenario_subproblem(
    const SnppInstance& inst, int s, const std::optional<PhTerm>& ph) {
  validate_instance(inst);
  if (s < 0 || s >= static_cast<int>(inst.scenarios.size()))
    throw std::invalid_argument("scenario index out of range");
  const SubproblemLayout L = make_layout(inst);
  Builder bld(L.num_vars());
  emit_first_stage(bld, inst, 1.0);
  emit_scenario(bld, inst, L, VarMap{L.m, L.m}, s, 1.0);
  if (ph) {
    if (ph->w.size() != L.m || ph->anchor.size() != L.m)
      throw std::invalid_argument("hedging term length mismatch");
    if (ph->rho < 0) throw std::invalid_argument("negative hedging penalty");
    for (int a = 0; a < L.m; ++a) {
      if (ph->rho != 0.0) bld.q.emplace_back(a, a, ph->rho);
      bld.c[a] += ph->w[a] - ph->rho * ph->anchor[a];
    }
  }
  MiqpProblem mp;
  mp.base = bld.finish();
  mp.binary_indices = std::move(bld.binaries);
  return {std::move(mp), L};
}

ExtensiveForm build_extensive_form(const SnppInstance& inst) {
  validate_instance(inst);
  if (inst.scenarios.empty()) throw std::invalid_argument("instance has no scenarios");
  const SubproblemLayout L = make_layout(inst);
  const int block = L.num_vars() - L.m;
  const int S = static_cast<int>(inst.scenarios.size());
  Builder bld(L.m + S * block);

  double prob_sum = 0.0;
  for (const Scenario& sc : inst.scenarios) prob_sum += sc.probability;
  emit_first_stage(bld, inst, prob_sum);

  ExtensiveForm ef;
  ef.scenario_layout = L;
  for (int s = 0; s < S; ++s) {
    const int base = L.m + s * block;
    ef.scenario_offsets.push_back(base);
    emit_scenario(bld, inst, L, VarMap{L.m, base}, s, inst.scenarios[static_cast<size_t>(s)].probability);
  }
  ef.problem.base = bld.finish();
  ef.problem.binary_indices = std::move(bld.binaries);
  return ef;
}

Eigen::VectorXd pack_solution(const SubproblemLayout& L, const ScenarioSolution& sol,
                              const SnppInstance& inst) {
  Eigen::VectorXd z = Eigen::VectorXd::Zero(L.num_vars());
  z.head(L.m) = sol.u;
  z.segment(L.f_off(), L.m) = sol.f;
  for (int k = 0; k < L.K; ++k) {
    z.segment(L.x_off(k), L.m) = sol.x[static_cast<size_t>(k)];
    z.segment(L.lambda_off(k), L.n) = sol.lambda[static_cast<size_t>(k)];
    z.segment(L.d_off(k), L.n) = sol.d[static_cast<size_t>(k)];
    z.segment(L.b_off(k), L.m) = sol.b[static_cast<size_t>(k)];
    z.segment(L.bprime_off(k), L.n) = sol.bprime[static_cast<size_t>(k)];
  }
  if (L.segments > 0) {
    const auto& pwl = std::get<PwlBprCost>(inst.cost).pwl;
    for (int a = 0; a < L.m; ++a) {
      const Eigen::VectorXd& bp = pwl.breakpoints[static_cast<size_t>(a)];
      double rem = sol.f[a];
      for (int seg = 0; seg < L.segments; ++seg) {
        const double fill = std::clamp(rem, 0.0, bp[seg + 1] - bp[seg]);
        z[L.delta_off(a) + seg] = fill;
        rem -= fill;
        if (seg > 0) z[L.z_off(a) + seg - 1] = fill > 1e-12 ? 1.0 : 0.0;
      }
    }
  }
  return z;
}

ScenarioSolution unpack_solution(const SubproblemLayout& L, const Eigen::VectorXd& z,
                                 const SnppInstance& inst, int /*s*/) {
  if (z.size() != L.num_vars()) throw std::invalid_argument("solution length mismatch");
  ScenarioSolution sol;
  sol.u = z.head(L.m);
  sol.f = z.segment(L.f_off(), L.m);
  for (int k = 0; k < L.K; ++k) {
    sol.x.push_back(z.segment(L.x_off(k), L.m));
    sol.lambda.push_back(z.segment(L.lambda_off(k), L.n));
    sol.d.push_back(z.segment(L.d_off(k), L.n));
    sol.b.push_back(z.segment(L.b_off(k), L.m));
    sol.bprime.push_back(z.segment(L.bprime_off(k), L.n));
  }
  sol.objective = evaluate_Q(inst, sol);
  return sol;
}

double evaluate_Q(const SnppInstance& inst, const ScenarioSolution& sol) {
  const Eigen::VectorXd f = sol.f.cwiseMax(0.0);
  Eigen::VectorXd t;
  if (const auto* lin = std::get_if<LinearCost>(&inst.cost)) {
    t = lin->phi.cwiseProduct(f) + lin->beta;
  } else {
    const BprCost& bpr = std::get<PwlBprCost>(inst.cost).exact;
    t = (bpr.t0.array() *
         (1.0 + bpr.alpha.array() * (f.array() / bpr.capacity.array()).pow(BprCost::exponent)))
            .matrix();
  }
  double obj = inst.psi.dot(sol.u) + inst.gamma * f.dot(t);
  for (const Eigen::VectorXd& d : sol.d) obj += inst.d_penalty * d.squaredNorm();
  return obj;
}

ScenarioSolution warm_start(const SnppInstance& inst, int s, const Eigen::VectorXd& u) {
  validate_instance(inst);
  if (s < 0 || s >= static_cast<int>(inst.scenarios.size()))
    throw std::invalid_argument("scenario index out of range");
  if (u.size() != inst.network.arc_count())
    throw std::invalid_argument("protection vector length mismatch");
  if ((u.array() < -1e-9).any() || (u.array() > 1.0 + 1e-9).any() ||
      u.sum() > inst.budget + 1e-6)
    throw std::invalid_argument("protection vector violates its bounds or budget");

  const Network& net = inst.network;
  const int m = net.arc_count();
  const int n = net.node_count();
  const int K = static_cast<int>(inst.demands.size());
  const Scenario& sc = inst.scenarios[static_cast<size_t>(s)];
  const Eigen::VectorXd h = capacity(inst.cap, sc.damage, u.cwiseMax(0.0).cwiseMin(1.0));

  const auto* lin = std::get_if<LinearCost>(&inst.cost);
  const auto* bpr = std::get_if<PwlBprCost>(&inst.cost);
  // The surrogate cost must match the subproblem's constraints exactly, so
  // BPR uses the piecewise-linear interpolant here, not the exact curve.
  ArcCostFn model_cost = [&](int a, double flow) {
    return lin ? lin->phi[a] * flow + lin->beta[a] : bpr->pwl.eval(a, flow);
  };

  std::vector<Eigen::VectorXd> x(static_cast<size_t>(K), Eigen::VectorXd::Zero(m));
  std::vector<std::vector<std::pair<NodeId, double>>> shed(static_cast<size_t>(K));
  Eigen::VectorXd f = Eigen::VectorXd::Zero(m);

  auto shed_all = [&](int k) {
    f -= x[static_cast<size_t>(k)];
    x[static_cast<size_t>(k)].setZero();
    shed[static_cast<size_t>(k)].clear();
    const DemandVector& q = inst.demands[static_cast<size_t>(k)];
    for (int i = 0; i < n; ++i)
      if (q.entries[i] < 0) shed[static_cast<size_t>(k)].emplace_back(i, -q.entries[i]);
  };

  // Gauss-Seidel equilibrium over commodities on the masked network; a
  // commodity that fails to equilibrate is dropped entirely.
  auto assign = [&](const std::vector<char>& enabled) {
    std::fill(x.begin(), x.end(), Eigen::VectorXd::Zero(m));
    f.setZero();
    for (int pass = 0; pass < 3; ++pass) {
      for (int k = 0; k < K; ++k) {
        const Eigen::VectorXd other = f - x[static_cast<size_t>(k)];
        ArcCostFn shifted = [&](int a, double t) { return model_cost(a, other[a] + t); };
        try {
          AssignmentResult res = equilibrate_single_destination(
              net, shifted, inst.demands[static_cast<size_t>(k)], 1e-11, &enabled);
          x[static_cast<size_t>(k)] = res.flow;
          shed[static_cast<size_t>(k)] = std::move(res.shed);
          f = other + res.flow;
        } catch (const std::runtime_error&) {
          f = other;
          x[static_cast<size_t>(k)].setZero();
          shed_all(k);
        }
      }
    }
  };

  std::vector<char> enabled(static_cast<size_t>(m));
  for (int a = 0; a < m; ++a) enabled[static_cast<size_t>(a)] = h[a] > 1e-7;
  assign(enabled);
  if ((f.array() > h.array() + 1e-7).any()) {
    // Partially damaged arcs attracted more than their residual capacity;
    // retry on undamaged arcs only, then give up and shed.
    for (int a = 0; a < m; ++a) enabled[static_cast<size_t>(a)] = h[a] >= inst.cap[a] - 1e-9;
    assign(enabled);
    if ((f.array() > h.array() + 1e-7).any())
      for (int k = 0; k < K; ++k) shed_all(k);
  }

  // Certify Wardrop tightness per commodity against shortest-path
  // potentials; drop commodities whose used arcs are off a shortest path
  // (their removal changes costs, so restart until stable).
  std::vector<Eigen::VectorXd> lambda(static_cast<size_t>(K));
  for (bool stable = false; !stable;) {
    stable = true;
    Eigen::VectorXd cost_now(m);
    for (int a = 0; a < m; ++a) cost_now[a] = model_cost(a, f[a]);
    for (int k = 0; k < K; ++k) {
      ShortestPathTree tree =
          shortest_paths_to(net, cost_now, inst.demands[static_cast<size_t>(k)].destination);
      Eigen::VectorXd lam = tree.dist;
      double max_finite = 0.0;
      for (int i = 0; i < n; ++i)
        if (std::isfinite(lam[i])) max_finite = std::max(max_finite, lam[i]);
      for (int i = 0; i < n; ++i)
        if (!std::isfinite(lam[i])) lam[i] = max_finite + 1.0;
      bool tight = true;
      for (int a = 0; a < m && tight; ++a)
        if (x[static_cast<size_t>(k)][a] > 1e-9 &&
            cost_now[a] + lam[net.arc(a).head] - lam[net.arc(a).tail] > 1e-7)
          tight = false;
      if (!tight) {
        shed_all(k);
        stable = false;
        break;
      }
      lambda[static_cast<size_t>(k)] = std::move(lam);
    }
  }

  ScenarioSolution sol;
  sol.u = u.cwiseMax(0.0).cwiseMin(1.0);
  sol.f = f.cwiseMax(0.0);
  for (int k = 0; k < K; ++k) {
    Eigen::VectorXd xk = x[static_cast<size_t>(k)].cwiseMax(0.0);
    Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
    for (const auto& [node, amount] : shed[static_cast<size_t>(k)]) d[node] = amount;
    Eigen::VectorXd b = (xk.array() > 1e-9).cast<double>();
    Eigen::VectorXd bp = (lambda[static_cast<size_t>(k)].array() > 1e-9).cast<double>();
    // Nodes declared inactive must carry an exactly zero potential.
    lambda[static_cast<size_t>(k)] =
        lambda[static_cast<size_t>(k)].cwiseProduct(bp);
    sol.x.push_back(std::move(xk));
    sol.lambda.push_back(lambda[static_cast<size_t>(k)]);
    sol.d.push_back(std::move(d));
    sol.b.push_back(std::move(b));
    sol.bprime.push_back(std::move(bp));
  }
  sol.objective = evaluate_Q(inst, sol);
  return sol;
}

namespace {

// Keep only the protection the routed flow needs:
// f_a <= cap_a - damage_a (1 - u_a) rearranged for u_a.
void trim_protection(const SnppInstance& inst, const Scenario& sc, ScenarioSolution& sol) {
  const int m = inst.network.arc_count();
  for (int a = 0; a < m; ++a) {
    if (sc.damage[a] <= 0.0) continue;
    const double need = (sol.f[a] + 1e-7 - (inst.cap[a] - sc.damage[a])) / sc.damage[a];
    sol.u[a] = std::clamp(need, 0.0, sol.u[a]);
  }
  sol.objective = evaluate_Q(inst, sol);
}

}  // namespace

ScenarioSolution round_relaxation(const SnppInstance& inst, int s,
                                  const SubproblemLayout& layout, const Eigen::VectorXd& z) {
  if (s < 0 || s >= static_cast<int>(inst.scenarios.size()))
    throw std::invalid_argument("scenario index out of range");
  const Scenario& sc = inst.scenarios[static_cast<size_t>(s)];
  const int m = inst.network.arc_count();
  if (z.size() < layout.f_off() + m)
    throw std::invalid_argument("relaxation point too short for the layout");

  const Eigen::VectorXd f = z.segment(layout.f_off(), m);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(m);
  for (int a = 0; a < m; ++a) {
    if (sc.damage[a] <= 0.0) continue;
    const double need = (f[a] + 1e-7 - (inst.cap[a] - sc.damage[a])) / sc.damage[a];
    u[a] = std::clamp(need, 0.0, 1.0);
  }
  ScenarioSolution sol = warm_start(inst, s, u.cwiseMin(1.0).cwiseMax(0.0));
  trim_protection(inst, sc, sol);
  return sol;
}

ScenarioSolution protect_and_fit(const SnppInstance& inst, int s) {
  if (s < 0 || s >= static_cast<int>(inst.scenarios.size()))
    throw std::invalid_argument("scenario index out of range");
  const Scenario& sc = inst.scenarios[static_cast<size_t>(s)];
  const int m = inst.network.arc_count();

  Eigen::VectorXd u = Eigen::VectorXd::Zero(m);
  std::vector<int> order;
  for (int a = 0; a < m; ++a)
    if (sc.damage[a] > 0.0) order.push_back(a);
  std::sort(order.begin(), order.end(),
            [&](int lhs, int rhs) { return sc.damage[lhs] > sc.damage[rhs]; });
  double left = inst.budget;
  for (int a : order) {
    const double take = std::min(1.0, left);
    if (take <= 0.0) break;
    u[a] = take;
    left -= take;
  }

  ScenarioSolution sol = warm_start(inst, s, u);
  trim_protection(inst, sc, sol);
  return sol;
}

}  // namespace netshield
