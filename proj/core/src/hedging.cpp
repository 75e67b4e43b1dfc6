#include "netshield/hedging.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace netshield {

namespace {

std::vector<double> normalized_probabilities(const SnppInstance& inst) {
  std::vector<double> p;
  double total = 0.0;
  for (const Scenario& s : inst.scenarios) {
    p.push_back(s.probability);
    total += s.probability;
  }
  if (p.empty() || total <= 0.0)
    throw std::invalid_argument("instance needs scenarios with positive total probability");
  for (double& v : p) v /= total;
  return p;
}

// Re-solve the continuous part at the incumbent's binary pattern with a tight
// tolerance. Branch-and-bound stops within a relative objective gap, which
// leaves the nearly-flat protection coordinates several orders of magnitude
// less accurate than the hedging tolerance requires.
Eigen::VectorXd polish_incumbent(const MiqpProblem& mp, const Eigen::VectorXd& z) {
  QpProblem q = mp.base;
  for (int i : mp.binary_indices) q.lo[i] = q.hi[i] = std::round(z[i]);
  const QpSolution s = solve_qp(q, 1e-10, z);
  return s.status == QpStatus::optimal ? s.z : z;
}

void run_indexed(WorkerPool* pool, int count, const std::function<void(int)>& fn) {
  if (pool) {
    pool->parallel_for(count, fn);
  } else {
    for (int i = 0; i < count; ++i) fn(i);
  }
}

}  // namespace

double convergence_metric(const std::vector<Eigen::VectorXd>& scenario_u,
                          const std::vector<double>& probabilities,
                          const Eigen::VectorXd& u_bar) {
  if (scenario_u.size() != probabilities.size())
    throw std::invalid_argument("probability count mismatch");
  double total = 0.0;
  for (double p : probabilities) total += p;
  if (total <= 0.0) throw std::invalid_argument("probabilities must have positive total");
  double g = 0.0;
  for (size_t s = 0; s < scenario_u.size(); ++s)
    g += probabilities[s] / total * (scenario_u[s] - u_bar).lpNorm<1>();
  return g / std::max(1.0, u_bar.lpNorm<1>());
}

Eigen::VectorXd project_protection(const Eigen::VectorXd& u, double budget) {
  if (budget < 0) throw std::invalid_argument("budget must be nonnegative");
  Eigen::VectorXd v = u.cwiseMax(0.0).cwiseMin(1.0);
  if (v.sum() <= budget) return v;
  // Shift everything down by tau before clamping; the clamped sum decreases
  // continuously in tau, so bisect until it meets the budget.
  double lo = 0.0, hi = u.maxCoeff();
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double sum = (u.array() - mid).cwiseMax(0.0).cwiseMin(1.0).sum();
    (sum > budget ? lo : hi) = mid;
  }
  return (u.array() - hi).cwiseMax(0.0).cwiseMin(1.0);
}

PhResult progressive_hedging(const SnppInstance& inst, const PhOptions& opts, WorkerPool* pool) {
  if (opts.rho <= 0) throw std::invalid_argument("rho must be positive");
  if (opts.epsilon <= 0) throw std::invalid_argument("epsilon must be positive");
  const std::vector<double> p = normalized_probabilities(inst);
  const int S = static_cast<int>(p.size());
  const int m = inst.network.arc_count();

  std::vector<Eigen::VectorXd> w(static_cast<size_t>(S), Eigen::VectorXd::Zero(m));
  std::vector<Eigen::VectorXd> incumbents(static_cast<size_t>(S));
  std::vector<ScenarioSolution> sols(static_cast<size_t>(S));
  Eigen::VectorXd u_bar = Eigen::VectorXd::Zero(m);

  PhResult result;
  auto solve_round = [&](bool with_ph) {
    run_indexed(pool, S, [&](int s) {
      std::optional<PhTerm> ph;
      if (with_ph) ph = PhTerm{w[static_cast<size_t>(s)], u_bar, opts.rho};
      auto [mp, layout] = build_scenario_subproblem(inst, s, ph);
      MiqpOptions mo = opts.miqp;
      if (incumbents[static_cast<size_t>(s)].size() == layout.num_vars())
        mo.incumbent_candidates.push_back(incumbents[static_cast<size_t>(s)]);
      mo.incumbent_candidates.push_back(pack_solution(layout, protect_and_fit(inst, s), inst));
      mo.incumbent_candidates.push_back(
          pack_solution(layout, warm_start(inst, s, Eigen::VectorXd::Zero(m)), inst));
      // Fit feasible points guided by the node relaxations; this seeds
      // strong incumbents long before the dives reach integral leaves.
      mo.rounding = [&inst, &layout, s](const Eigen::VectorXd& z) {
        return std::optional<Eigen::VectorXd>(
            pack_solution(layout, round_relaxation(inst, s, layout, z), inst));
      };
      MiqpSolution ms = solve_miqp(mp, mo);
      if (ms.status == MiqpStatus::infeasible)
        throw std::runtime_error("scenario subproblem infeasible");
      const Eigen::VectorXd z = polish_incumbent(mp, ms.incumbent);
      incumbents[static_cast<size_t>(s)] = z;
      sols[static_cast<size_t>(s)] = unpack_solution(layout, z, inst, s);
    });
  };

  for (int it = 0; it <= opts.max_iterations; ++it) {
    const auto start = std::chrono::steady_clock::now();
    solve_round(it > 0);
    u_bar.setZero();
    for (int s = 0; s < S; ++s) u_bar += p[static_cast<size_t>(s)] * sols[static_cast<size_t>(s)].u;
    std::vector<Eigen::VectorXd> us;
    for (const ScenarioSolution& sol : sols) us.push_back(sol.u);
    const double g = convergence_metric(us, p, u_bar);
    for (int s = 0; s < S; ++s)
      w[static_cast<size_t>(s)] += opts.rho * (sols[static_cast<size_t>(s)].u - u_bar);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.history.push_back({it, g, u_bar.lpNorm<1>(), seconds});
    result.iterations = it + 1;
    if (it > 0 && g <= opts.epsilon) {
      result.converged = true;
      break;
    }
  }

  result.u = project_protection(u_bar, inst.budget);
  for (const ScenarioSolution& sol : sols) {
    result.scenario_u.push_back(sol.u);
    result.scenario_objectives.push_back(sol.objective);
  }
  const std::vector<double> q = evaluate_protection(inst, result.u, opts.miqp, pool);
  result.expected_cost = 0.0;
  for (int s = 0; s < S; ++s) result.expected_cost += p[static_cast<size_t>(s)] * q[static_cast<size_t>(s)];
  return result;
}

std::vector<double> evaluate_protection(const SnppInstance& inst, const Eigen::VectorXd& u,
                                        const MiqpOptions& opts, WorkerPool* pool) {
  const int S = static_cast<int>(inst.scenarios.size());
  const int m = inst.network.arc_count();
  if (u.size() != m) throw std::invalid_argument("protection vector length mismatch");
  std::vector<double> q(static_cast<size_t>(S), 0.0);
  run_indexed(pool, S, [&](int s) {
    auto [mp, layout] = build_scenario_subproblem(inst, s);
    mp.base.lo.head(m) = u;
    mp.base.hi.head(m) = u;
    MiqpOptions mo = opts;
    mo.initial_incumbent = pack_solution(layout, warm_start(inst, s, u), inst);
    MiqpSolution ms = solve_miqp(mp, mo);
    if (ms.status == MiqpStatus::infeasible)
      throw std::runtime_error("scenario subproblem infeasible at the given protection");
    q[static_cast<size_t>(s)] = unpack_solution(layout, ms.incumbent, inst, s).objective;
  });
  return q;
}

void write_history_csv(std::ostream& out, const std::vector<PhIterationRecord>& history) {
  out << "iteration,g,anchor_l1,seconds\n";
  char line[128];
  for (const PhIterationRecord& r : history) {
    std::snprintf(line, sizeof(line), "%d,%.12g,%.12g,%.6f\n", r.iteration, r.g, r.anchor_l1,
                  r.seconds);
    out << line;
  }
}

}  // namespace netshield
