#pragma once

#include <optional>
#include <variant>
#include <vector>

#include "netshield/costs.hpp"
#include "netshield/miqp.hpp"
#include "netshield/network.hpp"

namespace netshield {

/// One damage scenario: per-arc capacity reduction applied to unprotected
/// arcs, with its probability.
struct Scenario {
  Eigen::VectorXd damage;
  double probability = 0.0;
};

/// BPR latency together with the piecewise-linear surrogate used inside the
/// mixed-integer subproblems (the exact curve is kept for reporting).
struct PwlBprCost {
  BprCost exact;
  PiecewiseLinearCost pwl;
};

using SnppCost = std::variant<LinearCost, PwlBprCost>;

/// Two-stage protection problem over a fixed network: first-stage protection
/// levels u in [0,1]^m under a budget, second stage a per-scenario
/// equilibrium restated through complementarity with big-M disjunctions.
struct SnppInstance {
  Network network;
  SnppCost cost;
  std::vector<DemandVector> demands;  // one commodity per demand vector
  std::vector<Scenario> scenarios;
  Eigen::VectorXd cap;     // undamaged arc capacity
  Eigen::VectorXd psi;     // per-arc protection price
  double budget = 6.0;
  double gamma = 1.0;
  double d_penalty = 10000.0;
  double big_m_value = 0.0;
};

/// Instance with the default knob settings: cap = 8, psi = 1, budget = 6,
/// gamma = 1, unmet-demand penalty 1e4, big-M from big_m(network).
SnppInstance make_snpp_instance(Network network, SnppCost cost,
                                std::vector<DemandVector> demands,
                                std::vector<Scenario> scenarios);

/// Residual capacity cap - damage * (1 - u), clamped at zero, on each arc.
Eigen::VectorXd capacity(const Eigen::VectorXd& cap, const Eigen::VectorXd& damage,
                         const Eigen::VectorXd& u);

/// Disjunction constant: 90 * arc count * 2.
double big_m(const Network& net);

/// Variable layout of one scenario subproblem. Order: u (m), x^k (K blocks of
/// m), f (m), lambda^k (K blocks of n), d^k (K blocks of n), b^k (K blocks of
/// m), b'^k (K blocks of n); for BPR also segment fills delta (m*S) and
/// ordering binaries z (m*(S-1)).
struct SubproblemLayout {
  int m = 0;
  int n = 0;
  int K = 0;
  int segments = 0;  // 0 for the linear family

  int u_off() const { return 0; }
  int x_off(int k) const { return m + k * m; }
  int f_off() const { return m + K * m; }
  int lambda_off(int k) const { return f_off() + m + k * n; }
  int d_off(int k) const { return f_off() + m + K * n + k * n; }
  int b_off(int k) const { return f_off() + m + 2 * K * n + k * m; }
  int bprime_off(int k) const { return f_off() + m + 2 * K * n + K * m + k * n; }
  int delta_off(int a) const { return bprime_off(K) + a * segments; }
  int z_off(int a) const { return delta_off(m) + a * (segments - 1); }
  int num_vars() const {
    int nv = bprime_off(K);
    if (segments > 0) nv += m * segments + m * (segments - 1);
    return nv;
  }
};

/// Second-stage decision variables of one scenario, in natural shapes.
struct ScenarioSolution {
  Eigen::VectorXd u;
  std::vector<Eigen::VectorXd> x;       // per commodity, length m
  Eigen::VectorXd f;                    // total flow, length m
  std::vector<Eigen::VectorXd> lambda;  // per commodity, length n
  std::vector<Eigen::VectorXd> d;       // per-commodity unmet demand, length n
  std::vector<Eigen::VectorXd> b;       // flow disjunction binaries, length m
  std::vector<Eigen::VectorXd> bprime;  // node disjunction binaries, length n
  double objective = 0.0;
};

/// Progressive-hedging augmentation of the scenario objective:
/// w'u + (rho/2) ||u - anchor||^2.
struct PhTerm {
  Eigen::VectorXd w;
  Eigen::VectorXd anchor;
  double rho = 0.0;
};

/// Big-M MIQP for scenario s; the same layout is returned so callers can
/// pack/unpack solutions.
std::pair<MiqpProblem, SubproblemLayout> build_scenario_subproblem(
    const SnppInstance& inst, int s, const std::optional<PhTerm>& ph = std::nullopt);

/// Monolithic deterministic equivalent: one shared u, every scenario's second
/// stage side by side, probability-weighted objective. Scenario s's non-u
/// variables start at the returned offsets; within a block they follow the
/// subproblem layout with the u block removed.
struct ExtensiveForm {
  MiqpProblem problem;
  SubproblemLayout scenario_layout;       // layout of one scenario block incl. u
  std::vector<int> scenario_offsets;      // start of each scenario's non-u block
};

ExtensiveForm build_extensive_form(const SnppInstance& inst);

Eigen::VectorXd pack_solution(const SubproblemLayout& layout, const ScenarioSolution& sol,
                              const SnppInstance& inst);

ScenarioSolution unpack_solution(const SubproblemLayout& layout, const Eigen::VectorXd& z,
                                 const SnppInstance& inst, int s);

/// Scenario cost psi'u + gamma f't(f) + penalty * sum_k ||d^k||^2 with the
/// exact (not surrogate) latency.
double evaluate_Q(const SnppInstance& inst, const ScenarioSolution& sol);

/// Feasible (rarely optimal) starting point for scenario s at fixed u: a
/// capacity-aware equilibrium assignment, shedding commodities into d
/// whenever routing them cannot be certified feasible for the subproblem.
ScenarioSolution warm_start(const SnppInstance& inst, int s, const Eigen::VectorXd& u);

/// Rounds a relaxation point of scenario s's subproblem to a feasible
/// solution: protect just enough capacity for the relaxed aggregate flows
/// (never more than the relaxation spent, so the budget carries over), fit
/// an equilibrium there, and drop protection the fitted flows don't use.
ScenarioSolution round_relaxation(const SnppInstance& inst, int s,
                                  const SubproblemLayout& layout, const Eigen::VectorXd& z);

/// Heuristic incumbent: fully protect the scenario's damaged arcs (greedily
/// by damage, within the budget), route the resulting equilibrium, then
/// shrink each protection level to what the routed flow actually needs.
ScenarioSolution protect_and_fit(const SnppInstance& inst, int s);

}  // namespace netshield
