#include <doctest.h>

#include <random>

#include "netshield/experiments.hpp"
#include "netshield/snpp.hpp"

using namespace netshield;

namespace {

SnppInstance small_instance(std::uint64_t seed, int K = 2) {
  ExperimentConfig cfg;
  cfg.grid_rows = cfg.grid_cols = 2;
  cfg.seed = seed;
  Eigen::VectorXd theta;
  KnownParams known;
  sample_parameters(cfg, 0, theta, known);
  Network net = build_network(cfg);
  std::vector<Scenario> scenarios = default_scenarios(net, cfg.kind, 2);
  std::vector<DemandVector> demands{demand_vector(net, 0, 3, 8.0)};
  if (K > 1) demands.push_back(demand_vector(net, 3, 0, 8.0));
  return make_snpp_instance(net, LinearCost{theta, known.beta}, demands, scenarios);
}

// Constraint residuals of a packed point against the subproblem.
double max_violation(const MiqpProblem& p, const Eigen::VectorXd& z) {
  double v = 0.0;
  if (p.base.A.rows() > 0) v = std::max(v, (p.base.A * z - p.base.b).maxCoeff());
  if (p.base.E.rows() > 0) v = std::max(v, (p.base.E * z - p.base.f).cwiseAbs().maxCoeff());
  for (int i = 0; i < p.base.num_vars(); ++i) {
    v = std::max(v, p.base.lo[i] - z[i]);
    v = std::max(v, z[i] - p.base.hi[i]);
  }
  return v;
}

}  // namespace

TEST_CASE("big-M constant is 180 times the arc count") {
  CHECK(big_m(build_grid(4, 4)) == 8640.0);
  CHECK(big_m(build_nguyen_dupuis()) == 6840.0);
  CHECK(big_m(build_grid(2, 2)) == 1440.0);
}

TEST_CASE("residual capacity formula") {
  Eigen::VectorXd cap = Eigen::VectorXd::Constant(3, 8.0);
  Eigen::VectorXd dmg(3);
  dmg << 8.0, 4.0, 0.0;
  Eigen::VectorXd u(3);
  u << 0.25, 0.5, 1.0;
  Eigen::VectorXd h = capacity(cap, dmg, u);
  CHECK(h[0] == doctest::Approx(8.0 - 8.0 * 0.75));
  CHECK(h[1] == doctest::Approx(8.0 - 4.0 * 0.5));
  CHECK(h[2] == doctest::Approx(8.0));
  CHECK_THROWS(capacity(cap, dmg, (Eigen::VectorXd(3) << -0.5, 0, 0).finished()));
}

TEST_CASE("layout offsets tile the variable vector without gaps") {
  SubproblemLayout L{6, 4, 2, 0};
  CHECK(L.u_off() == 0);
  CHECK(L.x_off(0) == 6);
  CHECK(L.x_off(1) == 12);
  CHECK(L.f_off() == 18);
  CHECK(L.lambda_off(0) == 24);
  CHECK(L.lambda_off(1) == 28);
  CHECK(L.d_off(0) == 32);
  CHECK(L.d_off(1) == 36);
  CHECK(L.b_off(0) == 40);
  CHECK(L.b_off(1) == 46);
  CHECK(L.bprime_off(0) == 52);
  CHECK(L.bprime_off(1) == 56);
  CHECK(L.num_vars() == 60);
  SubproblemLayout Lb{6, 4, 1, 3};
  CHECK(Lb.delta_off(0) == Lb.bprime_off(1));
  CHECK(Lb.z_off(0) == Lb.delta_off(6));
  CHECK(Lb.num_vars() == Lb.z_off(6));
}

TEST_CASE("subproblem dimensions and binary bookkeeping") {
  SnppInstance inst = small_instance(3);
  auto [mp, L] = build_scenario_subproblem(inst, 0);
  CHECK(mp.base.num_vars() == L.num_vars());
  // Binaries are exactly the b and b' blocks.
  CHECK(static_cast<int>(mp.binary_indices.size()) == L.K * (L.m + L.n));
  for (int i : mp.binary_indices) {
    CHECK(mp.base.lo[i] == 0.0);
    CHECK(mp.base.hi[i] == 1.0);
  }
}

TEST_CASE("pack and unpack are inverse on the scenario blocks") {
  SnppInstance inst = small_instance(3);
  ScenarioSolution sol = warm_start(inst, 0, Eigen::VectorXd::Zero(8));
  auto [mp, L] = build_scenario_subproblem(inst, 0);
  Eigen::VectorXd z = pack_solution(L, sol, inst);
  ScenarioSolution back = unpack_solution(L, z, inst, 0);
  CHECK((back.u - sol.u).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.f - sol.f).cwiseAbs().maxCoeff() == 0.0);
  for (int k = 0; k < L.K; ++k) {
    CHECK((back.x[k] - sol.x[k]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.lambda[k] - sol.lambda[k]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.d[k] - sol.d[k]).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(back.objective == doctest::Approx(sol.objective));
}

TEST_CASE("warm start is feasible for the subproblem") {
  for (std::uint64_t seed : {1ull, 3ull, 7ull}) {
    SnppInstance inst = small_instance(seed);
    for (int s = 0; s < 2; ++s) {
      auto [mp, L] = build_scenario_subproblem(inst, s);
      for (const Eigen::VectorXd& u :
           {Eigen::VectorXd(Eigen::VectorXd::Zero(8)),
            Eigen::VectorXd(Eigen::VectorXd::Constant(8, 0.5)),
            Eigen::VectorXd(Eigen::VectorXd::Ones(8) * 0.75)}) {
        ScenarioSolution sol = warm_start(inst, s, u);
        CHECK(max_violation(mp, pack_solution(L, sol, inst)) < 1e-6);
      }
    }
  }
}

TEST_CASE("warm start is feasible under the piecewise bpr surrogate") {
  ExperimentConfig cfg;
  cfg.grid_rows = cfg.grid_cols = 2;
  cfg.family = CostFamily::bpr_alpha;
  cfg.seed = 5;
  Eigen::VectorXd theta;
  KnownParams known;
  sample_parameters(cfg, 0, theta, known);
  Network net = build_network(cfg);
  BprCost exact{known.t0, known.capacity, theta};
  SnppInstance inst = make_snpp_instance(
      net, PwlBprCost{exact, linearize(exact, 8)},
      {demand_vector(net, 0, 3, 8.0), demand_vector(net, 3, 0, 8.0)},
      default_scenarios(net, NetworkKind::grid, 2));
  for (int s = 0; s < 2; ++s) {
    auto [mp, L] = build_scenario_subproblem(inst, s);
    ScenarioSolution sol = warm_start(inst, s, Eigen::VectorXd::Zero(8));
    CHECK(max_violation(mp, pack_solution(L, sol, inst)) < 1e-6);
    ScenarioSolution fit = protect_and_fit(inst, s);
    CHECK(max_violation(mp, pack_solution(L, fit, inst)) < 1e-6);
  }
}

TEST_CASE("protect_and_fit is feasible, budgeted, and beats shedding") {
  SnppInstance inst = small_instance(3);
  for (int s = 0; s < 2; ++s) {
    auto [mp, L] = build_scenario_subproblem(inst, s);
    ScenarioSolution fit = protect_and_fit(inst, s);
    CHECK(max_violation(mp, pack_solution(L, fit, inst)) < 1e-6);
    CHECK(fit.u.sum() <= inst.budget + 1e-9);
    // No spend outside the damaged arcs.
    for (int a = 0; a < 8; ++a)
      if (inst.scenarios[s].damage[a] == 0.0) CHECK(fit.u[a] == 0.0);
    ScenarioSolution shed = warm_start(inst, s, Eigen::VectorXd::Zero(8));
    CHECK(fit.objective < shed.objective);
  }
}

TEST_CASE("objective at a packed point matches evaluate_Q for linear costs") {
  SnppInstance inst = small_instance(3);
  auto [mp, L] = build_scenario_subproblem(inst, 0);
  ScenarioSolution sol = protect_and_fit(inst, 0);
  Eigen::VectorXd z = pack_solution(L, sol, inst);
  const double qp_obj = 0.5 * z.dot(mp.base.Q * z) + mp.base.c.dot(z);
  CHECK(qp_obj == doctest::Approx(evaluate_Q(inst, sol)).epsilon(1e-9));
}

TEST_CASE("extensive form shares u and weights scenarios by probability") {
  SnppInstance inst = small_instance(3, 1);
  ExtensiveForm ef = build_extensive_form(inst);
  const SubproblemLayout& L = ef.scenario_layout;
  const int block = L.num_vars() - L.m;
  CHECK(ef.problem.base.num_vars() == L.m + 2 * block);
  CHECK(ef.scenario_offsets == std::vector<int>{L.m, L.m + block});
  // Objective of a combined point = psi'u + sum_s p_s (scenario cost terms).
  auto [mp0, L0] = build_scenario_subproblem(inst, 0);
  auto [mp1, L1] = build_scenario_subproblem(inst, 1);
  ScenarioSolution s0 = protect_and_fit(inst, 0);
  ScenarioSolution s1 = protect_and_fit(inst, 1);
  // Use a common protection so the point is consistent across blocks.
  Eigen::VectorXd u = (s0.u + s1.u).cwiseMin(1.0);
  s0 = warm_start(inst, 0, u);
  s1 = warm_start(inst, 1, u);
  Eigen::VectorXd z0 = pack_solution(L, s0, inst);
  Eigen::VectorXd z1 = pack_solution(L, s1, inst);
  Eigen::VectorXd z(ef.problem.base.num_vars());
  z.head(L.m) = u;
  z.segment(L.m, block) = z0.tail(block);
  z.segment(L.m + block, block) = z1.tail(block);
  const double got = 0.5 * z.dot(ef.problem.base.Q * z) + ef.problem.base.c.dot(z);
  const double p0 = inst.scenarios[0].probability, p1 = inst.scenarios[1].probability;
  const double want = p0 * evaluate_Q(inst, s0) + p1 * evaluate_Q(inst, s1);
  CHECK(got == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("instance validation rejects bad inputs") {
  SnppInstance inst = small_instance(3);
  SnppInstance bad = inst;
  bad.scenarios[0].damage[0] = 100.0;  // exceeds capacity
  CHECK_THROWS(build_scenario_subproblem(bad, 0));
  bad = inst;
  bad.budget = -1.0;
  CHECK_THROWS(build_scenario_subproblem(bad, 0));
  CHECK_THROWS(build_scenario_subproblem(inst, 5));
  CHECK_THROWS(warm_start(inst, 0, Eigen::VectorXd::Ones(8) * 2.0));
}
