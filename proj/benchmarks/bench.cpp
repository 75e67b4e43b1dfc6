#include <benchmark/benchmark.h>

#include "netshield/experiments.hpp"
#include "netshield/shortest_path.hpp"

using namespace netshield;

namespace {

ExperimentConfig grid_config(int rows, CostFamily family) {
  ExperimentConfig cfg;
  cfg.grid_rows = cfg.grid_cols = rows;
  cfg.family = family;
  cfg.seed = 7;
  return cfg;
}

void BM_ShortestPaths(benchmark::State& state) {
  const Network net = build_grid(static_cast<int>(state.range(0)), static_cast<int>(state.range(0)));
  Rng rng(1);
  Eigen::VectorXd cost(net.arc_count());
  for (int a = 0; a < net.arc_count(); ++a) cost[a] = rng.uniform(2.0, 10.0);
  for (auto _ : state) benchmark::DoNotOptimize(shortest_paths_to(net, cost, 0));
}
BENCHMARK(BM_ShortestPaths)->Arg(4)->Arg(8)->Arg(16);

void BM_Equilibrium(benchmark::State& state) {
  ExperimentConfig cfg = grid_config(static_cast<int>(state.range(0)), CostFamily::linear_phi);
  Eigen::VectorXd theta;
  KnownParams known;
  sample_parameters(cfg, 0, theta, known);
  const Network net = build_network(cfg);
  const CostFunction cost = make_cost(cfg.family, theta, known);
  const DemandVector demand = demand_vector(net, 0, net.node_count() - 1, 8.0);
  for (auto _ : state) benchmark::DoNotOptimize(solve_tep(net, cost, demand));
}
BENCHMARK(BM_Equilibrium)->Arg(4)->Arg(6);

void BM_QuadProg(benchmark::State& state) {
  // The inverse-optimization QP of a 3x3 grid with a handful of observations.
  ExperimentConfig cfg = grid_config(3, CostFamily::linear_phi);
  Eigen::VectorXd theta;
  KnownParams known;
  sample_parameters(cfg, 0, theta, known);
  const Network net = build_network(cfg);
  const CostFunction cost = make_cost(cfg.family, theta, known);
  std::vector<OdPair> pairs;
  for (int d = 1; d < net.node_count(); d += 2) pairs.push_back({0, d, 8.0});
  const std::vector<FlowObservation> obs = generate_data(net, cost, pairs);
  const QpProblem qp = build_io_qp(net, obs, cfg.family, known);
  for (auto _ : state) benchmark::DoNotOptimize(solve_qp(qp, 1e-8));
}
BENCHMARK(BM_QuadProg);

void BM_ScenarioMiqp(benchmark::State& state) {
  ExperimentConfig cfg = grid_config(2, CostFamily::linear_phi);
  Eigen::VectorXd theta;
  KnownParams known;
  sample_parameters(cfg, 0, theta, known);
  const Network net = build_network(cfg);
  SnppInstance inst = make_snpp_instance(net, LinearCost{theta, known.beta},
                                         {demand_vector(net, 0, 3, 8.0)},
                                         default_scenarios(net, NetworkKind::grid, 2));
  for (auto _ : state) {
    auto [mp, layout] = build_scenario_subproblem(inst, 0);
    MiqpOptions opts;
    opts.incumbent_candidates.push_back(pack_solution(layout, protect_and_fit(inst, 0), inst));
    benchmark::DoNotOptimize(solve_miqp(mp, opts));
  }
}
BENCHMARK(BM_ScenarioMiqp)->Unit(benchmark::kMillisecond);

void BM_ProgressiveHedging(benchmark::State& state) {
  ExperimentConfig cfg = grid_config(2, CostFamily::linear_phi);
  Eigen::VectorXd theta;
  KnownParams known;
  sample_parameters(cfg, 0, theta, known);
  const Network net = build_network(cfg);
  SnppInstance inst = make_snpp_instance(net, LinearCost{theta, known.beta},
                                         {demand_vector(net, 0, 3, 8.0)},
                                         default_scenarios(net, NetworkKind::grid, 2));
  PhOptions opts;
  opts.epsilon = 0.01;
  for (auto _ : state) benchmark::DoNotOptimize(progressive_hedging(inst, opts));
}
BENCHMARK(BM_ProgressiveHedging)->Unit(benchmark::kMillisecond)->Iterations(1);

}  // namespace

BENCHMARK_MAIN();
