#include "netshield/experiments.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace netshield {

namespace {

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Linear-interpolation sample quantile of a sorted vector.
double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double pos = q * (static_cast<double>(sorted.size()) - 1.0);
  const size_t lo = static_cast<size_t>(std::floor(pos));
  const size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

void append_num(std::string& out, double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  out += buf;
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t salt) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

ExperimentConfig experiment_preset(const std::string& id, Scale scale) {
  ExperimentConfig cfg;
  cfg.id = id;
  if (id == "I" || id == "II") {
    cfg.kind = NetworkKind::grid;
  } else if (id == "III" || id == "IV") {
    cfg.kind = NetworkKind::nguyen_dupuis;
  } else {
    throw std::invalid_argument("unknown experiment id: " + id);
  }
  cfg.family = (id == "II" || id == "IV") ? CostFamily::bpr_alpha : CostFamily::linear_phi;
  if (scale == Scale::desk) {
    cfg.kind = NetworkKind::grid;
    cfg.grid_rows = cfg.grid_cols = 3;
    cfg.trials = 5;
    cfg.scenario_limit = 5;
    // Desk-scale subproblem trees are flat near the optimum; a tight node
    // budget trades a fraction of a percent of objective for bounded runtime.
    cfg.miqp.node_limit = 300;
    cfg.miqp.gap_tol = 1e-4;
  }
  const Network net = build_network(cfg);
  const NodeId far_corner = net.node_count() - 1;
  const NodeId dest = cfg.kind == NetworkKind::nguyen_dupuis ? 2 : far_corner;
  cfg.demand_pairs = {{0, dest, cfg.demand_amount}, {dest, 0, cfg.demand_amount}};
  // One commodity keeps the desk-scale subproblems small enough for quick
  // exact solves; the paper-scale presets carry the full pair.
  if (scale == Scale::desk) cfg.demand_pairs = {{0, dest, cfg.demand_amount}};
  return cfg;
}

Network build_network(const ExperimentConfig& cfg) {
  if (cfg.kind == NetworkKind::nguyen_dupuis) return build_nguyen_dupuis();
  return build_grid(cfg.grid_rows, cfg.grid_cols);
}

Theta uniform_theta(CostFamily family, int arcs) {
  const auto [lo, hi] = theta_bounds(family);
  const double v = family == CostFamily::linear_phi ? 6.0 : 0.15;
  return Theta{family, Eigen::VectorXd::Constant(arcs, v), lo, hi};
}

std::vector<Scenario> default_scenarios(const Network& net, NetworkKind kind, int limit,
                                        double damage) {
  const auto pairs = net.antiparallel_pairs();
  std::vector<Scenario> out;
  const size_t start = kind == NetworkKind::nguyen_dupuis ? 1 : 0;
  for (size_t i = start; i < pairs.size(); i += 2) {
    Scenario s;
    s.damage = Eigen::VectorXd::Zero(net.arc_count());
    s.damage[pairs[i].first] = damage;
    s.damage[pairs[i].second] = damage;
    out.push_back(std::move(s));
  }
  if (limit > 0 && static_cast<int>(out.size()) > limit) out.resize(static_cast<size_t>(limit));
  if (out.empty()) throw std::invalid_argument("network has no antiparallel pairs to damage");
  for (Scenario& s : out) s.probability = 1.0 / static_cast<double>(out.size());
  return out;
}

void sample_parameters(const ExperimentConfig& cfg, int trial, Eigen::VectorXd& theta,
                       KnownParams& known) {
  Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(trial)));
  const int m = build_network(cfg).arc_count();
  const auto [tlo, thi] = theta_bounds(cfg.family);
  theta.resize(m);
  for (int a = 0; a < m; ++a) theta[a] = rng.uniform(tlo, thi);
  if (cfg.family == CostFamily::linear_phi) {
    known.beta.resize(m);
    for (int a = 0; a < m; ++a) known.beta[a] = rng.uniform(2.0, 10.0);
  } else {
    known.t0.resize(m);
    for (int a = 0; a < m; ++a) known.t0[a] = rng.uniform(2.0, 10.0);
    known.capacity = Eigen::VectorXd::Constant(m, 8.0);
  }
}

TrialResult run_trial(const ExperimentConfig& cfg, int trial, WorkerPool* pool) {
  TrialResult r;
  r.trial = trial;
  const Network net = build_network(cfg);
  const int m = net.arc_count();

  Eigen::VectorXd theta;
  KnownParams known;
  sample_parameters(cfg, trial, theta, known);
  r.theta_original = theta;
  const CostFunction cost_true = make_cost(cfg.family, theta, known);

  auto stage = [&](const char* name, double StageTimings::* slot, auto&& body) {
    if (!r.error_stage.empty()) return;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      body();
    } catch (const std::exception& e) {
      r.error_stage = name;
      r.error_message = e.what();
    }
    r.timings.*slot = seconds_since(t0);
  };

  const std::vector<OdPair> pairs = all_od_pairs(net, cfg.demand_amount);
  std::vector<FlowObservation> observations;
  stage("datagen", &StageTimings::datagen,
        [&] { observations = generate_data(net, cost_true, pairs); });

  CostFunction cost_io = cost_true;
  stage("inverse", &StageTimings::inverse, [&] {
    IoSolution io = recover(net, observations, cfg.family, known);
    r.theta_io = io.theta.values;
    r.io_objective = io.objective;
    cost_io = make_cost(cfg.family, r.theta_io, known);
  });
  r.theta_uniform = uniform_theta(cfg.family, m).values;

  std::vector<Scenario> scenarios = cfg.scenarios;
  if (scenarios.empty()) scenarios = default_scenarios(net, cfg.kind, cfg.scenario_limit);
  std::vector<DemandVector> demands;
  for (const OdPair& p : cfg.demand_pairs)
    demands.push_back(demand_vector(net, p.origin, p.dest, p.amount));

  auto solve_snpp = [&](const Eigen::VectorXd& th) {
    SnppCost cost;
    if (cfg.family == CostFamily::linear_phi) {
      cost = LinearCost{th, known.beta};
    } else {
      BprCost exact{known.t0, known.capacity, th};
      cost = PwlBprCost{exact, linearize(exact, cfg.pwl_segments)};
    }
    SnppInstance inst = make_snpp_instance(net, std::move(cost), demands, scenarios);
    inst.budget = cfg.budget;
    PhOptions opts;
    opts.rho = cfg.rho;
    opts.epsilon = cfg.eps;
    opts.max_iterations = cfg.ph_max_iter;
    opts.miqp = cfg.miqp;
    return progressive_hedging(inst, opts, pool).u;
  };

  stage("snpp_original", &StageTimings::snpp_original,
        [&] { r.u_original = solve_snpp(r.theta_original); });
  stage("snpp_io", &StageTimings::snpp_io, [&] { r.u_io = solve_snpp(r.theta_io); });
  stage("snpp_uniform", &StageTimings::snpp_uniform,
        [&] { r.u_uniform = solve_snpp(r.theta_uniform); });

  if (cfg.family == CostFamily::bpr_alpha)
    stage("flow_error", &StageTimings::flow_error,
          [&] { r.flow_error = flow_error(net, cost_true, cost_io, pairs); });

  if (r.error_stage.empty()) {
    r.metric_o_io = (r.u_original - r.u_io).norm();
    r.metric_u_io = (r.u_uniform - r.u_io).norm();
    r.metric_u_o = (r.u_uniform - r.u_original).norm();
    r.ok = true;
  }
  return r;
}

std::vector<TrialResult> run_experiment(const ExperimentConfig& cfg, WorkerPool* pool) {
  if (cfg.trials < 1) throw std::invalid_argument("trials must be >= 1");
  std::vector<TrialResult> results;
  for (int t = 0; t < cfg.trials; ++t) results.push_back(run_trial(cfg, t, pool));
  return results;
}

std::vector<MetricSummary> summarize(const std::vector<TrialResult>& results, double budget) {
  if (budget <= 0) throw std::invalid_argument("budget must be positive");
  const std::pair<const char*, double TrialResult::*> metrics[] = {
      {"O-IO", &TrialResult::metric_o_io},
      {"U-IO", &TrialResult::metric_u_io},
      {"U-O", &TrialResult::metric_u_o},
  };
  std::vector<MetricSummary> out;
  for (const auto& [name, member] : metrics) {
    std::vector<double> v;
    for (const TrialResult& r : results)
      if (r.ok) v.push_back(r.*member);
    MetricSummary s;
    s.name = name;
    s.trials = static_cast<int>(v.size());
    if (v.empty()) {
      out.push_back(std::move(s));
      continue;
    }
    const double n = static_cast<double>(v.size());
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= n;
    s.mean = mean;
    s.mean_pct_budget = 100.0 * mean / budget;
    std::sort(v.begin(), v.end());
    s.median = quantile_sorted(v, 0.5);
    s.min = v.front();
    s.max = v.back();
    if (v.size() >= 2) {
      double var = 0.0;
      for (double x : v) var += (x - mean) * (x - mean);
      var /= (n - 1.0);
      const boost::math::students_t dist(n - 1.0);
      const double half = boost::math::quantile(dist, 0.995) * std::sqrt(var / n);
      s.ci_lo = mean - half;
      s.ci_hi = mean + half;
    } else {
      s.ci_lo = s.ci_hi = mean;
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::string summary_csv(const std::vector<MetricSummary>& summaries) {
  std::string out = "metric,mean,mean_pct_budget,ci_lo,ci_hi,median,min,max\n";
  for (const MetricSummary& s : summaries) {
    out += s.name;
    for (double v : {s.mean, s.mean_pct_budget, s.ci_lo, s.ci_hi, s.median, s.min, s.max}) {
      out += ',';
      append_num(out, v);
    }
    out += '\n';
  }
  return out;
}

std::string boxplot_csv(const std::vector<TrialResult>& results) {
  const std::pair<const char*, double TrialResult::*> metrics[] = {
      {"O-IO", &TrialResult::metric_o_io},
      {"U-IO", &TrialResult::metric_u_io},
      {"U-O", &TrialResult::metric_u_o},
  };
  std::string out = "metric,min,q1,median,q3,max\n";
  for (const auto& [name, member] : metrics) {
    std::vector<double> v;
    for (const TrialResult& r : results)
      if (r.ok) v.push_back(r.*member);
    if (v.empty()) continue;
    std::sort(v.begin(), v.end());
    out += name;
    for (double q : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      out += ',';
      append_num(out, quantile_sorted(v, q));
    }
    out += '\n';
  }
  return out;
}

std::string timings_csv(const std::vector<TrialResult>& results) {
  std::string out = "trial,ok,datagen,inverse,snpp_original,snpp_io,snpp_uniform,flow_error\n";
  for (const TrialResult& r : results) {
    out += std::to_string(r.trial);
    out += r.ok ? ",1" : ",0";
    for (double v : {r.timings.datagen, r.timings.inverse, r.timings.snpp_original,
                     r.timings.snpp_io, r.timings.snpp_uniform, r.timings.flow_error}) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), ",%.3f", v);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

}  // namespace netshield
