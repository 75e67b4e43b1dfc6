// netshield command-line tool: data generation, cost fitting, protection
// solves, and the full experiment harness. Exit codes: 0 success, 2
// configuration error, 3 solver/runtime error.

#include <CLI11.hpp>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <thread>

#include "netshield/experiments.hpp"
#include "netshield/serialization.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace netshield;

namespace {

constexpr const char* kVersion = "1.0.0";

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& data) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << data;
  if (!out) throw std::runtime_error("short write to " + p.string());
}

std::string now_iso8601() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

int resolve_workers(int cli_value) {
  if (cli_value > 0) return cli_value;
  if (const char* env = std::getenv("NETSHIELD_WORKERS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// Every run directory gets a manifest written before any result file and
// finalized (status + output hashes) after the last one.
class Manifest {
 public:
  Manifest(fs::path dir, std::string command, std::uint64_t seed, json config)
      : path_(dir / "manifest.json") {
    doc_ = json{{"tool", "netshield"},      {"version", kVersion},
                {"command", std::move(command)}, {"seed", seed},
                {"status", "running"},      {"started", now_iso8601()},
                {"config", std::move(config)},   {"inputs", json::object()},
                {"outputs", json::object()}};
    flush();
  }

  void add_input(const fs::path& p, const std::string& content) {
    doc_["inputs"][p.string()] = content_hash(content);
    flush();
  }

  void add_output(const fs::path& p, const std::string& content) {
    doc_["outputs"][p.string()] = content_hash(content);
  }

  void finalize() {
    doc_["status"] = "complete";
    doc_["finished"] = now_iso8601();
    flush();
  }

 private:
  void flush() { write_file(path_, doc_.dump(2) + "\n"); }
  fs::path path_;
  json doc_;
};

// One configuration schema serves datagen/fit/snpp-solve: the experiment
// config plus optional explicit parameter vectors overriding the sampled
// ones.
struct ProblemSetup {
  ExperimentConfig cfg;
  Eigen::VectorXd theta;
  KnownParams known;
};

Eigen::VectorXd vec_field(const json& j, const char* key, int expect) {
  const json& a = j.at(key);
  if (!a.is_array() || static_cast<int>(a.size()) != expect)
    throw ConfigError(std::string("'") + key + "' must be an array of length " +
                      std::to_string(expect));
  Eigen::VectorXd v(expect);
  for (int i = 0; i < expect; ++i) v[i] = a[static_cast<size_t>(i)].get<double>();
  return v;
}

ProblemSetup load_problem(const std::string& text) {
  ProblemSetup ps;
  try {
    ps.cfg = config_from_json(text);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  const Network net = build_network(ps.cfg);
  const int m = net.arc_count();
  sample_parameters(ps.cfg, 0, ps.theta, ps.known);
  const json root = json::parse(text);
  try {
    if (root.contains("theta")) ps.theta = vec_field(root, "theta", m);
    if (root.contains("beta")) ps.known.beta = vec_field(root, "beta", m);
    if (root.contains("t0")) ps.known.t0 = vec_field(root, "t0", m);
    if (root.contains("capacity")) ps.known.capacity = vec_field(root, "capacity", m);
  } catch (const json::exception& e) {
    throw ConfigError(e.what());
  }
  const auto [lo, hi] = theta_bounds(ps.cfg.family);
  if ((ps.theta.array() < lo).any() || (ps.theta.array() > hi).any())
    throw ConfigError("theta outside its family bounds");
  return ps;
}

SnppCost build_snpp_cost(const ProblemSetup& ps, const Eigen::VectorXd& theta) {
  if (ps.cfg.family == CostFamily::linear_phi) return LinearCost{theta, ps.known.beta};
  BprCost exact{ps.known.t0, ps.known.capacity, theta};
  return PwlBprCost{exact, linearize(exact, ps.cfg.pwl_segments)};
}

int cmd_datagen(const std::string& config_path, const std::string& out_dir) {
  const std::string text = read_file(config_path);
  ProblemSetup ps = load_problem(text);
  fs::create_directories(out_dir);
  Manifest manifest(out_dir, "datagen", ps.cfg.seed, json::parse(config_to_json(ps.cfg)));
  manifest.add_input(config_path, text);

  const Network net = build_network(ps.cfg);
  const CostFunction cost = make_cost(ps.cfg.family, ps.theta, ps.known);
  const std::vector<OdPair> pairs = all_od_pairs(net, ps.cfg.demand_amount);
  const std::vector<FlowObservation> obs = generate_data(net, cost, pairs);

  json doc = json::parse(observations_to_json(obs));
  doc["family"] = ps.cfg.family == CostFamily::linear_phi ? "linear_phi" : "bpr_alpha";
  doc["demand_amount"] = ps.cfg.demand_amount;
  const std::string out = doc.dump(2) + "\n";
  const fs::path obs_path = fs::path(out_dir) / "observations.json";
  write_file(obs_path, out);
  manifest.add_output(obs_path, out);
  manifest.finalize();
  std::cout << "wrote " << obs.size() << " observations to " << obs_path.string() << "\n";
  return 0;
}

int cmd_fit(const std::string& config_path, const std::string& obs_path,
            const std::string& out_path) {
  const std::string text = read_file(config_path);
  ProblemSetup ps = load_problem(text);
  const std::string obs_text = read_file(obs_path);

  std::vector<FlowObservation> obs;
  try {
    const json doc = json::parse(obs_text, nullptr, false);
    if (!doc.is_discarded() && doc.contains("family")) {
      const std::string fam = doc["family"].get<std::string>();
      const std::string want =
          ps.cfg.family == CostFamily::linear_phi ? "linear_phi" : "bpr_alpha";
      if (fam != want)
        throw ConfigError("observation family '" + fam + "' does not match config '" + want + "'");
    }
    obs = observations_from_json(obs_text);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (obs.empty()) throw ConfigError("observation file contains no observations");

  const fs::path out_dir = fs::path(out_path).parent_path();
  if (!out_dir.empty()) fs::create_directories(out_dir);
  Manifest manifest(out_dir.empty() ? fs::path(".") : out_dir, "fit", ps.cfg.seed,
                    json::parse(config_to_json(ps.cfg)));
  manifest.add_input(config_path, text);
  manifest.add_input(obs_path, obs_text);

  const Network net = build_network(ps.cfg);
  IoSolution io = recover(net, obs, ps.cfg.family, ps.known);
  const std::string out = theta_to_json(io.theta, io.objective);
  write_file(out_path, out);
  manifest.add_output(out_path, out);
  manifest.finalize();
  std::cout << "io_objective " << io.objective << ", theta written to " << out_path << "\n";
  return 0;
}

int cmd_snpp_solve(const std::string& config_path, const std::string& out_dir, int workers) {
  const std::string text = read_file(config_path);
  ProblemSetup ps = load_problem(text);
  fs::create_directories(out_dir);
  Manifest manifest(out_dir, "snpp-solve", ps.cfg.seed, json::parse(config_to_json(ps.cfg)));
  manifest.add_input(config_path, text);

  const Network net = build_network(ps.cfg);
  std::vector<Scenario> scenarios = ps.cfg.scenarios;
  if (scenarios.empty()) scenarios = default_scenarios(net, ps.cfg.kind, ps.cfg.scenario_limit);
  std::vector<DemandVector> demands;
  for (const OdPair& p : ps.cfg.demand_pairs)
    demands.push_back(demand_vector(net, p.origin, p.dest, p.amount));

  SnppInstance inst = make_snpp_instance(net, build_snpp_cost(ps, ps.theta), demands, scenarios);
  inst.budget = ps.cfg.budget;
  PhOptions opts;
  opts.rho = ps.cfg.rho;
  opts.epsilon = ps.cfg.eps;
  opts.max_iterations = ps.cfg.ph_max_iter;
  opts.miqp = ps.cfg.miqp;
  WorkerPool pool(workers);
  const PhResult res = progressive_hedging(inst, opts, &pool);

  json sol{{"version", 1},
           {"u", json::array()},
           {"expected_cost", res.expected_cost},
           {"converged", res.converged},
           {"iterations", res.iterations},
           {"scenario_objectives", res.scenario_objectives}};
  for (int a = 0; a < res.u.size(); ++a) sol["u"].push_back(res.u[a]);
  const std::string sol_text = sol.dump(2) + "\n";
  write_file(fs::path(out_dir) / "solution.json", sol_text);
  std::ostringstream hist;
  write_history_csv(hist, res.history);
  write_file(fs::path(out_dir) / "history.csv", hist.str());
  manifest.add_output(fs::path(out_dir) / "solution.json", sol_text);
  manifest.add_output(fs::path(out_dir) / "history.csv", hist.str());
  manifest.finalize();
  std::cout << "expected cost " << res.expected_cost << ", "
            << (res.converged ? "converged" : "iteration cap reached") << " after "
            << res.iterations << " iterations\n";
  return 0;
}

int cmd_experiment(std::string id, const std::string& scale_name, const std::string& custom_config,
                   double eps, int trials, std::uint64_t seed, bool eps_set, bool trials_set,
                   bool seed_set, const std::string& out_dir, int workers) {
  ExperimentConfig cfg;
  std::string input_text;
  if (!custom_config.empty()) {
    input_text = read_file(custom_config);
    try {
      cfg = config_from_json(input_text);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  } else {
    const Scale scale = scale_name == "desk" ? Scale::desk : Scale::paper;
    if (scale_name != "desk" && scale_name != "paper")
      throw ConfigError("unknown scale: " + scale_name);
    try {
      cfg = experiment_preset(id, scale);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  }
  if (eps_set) cfg.eps = eps;
  if (trials_set) cfg.trials = trials;
  if (seed_set) cfg.seed = seed;
  if (cfg.eps <= 0 || cfg.trials < 1) throw ConfigError("eps must be positive and trials >= 1");

  fs::create_directories(fs::path(out_dir) / "trials");
  const std::string resolved = config_to_json(cfg);
  Manifest manifest(out_dir, "experiment", cfg.seed, json::parse(resolved));
  if (!custom_config.empty()) manifest.add_input(custom_config, input_text);
  write_file(fs::path(out_dir) / "config.json", resolved);
  manifest.add_output(fs::path(out_dir) / "config.json", resolved);

  WorkerPool pool(workers);
  std::vector<TrialResult> results;
  bool all_ok = true;
  for (int t = 0; t < cfg.trials; ++t) {
    TrialResult r = run_trial(cfg, t, &pool);
    const std::string trial_text = trial_to_json(r);
    const fs::path trial_path =
        fs::path(out_dir) / "trials" / ("trial_" + std::to_string(t) + ".json");
    write_file(trial_path, trial_text);
    manifest.add_output(trial_path, trial_text);
    if (!r.ok) {
      all_ok = false;
      std::cerr << "trial " << t << " failed at stage " << r.error_stage << ": "
                << r.error_message << "\n";
    } else {
      std::cout << "trial " << t << ": O-IO " << r.metric_o_io << ", U-IO " << r.metric_u_io
                << ", U-O " << r.metric_u_o << "\n";
    }
    results.push_back(std::move(r));
  }

  const std::string summary = summary_csv(summarize(results, cfg.budget));
  const std::string boxplot = boxplot_csv(results);
  const std::string timings = timings_csv(results);
  write_file(fs::path(out_dir) / "summary.csv", summary);
  write_file(fs::path(out_dir) / "boxplot.csv", boxplot);
  write_file(fs::path(out_dir) / "timings.csv", timings);
  manifest.add_output(fs::path(out_dir) / "summary.csv", summary);
  manifest.add_output(fs::path(out_dir) / "boxplot.csv", boxplot);
  manifest.add_output(fs::path(out_dir) / "timings.csv", timings);
  manifest.finalize();
  std::cout << summary;
  if (!all_ok) throw std::runtime_error("one or more trials failed");
  return 0;
}

int cmd_report(const std::string& dir) {
  const fs::path trials_dir = fs::path(dir) / "trials";
  if (!fs::is_directory(trials_dir)) throw ConfigError("no trials directory under " + dir);
  double budget = 6.0;
  if (fs::exists(fs::path(dir) / "config.json")) {
    const json cfg = json::parse(read_file(fs::path(dir) / "config.json"));
    budget = cfg.value("budget", 6.0);
  }
  std::vector<TrialResult> results;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(trials_dir))
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (const fs::path& p : files) {
    const json t = json::parse(read_file(p));
    TrialResult r;
    r.trial = t.value("trial", 0);
    r.ok = t.value("ok", false);
    r.error_stage = t.value("error_stage", std::string());
    if (t.contains("metrics")) {
      r.metric_o_io = t["metrics"].value("O-IO", 0.0);
      r.metric_u_io = t["metrics"].value("U-IO", 0.0);
      r.metric_u_o = t["metrics"].value("U-O", 0.0);
    }
    results.push_back(std::move(r));
  }
  if (results.empty()) throw ConfigError("no trial files found under " + trials_dir.string());
  int failed = 0;
  for (const TrialResult& r : results)
    if (!r.ok) ++failed;
  std::cout << results.size() << " trials, " << failed << " failed\n";
  std::cout << summary_csv(summarize(results, budget));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"network protection toolkit"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  int workers = 0;
  app.add_option("--workers", workers, "worker threads (default: NETSHIELD_WORKERS or all cores)");

  std::string config_path, out_dir = "out", obs_path, out_path = "theta.json", report_dir;
  auto* datagen = app.add_subcommand("datagen", "generate equilibrium observations");
  datagen->add_option("--config", config_path, "problem config JSON")->required();
  datagen->add_option("--out", out_dir, "output directory");

  auto* fit = app.add_subcommand("fit", "recover cost parameters from observations");
  fit->add_option("--config", config_path, "problem config JSON")->required();
  fit->add_option("--observations", obs_path, "observations JSON")->required();
  fit->add_option("--out", out_path, "output theta JSON path");

  auto* snpp = app.add_subcommand("snpp-solve", "solve the protection problem");
  snpp->add_option("--config", config_path, "problem config JSON")->required();
  snpp->add_option("--out", out_dir, "output directory");

  std::string id = "I", scale = "paper", custom_config;
  double eps = 0.01;
  int trials = 10;
  std::uint64_t seed = 1;
  auto* exp = app.add_subcommand("experiment", "run a full experiment");
  auto* id_opt = exp->add_option("--id", id, "experiment id (I-IV)");
  exp->add_option("--scale", scale, "paper or desk")->capture_default_str();
  exp->add_option("--config", custom_config, "custom experiment config JSON (overrides --id)");
  auto* eps_opt = exp->add_option("--eps", eps, "hedging tolerance");
  auto* trials_opt = exp->add_option("--trials", trials, "trial count");
  auto* seed_opt = exp->add_option("--seed", seed, "base seed");
  exp->add_option("--out", out_dir, "results directory");
  (void)id_opt;

  auto* report = app.add_subcommand("report", "summarize an existing results directory");
  report->add_option("--dir", report_dir, "results directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*datagen) return cmd_datagen(config_path, out_dir);
    if (*fit) return cmd_fit(config_path, obs_path, out_path);
    if (*snpp) return cmd_snpp_solve(config_path, out_dir, resolve_workers(workers));
    if (*exp)
      return cmd_experiment(id, scale, custom_config, eps, trials, seed, eps_opt->count() > 0,
                            trials_opt->count() > 0, seed_opt->count() > 0, out_dir,
                            resolve_workers(workers));
    if (*report) return cmd_report(report_dir);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
