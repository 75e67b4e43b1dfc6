#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "netshield/hedging.hpp"
#include "netshield/inverse.hpp"
#include "netshield/snpp.hpp"

namespace netshield {

/// Deterministic uniform sampler. Draws are derived from the raw 64-bit
/// stream as (bits >> 11) * 2^-53 so the sequence is identical across
/// standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}
  double uniform(double lo, double hi) {
    const double u = static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
  }
  std::uint64_t bits() { return eng_(); }

 private:
  std::mt19937_64 eng_;
};

/// Stateless seed mixer for deriving per-trial seeds from a base seed.
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t salt);

enum class NetworkKind { grid, nguyen_dupuis };

struct ExperimentConfig {
  std::string id;  // "I".."IV" or "custom"
  NetworkKind kind = NetworkKind::grid;
  int grid_rows = 4;
  int grid_cols = 4;
  CostFamily family = CostFamily::linear_phi;
  int trials = 10;
  std::uint64_t seed = 1;
  double eps = 0.01;
  double rho = 5.0;
  int ph_max_iter = 300;
  double budget = 6.0;
  double demand_amount = 8.0;
  int pwl_segments = 8;
  std::vector<OdPair> demand_pairs;   // the SNPP commodities (K entries)
  std::vector<Scenario> scenarios;    // empty -> default layout
  int scenario_limit = -1;            // truncate the default layout (desk presets)
  MiqpOptions miqp;
};

enum class Scale { paper, desk };

/// Built-in configuration for experiments I-IV. Paper scale uses the full
/// networks with 10 trials; desk scale shrinks to a 3x3 grid with 5 scenarios
/// and 5 trials for quick smoke runs.
ExperimentConfig experiment_preset(const std::string& id, Scale scale);

Network build_network(const ExperimentConfig& cfg);

/// Flat parameter vector of the family's midpoint value: phi = 6 for the
/// linear family, alpha = 0.15 for BPR.
Theta uniform_theta(CostFamily family, int arcs);

/// Equiprobable complete-destruction scenarios over every other antiparallel
/// arc pair (grid: even pair indices, 12 scenarios at 4x4; Nguyen-Dupuis: odd
/// pair indices, 9 scenarios). `limit` > 0 keeps only the first scenarios and
/// renormalizes probabilities.
std::vector<Scenario> default_scenarios(const Network& net, NetworkKind kind, int limit = -1,
                                        double damage = 8.0);

/// The trial's random cost parameterization, drawn in a fixed order (theta
/// per arc, then the known parameters) from mix_seed(cfg.seed, trial).
void sample_parameters(const ExperimentConfig& cfg, int trial, Eigen::VectorXd& theta,
                       KnownParams& known);

struct StageTimings {
  double datagen = 0.0;
  double inverse = 0.0;
  double snpp_original = 0.0;
  double snpp_io = 0.0;
  double snpp_uniform = 0.0;
  double flow_error = 0.0;
};

struct TrialResult {
  int trial = 0;
  bool ok = false;
  std::string error_stage;    // empty on success
  std::string error_message;  // empty on success
  Eigen::VectorXd theta_original, theta_io, theta_uniform;
  Eigen::VectorXd u_original, u_io, u_uniform;
  double metric_o_io = 0.0;   // ||u_original - u_io||_2
  double metric_u_io = 0.0;   // ||u_uniform - u_io||_2
  double metric_u_o = 0.0;    // ||u_uniform - u_original||_2
  double io_objective = 0.0;
  double flow_error = 0.0;  // BPR experiments only
  StageTimings timings;
};

/// One full pipeline pass: sample the original cost, generate equilibrium
/// observations over all OD pairs, recover the parameter by inverse
/// optimization, solve the protection problem under the original, recovered,
/// and uniform costs, and compare the decisions. Failures are recorded on the
/// result, not thrown.
TrialResult run_trial(const ExperimentConfig& cfg, int trial, WorkerPool* pool = nullptr);

std::vector<TrialResult> run_experiment(const ExperimentConfig& cfg, WorkerPool* pool = nullptr);

struct MetricSummary {
  std::string name;
  int trials = 0;
  double mean = 0.0;
  double mean_pct_budget = 0.0;  // 100 * mean / budget
  double ci_lo = 0.0;            // 99% Student-t interval; equals mean when trials < 2
  double ci_hi = 0.0;
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;
};

/// Statistics over the successful trials for the three decision-distance
/// metrics (order: O-IO, U-IO, U-O). Failed trials are skipped.
std::vector<MetricSummary> summarize(const std::vector<TrialResult>& results, double budget);

/// Deterministically formatted CSV: metric,mean,mean_pct_budget,ci_lo,ci_hi,
/// median,min,max.
std::string summary_csv(const std::vector<MetricSummary>& summaries);

/// Per-metric five-number summary (min, q1, median, q3, max) as CSV.
std::string boxplot_csv(const std::vector<TrialResult>& results);

/// Per-trial stage timings as CSV.
std::string timings_csv(const std::vector<TrialResult>& results);

}  // namespace netshield
