#include "netshield/serialization.hpp"

#include <cstdio>
#include <nlohmann/json.hpp>
#include <stdexcept>

namespace netshield {

namespace {

using nlohmann::json;

json vec_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd vec_from_json(const json& a, const char* what) {
  if (!a.is_array()) throw std::runtime_error(std::string(what) + " must be an array");
  Eigen::VectorXd v(static_cast<long>(a.size()));
  for (size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_number()) throw std::runtime_error(std::string(what) + " must be numeric");
    v[static_cast<long>(i)] = a[i].get<double>();
  }
  return v;
}

json parse(const std::string& text, const char* what) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw std::runtime_error(std::string("malformed JSON in ") + what);
  return j;
}

const json& field(const json& j, const char* key, const char* what) {
  auto it = j.find(key);
  if (it == j.end())
    throw std::runtime_error(std::string(what) + " is missing the '" + key + "' field");
  return *it;
}

std::string family_name(CostFamily f) {
  return f == CostFamily::linear_phi ? "linear_phi" : "bpr_alpha";
}

CostFamily family_from_name(const std::string& s) {
  if (s == "linear_phi") return CostFamily::linear_phi;
  if (s == "bpr_alpha") return CostFamily::bpr_alpha;
  throw std::runtime_error("unknown cost family: " + s);
}

}  // namespace

std::string content_hash(std::string_view data) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string observations_to_json(const std::vector<FlowObservation>& obs) {
  json root{{"version", 1}, {"observations", json::array()}};
  for (const FlowObservation& o : obs) {
    root["observations"].push_back({{"destination", o.demand.destination},
                                    {"demand", vec_to_json(o.demand.entries)},
                                    {"flow", vec_to_json(o.flow)},
                                    {"potentials", vec_to_json(o.potentials)}});
  }
  return root.dump(2) + "\n";
}

std::vector<FlowObservation> observations_from_json(const std::string& text) {
  const json root = parse(text, "observation file");
  const json& arr = field(root, "observations", "observation file");
  if (!arr.is_array()) throw std::runtime_error("'observations' must be an array");
  std::vector<FlowObservation> out;
  for (const json& o : arr) {
    FlowObservation fo;
    fo.demand.destination = field(o, "destination", "observation").get<NodeId>();
    fo.demand.entries = vec_from_json(field(o, "demand", "observation"), "demand");
    fo.flow = vec_from_json(field(o, "flow", "observation"), "flow");
    fo.potentials = vec_from_json(field(o, "potentials", "observation"), "potentials");
    if (fo.potentials.size() != fo.demand.entries.size())
      throw std::runtime_error("observation potentials/demand length mismatch");
    out.push_back(std::move(fo));
  }
  return out;
}

std::string theta_to_json(const Theta& theta, double io_objective) {
  json root{{"version", 1},
            {"family", family_name(theta.family)},
            {"values", vec_to_json(theta.values)},
            {"lower", theta.lower},
            {"upper", theta.upper},
            {"io_objective", io_objective}};
  return root.dump(2) + "\n";
}

Theta theta_from_json(const std::string& text, double* io_objective) {
  const json root = parse(text, "theta file");
  Theta t;
  t.family = family_from_name(field(root, "family", "theta file").get<std::string>());
  t.values = vec_from_json(field(root, "values", "theta file"), "values");
  t.lower = field(root, "lower", "theta file").get<double>();
  t.upper = field(root, "upper", "theta file").get<double>();
  if (io_objective) *io_objective = root.value("io_objective", 0.0);
  return t;
}

std::string scenarios_to_json(const std::vector<Scenario>& scenarios) {
  json root{{"version", 1}, {"scenarios", json::array()}};
  for (const Scenario& s : scenarios) {
    json arcs = json::array(), amounts = json::array();
    for (int a = 0; a < s.damage.size(); ++a) {
      if (s.damage[a] != 0.0) {
        arcs.push_back(a);
        amounts.push_back(s.damage[a]);
      }
    }
    root["scenarios"].push_back(
        {{"arcs", arcs}, {"damage", amounts}, {"probability", s.probability}});
  }
  return root.dump(2) + "\n";
}

std::vector<Scenario> scenarios_from_json(const std::string& text, int arc_count) {
  const json root = parse(text, "scenario file");
  const json& arr = field(root, "scenarios", "scenario file");
  if (!arr.is_array()) throw std::runtime_error("'scenarios' must be an array");
  std::vector<Scenario> out;
  for (const json& sj : arr) {
    Scenario s;
    s.damage = Eigen::VectorXd::Zero(arc_count);
    s.probability = field(sj, "probability", "scenario").get<double>();
    const json& arcs = field(sj, "arcs", "scenario");
    const json& damage = field(sj, "damage", "scenario");
    if (!arcs.is_array()) throw std::runtime_error("scenario 'arcs' must be an array");
    for (size_t i = 0; i < arcs.size(); ++i) {
      const int a = arcs[i].get<int>();
      if (a < 0 || a >= arc_count) throw std::runtime_error("scenario arc index out of range");
      // A scalar damage applies to every listed arc; an array gives each arc
      // its own amount.
      s.damage[a] = damage.is_array() ? damage.at(i).get<double>() : damage.get<double>();
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::string config_to_json(const ExperimentConfig& cfg) {
  json pairs = json::array();
  for (const OdPair& p : cfg.demand_pairs)
    pairs.push_back({{"origin", p.origin}, {"dest", p.dest}, {"amount", p.amount}});
  json root{{"version", 1},
            {"id", cfg.id},
            {"network", cfg.kind == NetworkKind::grid ? "grid" : "nguyen_dupuis"},
            {"grid_rows", cfg.grid_rows},
            {"grid_cols", cfg.grid_cols},
            {"family", family_name(cfg.family)},
            {"trials", cfg.trials},
            {"seed", cfg.seed},
            {"eps", cfg.eps},
            {"rho", cfg.rho},
            {"ph_max_iter", cfg.ph_max_iter},
            {"budget", cfg.budget},
            {"demand_amount", cfg.demand_amount},
            {"pwl_segments", cfg.pwl_segments},
            {"scenario_limit", cfg.scenario_limit},
            {"demand_pairs", pairs},
            {"miqp",
             {{"gap_tol", cfg.miqp.gap_tol},
              {"node_limit", cfg.miqp.node_limit},
              {"qp_tol", cfg.miqp.qp_tol},
              {"binary_tol", cfg.miqp.binary_tol}}}};
  if (!cfg.scenarios.empty()) {
    json arr = json::array();
    for (const Scenario& s : cfg.scenarios) {
      json arcs = json::array(), amounts = json::array();
      for (int a = 0; a < s.damage.size(); ++a)
        if (s.damage[a] != 0.0) {
          arcs.push_back(a);
          amounts.push_back(s.damage[a]);
        }
      arr.push_back({{"arcs", arcs}, {"damage", amounts}, {"probability", s.probability}});
    }
    root["scenarios"] = arr;
  }
  return root.dump(2) + "\n";
}

ExperimentConfig config_from_json(const std::string& text) {
  const json root = parse(text, "experiment config");
  ExperimentConfig cfg;
  cfg.id = root.value("id", std::string("custom"));
  const std::string net = root.value("network", std::string("grid"));
  if (net == "grid")
    cfg.kind = NetworkKind::grid;
  else if (net == "nguyen_dupuis")
    cfg.kind = NetworkKind::nguyen_dupuis;
  else
    throw std::runtime_error("unknown network kind: " + net);
  cfg.grid_rows = root.value("grid_rows", 4);
  cfg.grid_cols = root.value("grid_cols", 4);
  cfg.family = family_from_name(root.value("family", std::string("linear_phi")));
  cfg.trials = root.value("trials", 10);
  cfg.seed = root.value("seed", std::uint64_t{1});
  cfg.eps = root.value("eps", 0.01);
  cfg.rho = root.value("rho", 5.0);
  cfg.ph_max_iter = root.value("ph_max_iter", 300);
  cfg.budget = root.value("budget", 6.0);
  cfg.demand_amount = root.value("demand_amount", 8.0);
  cfg.pwl_segments = root.value("pwl_segments", 8);
  cfg.scenario_limit = root.value("scenario_limit", -1);
  if (cfg.trials < 1) throw std::runtime_error("trials must be >= 1");
  if (cfg.eps <= 0 || cfg.rho <= 0 || cfg.budget <= 0)
    throw std::runtime_error("eps, rho, and budget must be positive");
  if (auto it = root.find("miqp"); it != root.end()) {
    cfg.miqp.gap_tol = it->value("gap_tol", cfg.miqp.gap_tol);
    cfg.miqp.node_limit = it->value("node_limit", cfg.miqp.node_limit);
    cfg.miqp.qp_tol = it->value("qp_tol", cfg.miqp.qp_tol);
    cfg.miqp.binary_tol = it->value("binary_tol", cfg.miqp.binary_tol);
  }
  if (auto it = root.find("demand_pairs"); it != root.end()) {
    for (const json& p : *it)
      cfg.demand_pairs.push_back({field(p, "origin", "demand pair").get<NodeId>(),
                                  field(p, "dest", "demand pair").get<NodeId>(),
                                  p.value("amount", cfg.demand_amount)});
  }
  if (cfg.demand_pairs.empty()) {
    const Network network = build_network(cfg);
    const NodeId dest =
        cfg.kind == NetworkKind::nguyen_dupuis ? 2 : network.node_count() - 1;
    cfg.demand_pairs = {{0, dest, cfg.demand_amount}, {dest, 0, cfg.demand_amount}};
  }
  if (auto it = root.find("scenarios"); it != root.end()) {
    const Network network = build_network(cfg);
    cfg.scenarios = scenarios_from_json(json{{"scenarios", *it}}.dump(), network.arc_count());
  }
  return cfg;
}

std::string trial_to_json(const TrialResult& r) {
  json root{{"version", 1},
            {"trial", r.trial},
            {"ok", r.ok},
            {"error_stage", r.error_stage},
            {"error_message", r.error_message},
            {"theta_original", vec_to_json(r.theta_original)},
            {"theta_io", vec_to_json(r.theta_io)},
            {"theta_uniform", vec_to_json(r.theta_uniform)},
            {"u_original", vec_to_json(r.u_original)},
            {"u_io", vec_to_json(r.u_io)},
            {"u_uniform", vec_to_json(r.u_uniform)},
            {"metrics",
             {{"O-IO", r.metric_o_io}, {"U-IO", r.metric_u_io}, {"U-O", r.metric_u_o}}},
            {"io_objective", r.io_objective},
            {"flow_error", r.flow_error},
            {"timings",
             {{"datagen", r.timings.datagen},
              {"inverse", r.timings.inverse},
              {"snpp_original", r.timings.snpp_original},
              {"snpp_io", r.timings.snpp_io},
              {"snpp_uniform", r.timings.snpp_uniform},
              {"flow_error", r.timings.flow_error}}}};
  return root.dump(2) + "\n";
}

}  // namespace netshield
