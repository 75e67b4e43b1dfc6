#include "netshield/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "netshield/shortest_path.hpp"

namespace netshield {

namespace {

constexpr int kMaxOuter = 2000;
constexpr int kEquilibratePasses = 4;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct Path {
  std::vector<int> arcs;
  double flow = 0.0;
};

void validate_cost(const CostFunction& cost) {
  if (const auto* lin = std::get_if<LinearCost>(&cost)) {
    if ((lin->phi.array() < 0).any() || (lin->beta.array() < 0).any())
      throw std::invalid_argument("non-positive cost");
  } else {
    const auto& bpr = std::get<BprCost>(cost);
    if ((bpr.t0.array() <= 0).any() || (bpr.capacity.array() <= 0).any() ||
        (bpr.alpha.array() < 0).any())
      throw std::invalid_argument("non-positive cost");
  }
}

double path_cost(const ArcCostFn& cost, const Eigen::VectorXd& x, const Path& p) {
  double c = 0.0;
  for (int a : p.arcs) c += cost(a, x[a]);
  return c;
}

// Arcs unique to each path (multiset difference by arc index).
std::pair<std::vector<int>, std::vector<int>> arc_difference(const Path& p, const Path& q) {
  std::vector<int> ps = p.arcs, qs = q.arcs;
  std::sort(ps.begin(), ps.end());
  std::sort(qs.begin(), qs.end());
  std::vector<int> p_only, q_only;
  std::set_difference(ps.begin(), ps.end(), qs.begin(), qs.end(), std::back_inserter(p_only));
  std::set_difference(qs.begin(), qs.end(), ps.begin(), ps.end(), std::back_inserter(q_only));
  return {p_only, q_only};
}

// Move flow from path p to cheaper path q. The 1-D Beckmann derivative along
// the shift is g(delta) = cost(q at x+delta) - cost(p at x-delta),
// nondecreasing in delta. Returns the shift in [0, p.flow] with g <= 0
// (descent guaranteed).
double line_search_shift(const ArcCostFn& cost, const Eigen::VectorXd& x,
                         const std::vector<int>& p_only, const std::vector<int>& q_only,
                         double max_shift) {
  auto g = [&](double delta) {
    double v = 0.0;
    for (int a : q_only) v += cost(a, x[a] + delta);
    for (int a : p_only) v -= cost(a, x[a] - delta);
    return v;
  };
  if (g(0.0) >= 0.0) return 0.0;
  if (g(max_shift) <= 0.0) return max_shift;
  double lo = 0.0, hi = max_shift;
  for (int it = 0; it < 100 && hi - lo > 1e-16 * (1.0 + max_shift); ++it) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) <= 0.0 ? lo : hi) = mid;
  }
  return lo;
}

void apply_shift(Eigen::VectorXd& x, Path& from, Path& to, const std::vector<int>& p_only,
                 const std::vector<int>& q_only, double delta) {
  for (int a : p_only) x[a] -= delta;
  for (int a : q_only) x[a] += delta;
  from.flow -= delta;
  to.flow += delta;
}

}  // namespace

double ComplementarityReport::max_residual() const {
  return std::max({stationarity, dual_feasibility, demand_residual, demand_comp});
}

AssignmentResult equilibrate_single_destination(
    const Network& net, const ArcCostFn& arc_cost, const DemandVector& demand, double rel_gap,
    const std::vector<char>* enabled,
    const std::function<void(const Eigen::VectorXd&, double)>& on_iteration) {
  if (rel_gap <= 0) throw std::invalid_argument("rel_gap must be positive");
  if (demand.entries.size() != net.node_count())
    throw std::invalid_argument("demand length mismatch");
  if (enabled && static_cast<int>(enabled->size()) != net.arc_count())
    throw std::invalid_argument("arc mask length mismatch");

  const int m = net.arc_count();
  const NodeId dest = demand.destination;
  auto masked = [&](int a) { return enabled && !(*enabled)[static_cast<size_t>(a)]; };
  auto eval_all = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd c(m);
    for (int a = 0; a < m; ++a) c[a] = masked(a) ? kInf : arc_cost(a, x[a]);
    return c;
  };

  std::vector<std::pair<NodeId, double>> origins;
  for (int i = 0; i < net.node_count(); ++i)
    if (demand.entries[i] < 0) origins.emplace_back(i, -demand.entries[i]);

  AssignmentResult result;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(m);
  std::vector<std::vector<Path>> paths;

  // Initial all-or-nothing assignment at zero-flow cost; unreachable origins
  // are shed up front.
  {
    ShortestPathTree tree = shortest_paths_to(net, eval_all(x), dest);
    std::vector<std::pair<NodeId, double>> routable;
    for (const auto& [node, amount] : origins) {
      if (!std::isfinite(tree.dist[node])) {
        result.shed.emplace_back(node, amount);
        continue;
      }
      Path p{extract_path(net, tree, node), amount};
      for (int a : p.arcs) x[a] += p.flow;
      paths.push_back({std::move(p)});
      routable.emplace_back(node, amount);
    }
    origins = std::move(routable);
  }
  if (origins.empty()) {
    result.flow = x;
    return result;
  }

  bool converged = false;
  for (int outer = 0; outer < kMaxOuter; ++outer) {
    const Eigen::VectorXd c = eval_all(x);
    ShortestPathTree tree = shortest_paths_to(net, c, dest);
    double lb = 0.0, total = 0.0;
    for (const auto& [node, amount] : origins) lb += amount * tree.dist[node];
    for (int a = 0; a < m; ++a)
      if (x[a] > 0.0) total += c[a] * x[a];
    const double rel = (total - lb) / std::max(1.0, total);
    if (on_iteration) on_iteration(x, rel);
    if (rel <= rel_gap) {
      converged = true;
      break;
    }

    // Column generation: add each origin's current shortest path.
    for (size_t o = 0; o < origins.size(); ++o) {
      std::vector<int> sp = extract_path(net, tree, origins[o].first);
      bool known = false;
      for (const Path& p : paths[o])
        if (p.arcs == sp) {
          known = true;
          break;
        }
      if (!known) paths[o].push_back(Path{std::move(sp), 0.0});
    }

    // Equilibrate flows within each origin's path set.
    for (int pass = 0; pass < kEquilibratePasses; ++pass) {
      for (auto& pset : paths) {
        if (pset.size() < 2) continue;
        size_t best = 0;
        double best_cost = path_cost(arc_cost, x, pset[0]);
        for (size_t i = 1; i < pset.size(); ++i) {
          const double pc = path_cost(arc_cost, x, pset[i]);
          if (pc < best_cost) {
            best_cost = pc;
            best = i;
          }
        }
        for (size_t i = 0; i < pset.size(); ++i) {
          if (i == best || pset[i].flow <= 0.0) continue;
          auto [p_only, q_only] = arc_difference(pset[i], pset[best]);
          const double delta = line_search_shift(arc_cost, x, p_only, q_only, pset[i].flow);
          if (delta > 0.0) apply_shift(x, pset[i], pset[best], p_only, q_only, delta);
        }
        // Drop exhausted paths; they re-enter via column generation if
        // they become competitive again.
        std::erase_if(pset, [&](const Path& p) { return p.flow <= 0.0; });
      }
    }
  }

  if (!converged) throw std::runtime_error("equilibrium solve did not reach the requested gap");
  result.flow = (x.array() < 0).select(Eigen::VectorXd::Zero(m), x);
  return result;
}

FlowObservation solve_tep(const Network& net, const CostFunction& cost,
                          const DemandVector& demand, double rel_gap, TepDiagnostics* diag) {
  if (arc_count(cost) != net.arc_count()) throw std::invalid_argument("cost length mismatch");
  validate_cost(cost);
  ArcCostFn fn = [&](int a, double flow) {
    if (const auto* lin = std::get_if<LinearCost>(&cost)) return lin->phi[a] * flow + lin->beta[a];
    const auto& bpr = std::get<BprCost>(cost);
    return bpr.t0[a] * (1.0 + bpr.alpha[a] * std::pow(flow / bpr.capacity[a], BprCost::exponent));
  };
  std::function<void(const Eigen::VectorXd&, double)> record;
  if (diag)
    record = [&](const Eigen::VectorXd& x, double rel) {
      diag->beckmann_history.push_back(beckmann_potential(cost, x));
      diag->gap_history.push_back(rel);
      diag->iterations = static_cast<int>(diag->gap_history.size()) - 1;
    };

  AssignmentResult res = equilibrate_single_destination(net, fn, demand, rel_gap, nullptr, record);
  if (!res.shed.empty()) throw std::runtime_error("disconnected demand");

  // Potentials: shortest-path distance to the destination at the final
  // flows. Nodes that cannot reach the destination share one large finite
  // label (arcs among them then satisfy the stationarity checks).
  ShortestPathTree tree = shortest_paths_to(net, eval_cost(cost, res.flow), demand.destination);
  Eigen::VectorXd y = tree.dist;
  double max_finite = 0.0;
  for (int i = 0; i < y.size(); ++i)
    if (std::isfinite(y[i])) max_finite = std::max(max_finite, y[i]);
  const double unreachable_label = max_finite + 1.0;
  for (int i = 0; i < y.size(); ++i)
    if (!std::isfinite(y[i])) y[i] = unreachable_label;

  FlowObservation obs;
  obs.flow = res.flow;
  obs.demand = demand;
  obs.potentials = y;
  return obs;
}

ComplementarityReport check_complementarity(const Network& net, const CostFunction& cost,
                                            const FlowObservation& obs) {
  ComplementarityReport rep;
  const Eigen::VectorXd c = eval_cost(cost, obs.flow.cwiseMax(0.0));
  const Eigen::VectorXd reduced = c + net.incidence().transpose() * obs.potentials;
  for (int a = 0; a < net.arc_count(); ++a) {
    rep.stationarity = std::max(rep.stationarity, std::max(0.0, std::min(obs.flow[a], reduced[a])));
    rep.dual_feasibility = std::max(rep.dual_feasibility, std::max(0.0, -reduced[a]));
  }
  const Eigen::VectorXd excess = obs.demand.entries - net.incidence() * obs.flow;
  rep.demand_residual = excess.lpNorm<Eigen::Infinity>();
  for (int i = 0; i < net.node_count(); ++i)
    rep.demand_comp = std::max(rep.demand_comp, std::abs(std::min(obs.potentials[i], excess[i])));
  return rep;
}

std::vector<FlowObservation> generate_data(const Network& net, const CostFunction& cost,
                                           const std::vector<OdPair>& pairs, double rel_gap) {
  std::vector<FlowObservation> out;
  out.reserve(pairs.size());
  for (const OdPair& p : pairs) {
    try {
      out.push_back(solve_tep(net, cost, demand_vector(net, p.origin, p.dest, p.amount), rel_gap));
    } catch (const std::exception& e) {
      throw std::runtime_error("equilibrium solve failed for OD pair (" +
                               std::to_string(p.origin) + "," + std::to_string(p.dest) +
                               "): " + e.what());
    }
  }
  return out;
}

std::vector<OdPair> all_od_pairs(const Network& net, double amount) {
  std::vector<OdPair> pairs;
  for (int o = 0; o < net.node_count(); ++o)
    for (int d = 0; d < net.node_count(); ++d)
      if (o != d) pairs.push_back({o, d, amount});
  return pairs;
}

}  // namespace netshield
