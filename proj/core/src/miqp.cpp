#include "netshield/miqp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace netshield {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Node {
  std::vector<std::pair<int, double>> fixings;  // (binary var, 0 or 1)
  double bound = -kInf;
  Eigen::VectorXd warm;
};

struct Frontier {
  // Open nodes keyed by bound; best-bound selection pops the smallest key.
  std::multimap<double, Node> open;

  void push(Node n) { open.emplace(n.bound, std::move(n)); }
  Node pop_best() {
    Node n = std::move(open.begin()->second);
    open.erase(open.begin());
    return n;
  }
  double best_bound() const { return open.empty() ? kInf : open.begin()->first; }
  bool empty() const { return open.empty(); }
};

bool feasible_point(const QpProblem& p, const std::vector<int>& bins, const Eigen::VectorXd& z,
                    double tol) {
  if (z.size() != p.num_vars()) return false;
  for (int i : bins) {
    const double v = z[i];
    if (std::min(std::abs(v), std::abs(v - 1.0)) > tol) return false;
  }
  if (p.lo.size() > 0) {
    for (int i = 0; i < p.num_vars(); ++i)
      if (z[i] < p.lo[i] - tol || z[i] > p.hi[i] + tol) return false;
  }
  if (p.A.rows() > 0 && ((p.A * z - p.b).array() > tol).any()) return false;
  if (p.E.rows() > 0 && ((p.E * z - p.f).array().abs() > tol).any()) return false;
  return true;
}

double objective_of(const QpProblem& p, const Eigen::VectorXd& z) {
  return 0.5 * z.dot(p.Q * z) + p.c.dot(z);
}

}  // namespace

MiqpSolution solve_miqp(const MiqpProblem& p, const MiqpOptions& opts) {
  if (opts.gap_tol <= 0) throw std::invalid_argument("gap_tol must be positive");
  const int n = p.base.num_vars();
  if (p.base.lo.size() != n || p.base.hi.size() != n)
    throw std::invalid_argument("MIQP base problem must carry box bounds");
  for (int i : p.binary_indices) {
    if (i < 0 || i >= n) throw std::invalid_argument("binary index out of range");
    if (p.base.lo[i] < -1e-9 || p.base.hi[i] > 1.0 + 1e-9)
      throw std::invalid_argument("binary variable must be bounded to [0,1]");
  }

  QpProblem work = p.base;  // lo/hi mutated per node
  const Eigen::VectorXd root_lo = p.base.lo, root_hi = p.base.hi;

  MiqpSolution sol;
  double incumbent_obj = kInf;
  Eigen::VectorXd incumbent;
  auto offer_incumbent = [&](const Eigen::VectorXd& z) {
    if (!feasible_point(p.base, p.binary_indices, z, 1e-6)) return;
    Eigen::VectorXd rounded = z;
    for (int i : p.binary_indices) rounded[i] = std::round(rounded[i]);
    const double obj = objective_of(p.base, rounded);
    if (obj < incumbent_obj) {
      incumbent = std::move(rounded);
      incumbent_obj = obj;
    }
  };
  if (opts.initial_incumbent) offer_incumbent(*opts.initial_incumbent);
  for (const Eigen::VectorXd& z : opts.incumbent_candidates) offer_incumbent(z);

  auto solve_node = [&](const Node& node) {
    work.lo = root_lo;
    work.hi = root_hi;
    for (auto [i, v] : node.fixings) work.lo[i] = work.hi[i] = v;
    std::optional<Eigen::VectorXd> warm;
    if (node.warm.size() == n) warm = node.warm;
    return solve_qp(work, opts.qp_tol, warm);
  };

  // Clean incumbent: re-solve with every binary pinned to its rounded value.
  auto polish_incumbent = [&](const Eigen::VectorXd& z, const Node& node) {
    work.lo = root_lo;
    work.hi = root_hi;
    for (int i : p.binary_indices) {
      const double v = std::round(z[i]);
      work.lo[i] = work.hi[i] = v;
    }
    QpSolution qs = solve_qp(work, opts.qp_tol, z);
    (void)node;
    if (qs.status == QpStatus::optimal && qs.objective < incumbent_obj) {
      incumbent = qs.z;
      for (int i : p.binary_indices) incumbent[i] = std::round(incumbent[i]);
      incumbent_obj = qs.objective;
    }
  };

  Frontier frontier;
  frontier.push(Node{});
  long nodes = 0;
  bool root_seen = false;
  bool hit_node_limit = false;
  double pruned_bound = kInf;  // min bound among nodes pruned by the incumbent

  while (!frontier.empty()) {
    if (nodes >= opts.node_limit) {
      hit_node_limit = true;
      break;
    }
    Node node = frontier.pop_best();
    // The node's inherited bound may already exceed the cutoff if the
    // incumbent improved since it was pushed.
    if (node.bound >= incumbent_obj - opts.gap_tol * std::max(1.0, std::abs(incumbent_obj))) {
      pruned_bound = std::min(pruned_bound, node.bound);
      continue;
    }
    // Dive depth-first from the selected node.
    bool dive_head = true;
    while (true) {
      if (nodes >= opts.node_limit) {
        frontier.push(std::move(node));
        hit_node_limit = true;
        break;
      }
      ++nodes;
      QpSolution qs = solve_node(node);
      if (!root_seen) {
        root_seen = true;
        sol.root_bound = qs.status == QpStatus::optimal ? qs.objective : -kInf;
        if (qs.status == QpStatus::unbounded)
          throw std::runtime_error("MIQP relaxation unbounded");
      }
      if (qs.status == QpStatus::infeasible) break;
      double bound = qs.objective;
      if (qs.status == QpStatus::max_iter) bound -= 1e-6 * (1.0 + std::abs(qs.objective));
      node.bound = bound;
      if (opts.rounding && dive_head) {
        dive_head = false;
        if (std::optional<Eigen::VectorXd> cand = opts.rounding(qs.z)) offer_incumbent(*cand);
      }
      const double prune_slack = opts.gap_tol * std::max(1.0, std::abs(incumbent_obj));
      if (bound >= incumbent_obj - prune_slack) {
        pruned_bound = std::min(pruned_bound, bound);
        break;
      }

      // Most-fractional binary, ties by lowest index. Already-fixed binaries
      // are never re-branched even when the relaxation reports them slightly
      // off their pinned value.
      auto is_fixed = [&](int i) {
        for (auto [j, v] : node.fixings)
          if (j == i) return true;
        return false;
      };
      // Reduced-cost fixing: the bound dual is a subgradient of the node's
      // optimal value in that bound, so flipping a binary sitting at a bound
      // costs at least the dual. Fix it for the subtree when that provably
      // exceeds the cutoff.
      if (std::isfinite(incumbent_obj) && qs.lo_dual.size() == n) {
        const double cutoff = incumbent_obj - prune_slack;
        for (int i : p.binary_indices) {
          if (is_fixed(i)) continue;
          if (qs.z[i] < 0.5 && bound + qs.lo_dual[i] >= cutoff)
            node.fixings.emplace_back(i, 0.0);
          else if (qs.z[i] >= 0.5 && bound + qs.hi_dual[i] >= cutoff)
            node.fixings.emplace_back(i, 1.0);
        }
      }
      int branch_var = -1;
      double best_frac = opts.binary_tol;
      for (int i : p.binary_indices) {
        if (is_fixed(i)) continue;
        const double frac = std::min(qs.z[i] - std::floor(qs.z[i]),
                                     std::ceil(qs.z[i]) - qs.z[i]);
        const double dist = std::min(std::abs(qs.z[i]), std::abs(qs.z[i] - 1.0));
        if (std::min(frac, dist) > best_frac) {
          best_frac = std::min(frac, dist);
          branch_var = i;
        }
      }
      if (branch_var < 0) {
        polish_incumbent(qs.z, node);
        break;
      }
      const double near = std::round(qs.z[branch_var]) >= 0.5 ? 1.0 : 0.0;
      Node far_child = node;
      far_child.fixings.emplace_back(branch_var, 1.0 - near);
      far_child.bound = bound;
      far_child.warm = qs.z;
      frontier.push(std::move(far_child));
      node.fixings.emplace_back(branch_var, near);
      node.warm = qs.z;
    }
    if (hit_node_limit) break;
    // Best-bound termination: every open node is within gap of the incumbent.
    if (std::isfinite(incumbent_obj)) {
      const double lb = frontier.best_bound();
      if ((incumbent_obj - lb) / std::max(1.0, std::abs(incumbent_obj)) <= opts.gap_tol) break;
    }
  }

  double lower = std::min(frontier.best_bound(), pruned_bound);
  lower = std::min(lower, incumbent_obj);
  if (frontier.empty() && !hit_node_limit && !std::isfinite(incumbent_obj)) {
    sol.status = MiqpStatus::infeasible;
    sol.nodes = nodes;
    return sol;
  }
  if (!std::isfinite(incumbent_obj)) {
    // Node limit without any feasible integer point.
    sol.status = MiqpStatus::infeasible;
    sol.nodes = nodes;
    sol.lower_bound = lower;
    return sol;
  }
  sol.incumbent = incumbent;
  sol.objective = incumbent_obj;
  sol.lower_bound = std::isfinite(lower) ? lower : incumbent_obj;
  sol.gap = std::max(0.0, (sol.objective - sol.lower_bound) /
                              std::max(1.0, std::abs(sol.objective)));
  sol.nodes = nodes;
  sol.status = hit_node_limit && sol.gap > opts.gap_tol ? MiqpStatus::node_limit
                                                        : MiqpStatus::optimal;
  return sol;
}

}  // namespace netshield
