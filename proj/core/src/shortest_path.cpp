#include "netshield/shortest_path.hpp"

#include <deque>
#include <limits>
#include <stdexcept>

namespace netshield {

ShortestPathTree shortest_paths_to(const Network& net, const Eigen::VectorXd& arc_cost,
                                   NodeId dest) {
  const int n = net.node_count();
  if (arc_cost.size() != net.arc_count())
    throw std::invalid_argument("arc cost length mismatch");
  if ((arc_cost.array() < 0).any())
    throw std::invalid_argument("negative arc cost");
  if (dest < 0 || dest >= n) throw std::invalid_argument("destination out of range");

  constexpr double inf = std::numeric_limits<double>::infinity();
  ShortestPathTree tree;
  tree.dist = Eigen::VectorXd::Constant(n, inf);
  tree.pred_arc.assign(static_cast<size_t>(n), -1);
  tree.dist[dest] = 0.0;

  // d'Esopo-Pape: relax incoming arcs of the labeled node, re-queueing
  // previously-seen nodes at the front.
  std::deque<int> queue{dest};
  std::vector<char> in_queue(static_cast<size_t>(n), 0);
  std::vector<char> seen(static_cast<size_t>(n), 0);
  in_queue[static_cast<size_t>(dest)] = seen[static_cast<size_t>(dest)] = 1;
  while (!queue.empty()) {
    const int v = queue.front();
    queue.pop_front();
    in_queue[static_cast<size_t>(v)] = 0;
    for (int j : net.in_arcs(v)) {
      const int u = net.arc(j).tail;
      const double cand = tree.dist[v] + arc_cost[j];
      if (cand < tree.dist[u] - 1e-15) {
        tree.dist[u] = cand;
        tree.pred_arc[static_cast<size_t>(u)] = j;
        if (!in_queue[static_cast<size_t>(u)]) {
          if (seen[static_cast<size_t>(u)])
            queue.push_front(u);
          else
            queue.push_back(u);
          in_queue[static_cast<size_t>(u)] = seen[static_cast<size_t>(u)] = 1;
        }
      }
    }
  }
  return tree;
}

std::vector<int> extract_path(const Network& net, const ShortestPathTree& tree, NodeId origin) {
  if (!std::isfinite(tree.dist[origin]))
    throw std::runtime_error("destination unreachable from origin");
  std::vector<int> path;
  int node = origin;
  while (tree.pred_arc[static_cast<size_t>(node)] >= 0) {
    const int j = tree.pred_arc[static_cast<size_t>(node)];
    path.push_back(j);
    node = net.arc(j).head;
    if (path.size() > static_cast<size_t>(net.arc_count()))
      throw std::runtime_error("cycle in shortest-path tree");
  }
  return path;
}

}  // namespace netshield
