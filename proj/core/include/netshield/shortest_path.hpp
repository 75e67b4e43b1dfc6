#pragma once

#include <Eigen/Dense>
#include <vector>

#include "netshield/network.hpp"

namespace netshield {

/// Shortest-path distances from every node to `dest` under per-arc costs.
/// dist[i] = +inf when dest is unreachable from i. pred_arc[i] is the first
/// arc on a shortest i->dest path (-1 at dest or when unreachable).
struct ShortestPathTree {
  Eigen::VectorXd dist;
  std::vector<int> pred_arc;
};

/// Deque-based label-correcting search on the reverse graph. Costs must be
/// nonnegative.
ShortestPathTree shortest_paths_to(const Network& net, const Eigen::VectorXd& arc_cost,
                                   NodeId dest);

/// Arc indices of the dest-ward path starting at `origin`; empty when
/// origin == dest. Throws if dest is unreachable.
std::vector<int> extract_path(const Network& net, const ShortestPathTree& tree, NodeId origin);

}  // namespace netshield
