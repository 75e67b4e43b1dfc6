#include <doctest.h>

#include <limits>
#include <random>

#include "netshield/network.hpp"
#include "netshield/shortest_path.hpp"

using namespace netshield;

namespace {

// Bellman-Ford distances to dest, as an independent oracle.
Eigen::VectorXd bellman_ford_to(const Network& net, const Eigen::VectorXd& cost, NodeId dest) {
  const double inf = std::numeric_limits<double>::infinity();
  Eigen::VectorXd dist = Eigen::VectorXd::Constant(net.node_count(), inf);
  dist[dest] = 0.0;
  for (int pass = 0; pass < net.node_count(); ++pass) {
    bool changed = false;
    for (int j = 0; j < net.arc_count(); ++j) {
      const Arc& a = net.arc(j);
      if (dist[a.head] + cost[j] < dist[a.tail] - 1e-15) {
        dist[a.tail] = dist[a.head] + cost[j];
        changed = true;
      }
    }
    if (!changed) break;
  }
  return dist;
}

}  // namespace

TEST_CASE("distances agree with bellman-ford on random grids") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> cost_dist(0.1, 12.0);
  for (int rep = 0; rep < 20; ++rep) {
    Network net = rep % 2 ? build_grid(4, 4) : build_nguyen_dupuis();
    Eigen::VectorXd cost(net.arc_count());
    for (int j = 0; j < net.arc_count(); ++j) cost[j] = cost_dist(rng);
    const NodeId dest = static_cast<NodeId>(rng() % net.node_count());
    ShortestPathTree tree = shortest_paths_to(net, cost, dest);
    Eigen::VectorXd oracle = bellman_ford_to(net, cost, dest);
    for (int i = 0; i < net.node_count(); ++i)
      CHECK(tree.dist[i] == doctest::Approx(oracle[i]).epsilon(1e-12));
  }
}

TEST_CASE("predecessor arcs trace a path of the reported length") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> cost_dist(0.5, 5.0);
  Network net = build_grid(3, 4);
  Eigen::VectorXd cost(net.arc_count());
  for (int j = 0; j < net.arc_count(); ++j) cost[j] = cost_dist(rng);
  ShortestPathTree tree = shortest_paths_to(net, cost, 11);
  for (int origin = 0; origin < net.node_count(); ++origin) {
    std::vector<int> path = extract_path(net, tree, origin);
    double total = 0.0;
    NodeId at = origin;
    for (int j : path) {
      CHECK(net.arc(j).tail == at);
      total += cost[j];
      at = net.arc(j).head;
    }
    CHECK(at == 11);
    CHECK(total == doctest::Approx(tree.dist[origin]).epsilon(1e-12));
  }
}

TEST_CASE("unreachable nodes get infinite labels") {
  // Two disconnected components: 0->1 and 2->3.
  Network net(4, {{0, 1}, {2, 3}});
  Eigen::VectorXd cost = Eigen::VectorXd::Ones(2);
  ShortestPathTree tree = shortest_paths_to(net, cost, 1);
  CHECK(tree.dist[0] == 1.0);
  CHECK(std::isinf(tree.dist[2]));
  CHECK(std::isinf(tree.dist[3]));
  CHECK_THROWS(extract_path(net, tree, 2));
}

TEST_CASE("zero-cost arcs are handled") {
  Network net(3, {{0, 1}, {1, 2}, {0, 2}});
  Eigen::VectorXd cost(3);
  cost << 0.0, 0.0, 1.0;
  ShortestPathTree tree = shortest_paths_to(net, cost, 2);
  CHECK(tree.dist[0] == 0.0);
}
