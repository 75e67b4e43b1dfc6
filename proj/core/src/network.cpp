#include "netshield/network.hpp"

#include <map>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace netshield {

Network::Network(int node_count, std::vector<Arc> arcs)
    : node_count_(node_count), arcs_(std::move(arcs)) {
  if (node_count_ < 1) throw std::invalid_argument("network needs at least one node");
  const int m = arc_count();
  out_arcs_.resize(static_cast<size_t>(node_count_));
  in_arcs_.resize(static_cast<size_t>(node_count_));
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<size_t>(2 * m));
  for (int j = 0; j < m; ++j) {
    const Arc& a = arcs_[static_cast<size_t>(j)];
    if (a.tail < 0 || a.tail >= node_count_ || a.head < 0 || a.head >= node_count_)
      throw std::invalid_argument("arc endpoint out of range");
    if (a.tail == a.head) throw std::invalid_argument("self-loops are not allowed");
    trips.emplace_back(a.tail, j, -1.0);
    trips.emplace_back(a.head, j, 1.0);
    out_arcs_[static_cast<size_t>(a.tail)].push_back(j);
    in_arcs_[static_cast<size_t>(a.head)].push_back(j);
  }
  incidence_.resize(node_count_, m);
  incidence_.setFromTriplets(trips.begin(), trips.end());
}

std::vector<std::pair<int, int>> Network::antiparallel_pairs() const {
  std::map<std::pair<int, int>, int> first_seen;
  std::vector<std::pair<int, int>> pairs;
  for (int j = 0; j < arc_count(); ++j) {
    const Arc& a = arcs_[static_cast<size_t>(j)];
    auto rev = std::make_pair(static_cast<int>(a.head), static_cast<int>(a.tail));
    if (auto it = first_seen.find(rev); it != first_seen.end()) {
      pairs.emplace_back(it->second, j);
    } else {
      first_seen.emplace(std::make_pair(static_cast<int>(a.tail), static_cast<int>(a.head)), j);
    }
  }
  return pairs;
}

nlohmann::json Network::to_json() const {
  nlohmann::json arcs = nlohmann::json::array();
  for (const Arc& a : arcs_) arcs.push_back({a.tail, a.head});
  return {{"node_count", node_count_}, {"arcs", arcs}};
}

Network Network::from_json(const nlohmann::json& j) {
  std::vector<Arc> arcs;
  for (const auto& e : j.at("arcs")) arcs.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
  return Network(j.at("node_count").get<int>(), std::move(arcs));
}

Network build_grid(int rows, int cols) {
  if (rows < 1 || cols < 1 || rows * cols < 2) throw std::invalid_argument("degenerate grid");
  auto id = [cols](int r, int c) { return r * cols + c; };
  std::vector<Arc> arcs;
  for (int r = 0; r < rows; ++r)  // eastward
    for (int c = 0; c + 1 < cols; ++c) arcs.push_back({id(r, c), id(r, c + 1)});
  for (int r = 0; r < rows; ++r)  // westward
    for (int c = 0; c + 1 < cols; ++c) arcs.push_back({id(r, c + 1), id(r, c)});
  for (int r = 0; r + 1 < rows; ++r)  // southward
    for (int c = 0; c < cols; ++c) arcs.push_back({id(r, c), id(r + 1, c)});
  for (int r = 0; r + 1 < rows; ++r)  // northward
    for (int c = 0; c < cols; ++c) arcs.push_back({id(r + 1, c), id(r, c)});
  return Network(rows * cols, std::move(arcs));
}

namespace {

// Nguyen-Dupuis edge list with literature nodes 1-13 relabeled to 0-12.
// Mirrors core/data/nguyen_dupuis.json; each undirected edge is emitted as
// (u,v) then (v,u).
constexpr std::pair<int, int> kNguyenDupuisEdges[] = {
    {0, 4}, {0, 11}, {3, 4}, {3, 8},  {4, 5},  {4, 8},   {5, 6},
    {5, 9}, {6, 7},  {6, 10}, {7, 1}, {8, 9},  {8, 12},  {9, 10},
    {10, 1}, {10, 2}, {11, 5}, {11, 7}, {12, 2},
};

}  // namespace

Network build_nguyen_dupuis() {
  std::vector<Arc> arcs;
  for (auto [u, v] : kNguyenDupuisEdges) {
    arcs.push_back({u, v});
    arcs.push_back({v, u});
  }
  return Network(13, std::move(arcs));
}

DemandVector demand_vector(const Network& net, NodeId origin, NodeId dest, double amount) {
  if (origin < 0 || origin >= net.node_count() || dest < 0 || dest >= net.node_count())
    throw std::invalid_argument("demand node out of range");
  if (origin == dest) throw std::invalid_argument("origin equals destination");
  if (amount <= 0) throw std::invalid_argument("demand amount must be positive");
  DemandVector d;
  d.entries = Eigen::VectorXd::Zero(net.node_count());
  d.entries[origin] = -amount;
  d.entries[dest] = amount;
  d.destination = dest;
  return d;
}

}  // namespace netshield
