#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace netshield {

using NodeId = int;

struct Arc {
  NodeId tail = 0;
  NodeId head = 0;
  bool operator==(const Arc&) const = default;
};

/// Directed graph with node-arc incidence matrix. Column j of the incidence
/// matrix has -1 at arcs[j].tail and +1 at arcs[j].head. Immutable after
/// construction; safe to share across threads.
class Network {
 public:
  Network(int node_count, std::vector<Arc> arcs);

  int node_count() const { return node_count_; }
  int arc_count() const { return static_cast<int>(arcs_.size()); }
  const std::vector<Arc>& arcs() const { return arcs_; }
  const Arc& arc(int j) const { return arcs_[static_cast<size_t>(j)]; }

  /// n x m sparse incidence matrix N.
  const Eigen::SparseMatrix<double>& incidence() const { return incidence_; }

  /// Arc indices leaving / entering a node, in arc order.
  const std::vector<int>& out_arcs(NodeId i) const { return out_arcs_[static_cast<size_t>(i)]; }
  const std::vector<int>& in_arcs(NodeId i) const { return in_arcs_[static_cast<size_t>(i)]; }

  /// Antiparallel arc pairs (j_forward, j_reverse), ordered by the first
  /// arc's index. Only pairs where both directions exist are listed.
  std::vector<std::pair<int, int>> antiparallel_pairs() const;

  nlohmann::json to_json() const;
  static Network from_json(const nlohmann::json& j);

 private:
  int node_count_;
  std::vector<Arc> arcs_;
  Eigen::SparseMatrix<double> incidence_;
  std::vector<std::vector<int>> out_arcs_;
  std::vector<std::vector<int>> in_arcs_;
};

/// Bidirected rows x cols lattice. Nodes are numbered row-major. Arc order:
/// all eastward arcs row-major, then westward, then southward, then
/// northward.
Network build_grid(int rows, int cols);

/// The standard 13-node Nguyen-Dupuis topology, bidirected to 38 arcs.
/// Literature nodes 1-13 are relabeled 0-12 preserving order; the edge list
/// and the relabeling map ship in core/data/nguyen_dupuis.json.
Network build_nguyen_dupuis();

/// Single-destination demand vector: one positive entry at the destination,
/// negative entries at origins, summing to zero.
struct DemandVector {
  Eigen::VectorXd entries;
  NodeId destination = 0;
};

/// Demand of `amount` from origin to dest: -amount at origin, +amount at dest.
DemandVector demand_vector(const Network& net, NodeId origin, NodeId dest, double amount);

}  // namespace netshield
