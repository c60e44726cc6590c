#pragma once

#include <Eigen/Dense>

#include <vector>

namespace flowagree {

/// Oriented edge between two 0-based node indices.
struct Edge {
  int tail;
  int head;
  bool operator==(const Edge&) const = default;
};

/// Oriented graph with a fixed node-edge incidence matrix.
///
/// Nodes are 0-based internally. The incidence matrix B is n x m with
/// B(i, k) = +1 if node i is the tail of edge k, -1 if it is the head.
/// Instances are immutable after construction.
class Graph {
 public:
  Graph(int node_count, std::vector<Edge> edges);

  /// Builds a graph from 1-based (tail, head) pairs as used in scenario files.
  static Graph from_one_based(int node_count,
                              const std::vector<std::pair<int, int>>& edges);

  int node_count() const { return node_count_; }
  int edge_count() const { return static_cast<int>(edges_.size()); }
  const std::vector<Edge>& edges() const { return edges_; }

  const Eigen::MatrixXd& incidence() const { return incidence_; }

  /// True iff the underlying undirected graph is connected.
  bool is_connected() const;

  bool operator==(const Graph& other) const {
    return node_count_ == other.node_count_ && edges_ == other.edges_;
  }

 private:
  int node_count_;
  std::vector<Edge> edges_;
  Eigen::MatrixXd incidence_;
};

/// Kronecker lift B (x) I_p.
Eigen::MatrixXd kron_identity(const Eigen::MatrixXd& matrix, int p);

struct WeightedLaplacian {
  Eigen::MatrixXd matrix;   // B diag(1/q) B^T
  Eigen::VectorXd weights;  // q_k > 0
};

WeightedLaplacian weighted_laplacian(const Graph& graph,
                                     const Eigen::VectorXd& weights);

/// Moore-Penrose pseudoinverse of a connected-graph Laplacian.
///
/// Computed by symmetric eigendecomposition; eigenvalues below
/// 1e-9 * (largest eigenvalue) are treated as zero. Throws
/// RankDeficiencyError when more than one eigenvalue vanishes, i.e. the
/// graph is disconnected.
Eigen::MatrixXd laplacian_pinv(const WeightedLaplacian& laplacian);

/// Orthogonal projection of an edge vector onto the circulation space N(B).
Eigen::VectorXd project_circulation(const Graph& graph, const Eigen::VectorXd& v);

// Test and scenario helpers.
Graph ring_graph(int n);
Graph path_graph(int n);
Graph complete_graph(int n);

}  // namespace flowagree
