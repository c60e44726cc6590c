#include "flowagree/graph.hpp"

#include "flowagree/errors.hpp"

#include <queue>
#include <string>

namespace flowagree {

using Eigen::MatrixXd;
using Eigen::VectorXd;

Graph::Graph(int node_count, std::vector<Edge> edges)
    : node_count_(node_count), edges_(std::move(edges)) {
  if (node_count_ < 1) {
    throw InvalidGraphError("graph needs at least one node");
  }
  incidence_ = MatrixXd::Zero(node_count_, edge_count());
  for (int k = 0; k < edge_count(); ++k) {
    const auto [tail, head] = edges_[k];
    if (tail < 0 || tail >= node_count_ || head < 0 || head >= node_count_) {
      throw InvalidGraphError("edge " + std::to_string(k + 1) +
                              " references a node outside [1, " +
                              std::to_string(node_count_) + "]");
    }
    if (tail == head) {
      throw InvalidGraphError("edge " + std::to_string(k + 1) + " is a self-loop");
    }
    incidence_(tail, k) = 1.0;
    incidence_(head, k) = -1.0;
  }
}

Graph Graph::from_one_based(int node_count,
                            const std::vector<std::pair<int, int>>& edges) {
  std::vector<Edge> converted;
  converted.reserve(edges.size());
  for (const auto& [tail, head] : edges) {
    converted.push_back({tail - 1, head - 1});
  }
  return Graph(node_count, std::move(converted));
}

bool Graph::is_connected() const {
  std::vector<std::vector<int>> adjacency(node_count_);
  for (const auto& e : edges_) {
    adjacency[e.tail].push_back(e.head);
    adjacency[e.head].push_back(e.tail);
  }
  std::vector<bool> seen(node_count_, false);
  std::queue<int> frontier;
  frontier.push(0);
  seen[0] = true;
  int reached = 1;
  while (!frontier.empty()) {
    const int node = frontier.front();
    frontier.pop();
    for (int next : adjacency[node]) {
      if (!seen[next]) {
        seen[next] = true;
        ++reached;
        frontier.push(next);
      }
    }
  }
  return reached == node_count_;
}

MatrixXd kron_identity(const MatrixXd& matrix, int p) {
  if (p == 1) return matrix;
  MatrixXd lifted = MatrixXd::Zero(matrix.rows() * p, matrix.cols() * p);
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
      if (matrix(i, j) != 0.0) {
        lifted.block(i * p, j * p, p, p) =
            matrix(i, j) * MatrixXd::Identity(p, p);
      }
    }
  }
  return lifted;
}

WeightedLaplacian weighted_laplacian(const Graph& graph, const VectorXd& weights) {
  if (weights.size() != graph.edge_count()) {
    throw DimensionError("expected " + std::to_string(graph.edge_count()) +
                         " edge weights, got " + std::to_string(weights.size()));
  }
  for (Eigen::Index k = 0; k < weights.size(); ++k) {
    if (!(weights(k) > 0.0)) {
      throw InvalidWeightsError("edge weight " + std::to_string(k + 1) +
                                " must be strictly positive");
    }
  }
  const MatrixXd& B = graph.incidence();
  MatrixXd L = B * weights.cwiseInverse().asDiagonal() * B.transpose();
  return {0.5 * (L + L.transpose()), weights};
}

MatrixXd laplacian_pinv(const WeightedLaplacian& laplacian) {
  const MatrixXd& L = laplacian.matrix;
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(L);
  const VectorXd& values = eig.eigenvalues();
  const double largest = values.cwiseAbs().maxCoeff();
  const double cutoff = 1e-9 * largest;
  VectorXd inverted = VectorXd::Zero(values.size());
  int zeroed = 0;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (std::abs(values(i)) <= cutoff) {
      ++zeroed;
    } else {
      inverted(i) = 1.0 / values(i);
    }
  }
  if (zeroed > 1) {
    throw RankDeficiencyError("Laplacian has " + std::to_string(zeroed) +
                              " zero eigenvalues; graph is disconnected");
  }
  const MatrixXd& V = eig.eigenvectors();
  MatrixXd pinv = V * inverted.asDiagonal() * V.transpose();
  return 0.5 * (pinv + pinv.transpose());
}

VectorXd project_circulation(const Graph& graph, const VectorXd& v) {
  if (v.size() != graph.edge_count()) {
    throw DimensionError("edge vector has wrong length");
  }
  const MatrixXd& B = graph.incidence();
  if (graph.edge_count() == 0) return v;
  // v - B^T (B B^T)^+ B v, with the pseudoinverse taken per connected
  // component through a rank-revealing eigendecomposition.
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(B * B.transpose());
  const VectorXd& values = eig.eigenvalues();
  const double cutoff = 1e-9 * std::max(values.cwiseAbs().maxCoeff(), 1.0);
  VectorXd inverted = VectorXd::Zero(values.size());
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (std::abs(values(i)) > cutoff) inverted(i) = 1.0 / values(i);
  }
  const MatrixXd& V = eig.eigenvectors();
  const VectorXd potentials = V * inverted.asDiagonal() * (V.transpose() * (B * v));
  return v - B.transpose() * potentials;
}

Graph ring_graph(int n) {
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) edges.push_back({i, (i + 1) % n});
  return Graph(n, std::move(edges));
}

Graph path_graph(int n) {
  std::vector<Edge> edges;
  for (int i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1});
  return Graph(n, std::move(edges));
}

Graph complete_graph(int n) {
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) edges.push_back({i, j});
  }
  return Graph(n, std::move(edges));
}

}  // namespace flowagree
