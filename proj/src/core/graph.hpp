#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace sgne {

/// Undirected edge stored with tail < head. The tail carries +sqrt(w) in the
/// incidence matrix, the head -sqrt(w).
struct Edge {
  int tail = 0;
  int head = 0;
  double weight = 1.0;
};

struct Neighbor {
  int node = 0;
  double weight = 1.0;
  int edge = 0;  // index into Graph::edges()
};

struct SpectralSummary {
  double lambda2 = 0.0;
  double lambda_n = 0.0;
  double max_degree = 0.0;
  Eigen::VectorXd degrees;
};

enum class Connectivity { require, allow_disconnected };

/// Weighted undirected communication graph. Immutable after construction.
class Graph {
 public:
  Graph(int node_count, std::vector<Edge> edges,
        Connectivity connectivity = Connectivity::require);

  static Graph complete(int node_count);
  static Graph cycle(int node_count);
  static Graph path(int node_count);
  /// "complete" | "cycle" | "path"
  static Graph from_topology(const std::string& topology, int node_count);

  int node_count() const { return node_count_; }
  int edge_count() const { return static_cast<int>(edges_.size()); }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<Neighbor>& neighbors(int node) const { return neighbors_.at(node); }
  bool adjacent(int a, int b) const;
  bool connected() const { return connected_; }

  /// Weighted degree d_i = sum_j w_ij.
  double degree(int node) const { return degrees_(node); }
  /// sum_j sqrt(w_ij), the edge-based analogue of the degree.
  double sqrt_weight_sum(int node) const;
  double max_degree() const;

  Eigen::MatrixXd adjacency() const;
  Eigen::MatrixXd laplacian() const;
  /// E x N, lexicographic orientation.
  Eigen::MatrixXd incidence() const;

  /// Throws GraphError("lambda2 is zero") for disconnected graphs.
  SpectralSummary spectral_summary() const;

 private:
  int node_count_;
  std::vector<Edge> edges_;
  std::vector<std::vector<Neighbor>> neighbors_;
  Eigen::VectorXd degrees_;
  bool connected_ = false;
};

}  // namespace sgne
