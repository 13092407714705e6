#include "core/graph.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>
#include <utility>

#include <Eigen/Eigenvalues>

#include "core/errors.hpp"

namespace sgne {

Graph::Graph(int node_count, std::vector<Edge> edges, Connectivity connectivity)
    : node_count_(node_count), neighbors_(node_count > 0 ? node_count : 0) {
  if (node_count <= 0) throw GraphError("graph needs at least one node");

  std::set<std::pair<int, int>> seen;
  for (auto& e : edges) {
    if (e.tail < 0 || e.head < 0 || e.tail >= node_count || e.head >= node_count)
      throw GraphError("edge endpoint out of range");
    if (e.tail == e.head) throw GraphError("self-loop on node " + std::to_string(e.tail));
    if (!(e.weight > 0.0) || !std::isfinite(e.weight))
      throw GraphError("edge weights must be positive and finite");
    if (e.tail > e.head) std::swap(e.tail, e.head);
    if (!seen.insert({e.tail, e.head}).second)
      throw GraphError("duplicate edge (" + std::to_string(e.tail) + ", " +
                       std::to_string(e.head) + ")");
  }
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    return std::tie(a.tail, a.head) < std::tie(b.tail, b.head);
  });
  edges_ = std::move(edges);

  degrees_ = Eigen::VectorXd::Zero(node_count);
  for (int l = 0; l < edge_count(); ++l) {
    const Edge& e = edges_[l];
    neighbors_[e.tail].push_back({e.head, e.weight, l});
    neighbors_[e.head].push_back({e.tail, e.weight, l});
    degrees_(e.tail) += e.weight;
    degrees_(e.head) += e.weight;
  }
  for (auto& list : neighbors_)
    std::sort(list.begin(), list.end(),
              [](const Neighbor& a, const Neighbor& b) { return a.node < b.node; });

  std::vector<bool> visited(node_count, false);
  std::queue<int> frontier;
  frontier.push(0);
  visited[0] = true;
  int reached = 1;
  while (!frontier.empty()) {
    const int u = frontier.front();
    frontier.pop();
    for (const auto& nb : neighbors_[u]) {
      if (!visited[nb.node]) {
        visited[nb.node] = true;
        ++reached;
        frontier.push(nb.node);
      }
    }
  }
  connected_ = reached == node_count;
  if (!connected_ && connectivity == Connectivity::require)
    throw GraphError("graph is not connected");
}

Graph Graph::complete(int node_count) {
  std::vector<Edge> edges;
  for (int i = 0; i < node_count; ++i)
    for (int j = i + 1; j < node_count; ++j) edges.push_back({i, j, 1.0});
  return Graph(node_count, std::move(edges));
}

Graph Graph::cycle(int node_count) {
  std::vector<Edge> edges;
  if (node_count == 2) {
    edges.push_back({0, 1, 1.0});
  } else if (node_count > 2) {
    for (int i = 0; i < node_count; ++i) edges.push_back({i, (i + 1) % node_count, 1.0});
  }
  return Graph(node_count, std::move(edges));
}

Graph Graph::path(int node_count) {
  std::vector<Edge> edges;
  for (int i = 0; i + 1 < node_count; ++i) edges.push_back({i, i + 1, 1.0});
  return Graph(node_count, std::move(edges));
}

Graph Graph::from_topology(const std::string& topology, int node_count) {
  if (topology == "complete") return complete(node_count);
  if (topology == "cycle") return cycle(node_count);
  if (topology == "path") return path(node_count);
  throw GraphError("unknown topology '" + topology + "'");
}

bool Graph::adjacent(int a, int b) const {
  if (a < 0 || a >= node_count_) return false;
  const auto& list = neighbors_[a];
  return std::any_of(list.begin(), list.end(), [b](const Neighbor& n) { return n.node == b; });
}

double Graph::sqrt_weight_sum(int node) const {
  double total = 0.0;
  for (const auto& nb : neighbors_.at(node)) total += std::sqrt(nb.weight);
  return total;
}

double Graph::max_degree() const { return node_count_ > 0 ? degrees_.maxCoeff() : 0.0; }

Eigen::MatrixXd Graph::adjacency() const {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(node_count_, node_count_);
  for (const auto& e : edges_) {
    w(e.tail, e.head) = e.weight;
    w(e.head, e.tail) = e.weight;
  }
  return w;
}

Eigen::MatrixXd Graph::laplacian() const {
  Eigen::MatrixXd l = -adjacency();
  l.diagonal() = degrees_;
  return l;
}

Eigen::MatrixXd Graph::incidence() const {
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(edge_count(), node_count_);
  for (int l = 0; l < edge_count(); ++l) {
    const double s = std::sqrt(edges_[l].weight);
    v(l, edges_[l].tail) = s;
    v(l, edges_[l].head) = -s;
  }
  return v;
}

SpectralSummary Graph::spectral_summary() const {
  if (node_count_ < 2) throw GraphError("spectral summary needs at least two nodes");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(laplacian(), Eigen::EigenvaluesOnly);
  const Eigen::VectorXd& ev = solver.eigenvalues();
  SpectralSummary out;
  out.lambda2 = ev(1);
  out.lambda_n = ev(node_count_ - 1);
  out.degrees = degrees_;
  out.max_degree = max_degree();
  const double scale = std::max(1.0, out.lambda_n);
  if (!connected_ || out.lambda2 <= 1e-10 * scale) throw GraphError("lambda2 is zero");
  const double slack = 1e-9 * scale;
  if (out.lambda_n < out.max_degree - slack || out.lambda_n > 2.0 * out.max_degree + slack)
    throw GraphError("Laplacian spectrum violates d_max <= lambda_N <= 2 d_max");
  return out;
}

}  // namespace sgne
