#include <doctest.h>

#include <cmath>
#include <numbers>

#include "core/errors.hpp"
#include "core/graph.hpp"
#include "helpers.hpp"

using namespace sgne;
using testing_oracles::jacobi_eigenvalues;

TEST_CASE("laplacian rows sum to zero and equal VᵀV") {
  for (const char* topo : {"complete", "cycle", "path"}) {
    for (int n : {2, 3, 5, 8}) {
      const Graph g = Graph::from_topology(topo, n);
      const Eigen::MatrixXd L = g.laplacian();
      CHECK(L.rowwise().sum().cwiseAbs().maxCoeff() < 1e-14);
      CHECK((L - L.transpose()).norm() == 0.0);
      const Eigen::MatrixXd V = g.incidence();
      CHECK(V.rows() == g.edge_count());
      CHECK((V.transpose() * V - L).cwiseAbs().maxCoeff() < 1e-14);
      CHECK((V * Eigen::VectorXd::Ones(n)).cwiseAbs().maxCoeff() < 1e-14);
    }
  }
}

TEST_CASE("edge counts of the standard topologies") {
  CHECK(Graph::complete(5).edge_count() == 10);
  CHECK(Graph::cycle(5).edge_count() == 5);
  CHECK(Graph::cycle(2).edge_count() == 1);
  CHECK(Graph::path(5).edge_count() == 4);
  CHECK(Graph::complete(5).max_degree() == 4.0);
  CHECK(Graph::cycle(6).max_degree() == 2.0);
}

TEST_CASE("spectral summary agrees with a Jacobi eigensolver") {
  const std::vector<Edge> edges{{0, 1, 2.0}, {1, 2, 0.5}, {2, 3, 1.0}, {0, 3, 3.0}, {1, 3, 1.5}};
  const Graph weighted(4, edges);
  for (const Graph& g : {Graph::complete(6), Graph::cycle(7), Graph::path(4), weighted}) {
    const Eigen::VectorXd ev = jacobi_eigenvalues(g.laplacian());
    const SpectralSummary s = g.spectral_summary();
    CHECK(std::abs(ev(0)) < 1e-12);
    CHECK(s.lambda2 == doctest::Approx(ev(1)).epsilon(1e-10));
    CHECK(s.lambda_n == doctest::Approx(ev(ev.size() - 1)).epsilon(1e-10));
    CHECK(s.max_degree <= s.lambda_n + 1e-12);
    CHECK(s.lambda_n <= 2.0 * s.max_degree + 1e-12);
  }
}

TEST_CASE("closed-form spectra") {
  // complete graph: every nonzero eigenvalue equals n
  CHECK(Graph::complete(5).spectral_summary().lambda2 == doctest::Approx(5.0));
  // cycle: 2 - 2 cos(2 pi / n)
  const double expected = 2.0 - 2.0 * std::cos(2.0 * std::numbers::pi / 5.0);
  CHECK(Graph::cycle(5).spectral_summary().lambda2 == doctest::Approx(expected).epsilon(1e-12));
  CHECK(Graph::cycle(5).spectral_summary().lambda2 == doctest::Approx(1.3819660112501051));
  CHECK(Graph::path(2).spectral_summary().lambda2 == doctest::Approx(2.0));
}

TEST_CASE("neighbors and adjacency are symmetric") {
  const Graph g = Graph::cycle(6);
  for (int i = 0; i < 6; ++i) {
    CHECK(g.neighbors(i).size() == 2);
    for (const Neighbor& nb : g.neighbors(i)) {
      CHECK(g.adjacent(i, nb.node));
      CHECK(g.adjacent(nb.node, i));
      const Edge& e = g.edges()[nb.edge];
      CHECK(((e.tail == i && e.head == nb.node) || (e.head == i && e.tail == nb.node)));
    }
  }
  CHECK_FALSE(g.adjacent(0, 3));
  const Eigen::MatrixXd W = g.adjacency();
  CHECK((W - W.transpose()).norm() == 0.0);
}

TEST_CASE("weights enter the degree and the square-root weight sum") {
  const Graph g(3, {{0, 1, 4.0}, {1, 2, 9.0}});
  CHECK(g.degree(1) == 13.0);
  CHECK(g.sqrt_weight_sum(1) == doctest::Approx(5.0));
  const Eigen::MatrixXd V = g.incidence();
  CHECK(V(0, 0) == doctest::Approx(2.0));
  CHECK(V(0, 1) == doctest::Approx(-2.0));
}

TEST_CASE("invalid graphs are rejected") {
  CHECK_THROWS_AS(Graph(0, {}), GraphError);
  CHECK_THROWS_AS(Graph(3, {{0, 3, 1.0}}), GraphError);
  CHECK_THROWS_AS(Graph(3, {{1, 1, 1.0}}), GraphError);
  CHECK_THROWS_AS(Graph(3, {{0, 1, -1.0}, {1, 2, 1.0}}), GraphError);
  CHECK_THROWS_AS(Graph(3, {{0, 1, 1.0}, {1, 0, 1.0}, {1, 2, 1.0}}), GraphError);
  CHECK_THROWS_AS(Graph(4, {{0, 1, 1.0}, {2, 3, 1.0}}), GraphError);
  CHECK_THROWS_AS(Graph::from_topology("star", 4), GraphError);
}

TEST_CASE("disconnected graph has no spectral summary") {
  const Graph g(4, {{0, 1, 1.0}, {2, 3, 1.0}}, Connectivity::allow_disconnected);
  CHECK_FALSE(g.connected());
  CHECK_THROWS_WITH_AS(g.spectral_summary(), doctest::Contains("lambda2 is zero"), GraphError);
  CHECK_THROWS_AS(Graph(1, {}).spectral_summary(), GraphError);
}
