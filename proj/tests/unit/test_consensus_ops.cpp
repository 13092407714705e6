#include <doctest.h>

#include <cmath>
#include <random>

#include "core/consensus_ops.hpp"
#include "core/errors.hpp"
#include "core/oracle.hpp"
#include "core/scenarios.hpp"
#include "helpers.hpp"

using namespace sgne;
using testing_oracles::jacobi_eigenvalues;

namespace {

GameMode mode_of(Variant v) { return is_aggregative(v) ? GameMode::aggregative : GameMode::network; }

double network_c(Variant v, const GameModel& game, const Graph& g) {
  if (is_aggregative(v)) return 1.0;
  return 2.0 * theory_constants(v, game.constants(), g.spectral_summary(), game.agents(), 1.0).c_min;
}

Eigen::VectorXd random_point(const ExtendedOperator& op, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss;
  Eigen::VectorXd w(op.layout().size);
  for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = gauss(rng);
  return w;
}

}  // namespace

TEST_CASE("selection matrices split each estimate into own and others") {
  const Scenario sc = nash_cournot({3, 2, 1.0, 1.0}, 0);
  const GameModel& g = sc.game;
  const SelectionMatrices sel = SelectionMatrices::make(g);
  const int n = g.total_dim(), N = g.agents();
  CHECK(sel.R.rows() == n);
  CHECK(sel.S.rows() == N * n - n);
  Eigen::MatrixXd stacked(N * n, N * n);
  stacked << Eigen::MatrixXd(sel.R), Eigen::MatrixXd(sel.S);
  // a permutation: orthogonal with 0/1 entries
  CHECK((stacked * stacked.transpose() - Eigen::MatrixXd::Identity(N * n, N * n)).norm() < 1e-14);
  Eigen::VectorXd xhat = Eigen::VectorXd::LinSpaced(N * n, 0.0, N * n - 1.0);
  const Eigen::VectorXd own = sel.R * xhat;
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < g.dim(i); ++j) CHECK(own(g.offset(i) + j) == xhat(i * n + g.offset(i) + j));
}

TEST_CASE("step-size ceilings by hand on the two-agent budget game") {
  const Scenario sc = two_agent_budget();
  const Graph g = Graph::path(2);
  const StepSizeBounds node = step_size_bounds(Variant::node_network, g, sc.game, 0.1);
  CHECK(node.alpha(0) == doctest::Approx(1.0 / 1.1));
  CHECK(node.nu(0) == doctest::Approx(1.0 / 2.1));
  CHECK(node.delta(0) == doctest::Approx(1.0 / 3.1));
  const StepSizeBounds edge = step_size_bounds(Variant::edge_network, g, sc.game, 0.1);
  CHECK(edge.alpha(1) == doctest::Approx(1.0 / 1.1));
  CHECK(edge.nu(1) == doctest::Approx(1.0 / 1.1));
  CHECK(edge.delta(1) == doctest::Approx(1.0 / 2.1));
}

TEST_CASE("default profile: safety fraction, uniform edge gain, tracking gain") {
  const Scenario sc = ev_charging({4, 6, 1.0, 1.0}, 0);
  const Graph g = Graph::path(4);
  const StepSizeBounds b = step_size_bounds(Variant::edge_aggregative, g, sc.game, 0.1);
  const StepSizeProfile p = default_profile(Variant::edge_aggregative, g, sc.game, 0.1, 0.5, 1.0);
  CHECK((p.alpha - 0.5 * b.alpha).norm() < 1e-15);
  CHECK((p.delta - 0.5 * b.delta).norm() < 1e-15);
  CHECK(p.nu.maxCoeff() == p.nu.minCoeff());
  CHECK(p.nu(0) == doctest::Approx(0.5 * b.nu.minCoeff()));
  CHECK(p.gamma == doctest::Approx(0.5 / (0.1 + 2.0 * 2.0)));
  CHECK(bound_violations(p, b).empty());
  const StepSizeProfile big = p.scaled(3.0);
  CHECK_FALSE(bound_violations(big, b).empty());
}

TEST_CASE("profile validation names the offending field") {
  const Scenario sc = two_agent_budget();
  const Graph g = Graph::path(2);
  StepSizeProfile p = default_profile(Variant::node_network, g, sc.game, 0.1, 0.5, 1.0);
  p.alpha(1) = -1.0;
  CHECK_THROWS_WITH_AS(validate_profile(Variant::node_network, p, 2), doctest::Contains("step_sizes"),
                       ConfigError);
  p = default_profile(Variant::node_network, g, sc.game, 0.1, 0.5, 1.0);
  p.delta.resize(3);
  CHECK_THROWS_AS(validate_profile(Variant::node_network, p, 2), ConfigError);
}

TEST_CASE("preconditioner is symmetric and positive definite at half the ceilings") {
  for (Variant v : all_variants) {
    QuadraticParams qp;
    qp.mode = mode_of(v);
    qp.constraints = 2;
    const Scenario sc = analytic_quadratic(qp, 4);
    for (const Graph& g : {Graph::path(3), Graph::complete(3)}) {
      const double c = network_c(v, sc.game, g);
      const StepSizeProfile p = default_profile(v, g, sc.game, 0.1, 0.5, c);
      const Preconditioner phi = assemble_preconditioner(v, p, g, sc.game);
      const Eigen::MatrixXd M(phi.matrix());
      CHECK((M - M.transpose()).cwiseAbs().maxCoeff() == 0.0);
      const Eigen::VectorXd ev = jacobi_eigenvalues(M);
      CHECK(phi.min_eigenvalue() == doctest::Approx(ev(0)).epsilon(1e-9));
      CHECK(ev(0) > 0.0);
      CHECK(phi.positive_definite());
      CHECK(phi.inverse_norm() == doctest::Approx(1.0 / ev(0)).epsilon(1e-9));
      // Gershgorin: every row's diagonal exceeds its off-diagonal sum by at least tau
      for (Eigen::Index r = 0; r < M.rows(); ++r) {
        const double off = M.row(r).cwiseAbs().sum() - std::abs(M(r, r));
        CHECK(M(r, r) - off >= 0.1 - 1e-12);
      }
      std::mt19937_64 rng(5);
      const ExtendedOperator op(v, sc.game, g, c);
      const Eigen::VectorXd w = random_point(op, rng);
      CHECK((M * phi.solve(w) - w).cwiseAbs().maxCoeff() < 1e-10);
      CHECK(phi.norm(w) == doctest::Approx(std::sqrt(w.dot(M * w))));
    }
  }
}

TEST_CASE("steps above the ceiling are refused with a named violation") {
  const Scenario sc = two_agent_budget();
  const Graph g = Graph::path(2);
  StepSizeProfile p = default_profile(Variant::node_network, g, sc.game, 0.1, 0.5, 1.0);
  p.alpha(0) *= 20.0;
  CHECK_THROWS_WITH_AS(assemble_preconditioner(Variant::node_network, p, g, sc.game),
                       doctest::Contains("alpha[0]"), PreconditionerError);
}

TEST_CASE("skew part is skew-symmetric and the blocks have the stated shapes") {
  for (Variant v : all_variants) {
    QuadraticParams qp;
    qp.mode = mode_of(v);
    qp.constraints = 2;
    const Scenario sc = analytic_quadratic(qp, 2);
    const Graph g = Graph::cycle(3);
    const ExtendedOperator op(v, sc.game, g, 1.0);
    const Eigen::MatrixXd B(op.skew_matrix());
    CHECK(B.rows() == op.layout().size);
    CHECK((B + B.transpose()).cwiseAbs().maxCoeff() == 0.0);
    const Eigen::MatrixXd K(op.aux_coupling());
    const Eigen::MatrixXd expected = is_edge(v) ? g.incidence() : g.laplacian();
    // K = (L or V) ⊗ I_2
    for (int r = 0; r < expected.rows(); ++r)
      for (int c = 0; c < expected.cols(); ++c)
        for (int k = 0; k < 2; ++k) CHECK(K(2 * r + k, 2 * c + k) == expected(r, c));
  }
}

TEST_CASE("closed-form backward step matches an independent resolvent solve") {
  for (Variant v : all_variants) {
    QuadraticParams qp;
    qp.mode = mode_of(v);
    qp.constraints = 2;
    const Scenario sc = analytic_quadratic(qp, 8);
    const Graph g = Graph::path(3);
    const double c = network_c(v, sc.game, g);
    const ExtendedOperator op(v, sc.game, g, c);
    const Preconditioner phi = op.assemble(default_profile(v, g, sc.game, 0.1, 0.5, c));
    std::mt19937_64 rng(13);
    for (int t = 0; t < 5; ++t) {
      const Eigen::VectorXd y = 3.0 * random_point(op, rng);
      const Eigen::VectorXd fast = op.backward(phi, y);
      const Eigen::VectorXd slow = oracle_resolvent(op, phi, y);
      CAPTURE(variant_name(v));
      CHECK((fast - slow).cwiseAbs().maxCoeff() < 1e-9);
      CHECK((op.project_domain(fast) - fast).norm() == 0.0);
    }
  }
}

TEST_CASE("equilibrium state is a fixed point of the matrix iteration") {
  for (Variant v : all_variants) {
    QuadraticParams qp;
    qp.mode = mode_of(v);
    qp.constraints = 2;
    const Scenario sc = analytic_quadratic(qp, 6);
    const Graph g = Graph::cycle(3);
    const double c = network_c(v, sc.game, g);
    const ExtendedOperator op(v, sc.game, g, c);
    const Preconditioner phi = op.assemble(default_profile(v, g, sc.game, 0.1, 0.5, c));
    const Eigen::VectorXd zero = equilibrium_state(op, sc.game, g, *sc.x_star, *sc.lambda_star);
    const Eigen::VectorXd next = op.step(phi, zero, ForwardSampling{}, 1);
    CAPTURE(variant_name(v));
    CHECK((next - zero).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(op.residual(phi, zero) < 1e-10);
  }
}

TEST_CASE("network consensus constant and bounds on a hand example") {
  GameConstants k;
  k.eta = 1.0;
  k.lip_F = 2.0;
  k.lip_p = 3.0;
  const SpectralSummary s = Graph::complete(4).spectral_summary();
  const TheoryConstants t = theory_constants(Variant::node_network, k, s, 4, 10.0);
  // (3 + 2)^2 / (4 * 1) + 3 = 9.25, divided by lambda2 = 4
  CHECK(t.c_min == doctest::Approx(2.3125));
  CHECK(t.theta == doctest::Approx(3.0 + 2.0 * 10.0 * 3.0));
  Eigen::Matrix2d ups;
  ups << 1.0 / 4.0, -5.0 / (2.0 * 2.0), -5.0 / (2.0 * 2.0), 10.0 * 4.0 - 3.0;
  CHECK((t.upsilon - ups).cwiseAbs().maxCoeff() < 1e-12);
  const Eigen::VectorXd ev = jacobi_eigenvalues(ups);
  CHECK(t.mu == doctest::Approx(ev(0)));
  CHECK(t.beta == doctest::Approx(ev(0) / (t.theta * t.theta)));
  // below c_min the quadratic form loses definiteness
  const TheoryConstants low = theory_constants(Variant::node_network, k, s, 4, 0.5 * t.c_min);
  CHECK(low.mu <= 0.0);
}

TEST_CASE("aggregative constants have no consensus threshold") {
  GameConstants k;
  k.eta = 1.0;
  k.lip_F = 2.0;
  k.lip_ax = 0.5;
  k.lip_au = 1.0;
  const SpectralSummary s = Graph::cycle(4).spectral_summary();
  const TheoryConstants t = theory_constants(Variant::node_aggregative, k, s, 4, 1.0);
  CHECK(std::isnan(t.c_min));
  CHECK(t.theta == doctest::Approx(std::max(4.0 * 0.25, 4.0 * 1.0 + 3.0 * s.lambda2)));
  CHECK(t.upsilon(0, 1) == doctest::Approx(-0.5));
  CHECK(t.upsilon(1, 1) == doctest::Approx(s.lambda2));
}
