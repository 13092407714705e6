#include <doctest.h>

#include "core/oracle.hpp"
#include "core/scenarios.hpp"

using namespace sgne;

TEST_CASE("oracle solves the two-agent budget game") {
  const Scenario sc = two_agent_budget();
  const VgneSolution s = solve_vgne(sc.game);
  CHECK(s.x(0) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(s.x(1) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(s.lambda(0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(kkt_check(sc.game, s.x, s.lambda, 1e-8).pass);
}

TEST_CASE("oracle recovers analytic equilibria") {
  for (GameMode mode : {GameMode::network, GameMode::aggregative}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      QuadraticParams qp;
      qp.mode = mode;
      qp.constraints = 2;
      const Scenario sc = analytic_quadratic(qp, seed);
      const VgneSolution s = solve_vgne(sc.game);
      CHECK((s.x - *sc.x_star).cwiseAbs().maxCoeff() < 1e-7);
      CHECK((s.lambda - *sc.lambda_star).cwiseAbs().maxCoeff() < 1e-6);
      CHECK(kkt_check(sc.game, *sc.x_star, *sc.lambda_star, 1e-10).pass);
    }
  }
}

TEST_CASE("KKT check rejects wrong multipliers and infeasible points") {
  const Scenario sc = two_agent_budget();
  const Eigen::Vector2d x(0.5, 0.5);
  const KktReport good = kkt_check(sc.game, x, Eigen::VectorXd::Constant(1, 1.0), 1e-10);
  CHECK(good.pass);
  const KktReport bad_lambda = kkt_check(sc.game, x, Eigen::VectorXd::Constant(1, 0.2), 1e-6);
  CHECK_FALSE(bad_lambda.pass);
  CHECK(bad_lambda.stationarity > 0.1);
  const KktReport negative = kkt_check(sc.game, x, Eigen::VectorXd::Constant(1, -1.0), 1e-6);
  CHECK_FALSE(negative.pass);
  CHECK(negative.dual_feasibility == doctest::Approx(1.0));
  const KktReport infeasible = kkt_check(sc.game, Eigen::Vector2d(1.0, 1.0), Eigen::VectorXd::Zero(1), 1e-6);
  CHECK_FALSE(infeasible.pass);
  CHECK(infeasible.primal_feasibility == doctest::Approx(1.0));
}

TEST_CASE("oracle on the desk scenarios") {
  const Scenario cournot = nash_cournot({5, 3, 1.0, 1.0}, 0);
  const VgneSolution a = solve_vgne(cournot.game);
  CHECK(kkt_check(cournot.game, a.x, a.lambda, 1e-8).pass);
  const Scenario ev = ev_charging({4, 6, 1.0, 1.0}, 0);
  const VgneSolution b = solve_vgne(ev.game);
  CHECK(kkt_check(ev.game, b.x, b.lambda, 1e-8).pass);
  // total load stays within the slot capacities
  const Eigen::VectorXd load = ev.game.coupling_matrix() * b.x;
  CHECK((load - ev.game.rhs()).maxCoeff() <= 1e-8);
}
