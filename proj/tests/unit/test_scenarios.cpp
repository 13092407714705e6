#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "core/oracle.hpp"
#include "core/scenarios.hpp"

using namespace sgne;

namespace {

// Strong monotonicity spot check on random pairs inside the boxes.
double monotonicity_ratio(const GameModel& g, std::uint64_t seed, int pairs = 1000) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit;
  auto draw = [&] {
    Eigen::VectorXd x(g.total_dim());
    for (int i = 0; i < g.agents(); ++i)
      for (int j = 0; j < g.dim(i); ++j) {
        const Box& b = g.box(i);
        x(g.offset(i) + j) = b.lo(j) + unit(rng) * (b.hi(j) - b.lo(j));
      }
    return x;
  };
  double worst = INFINITY;
  for (int t = 0; t < pairs; ++t) {
    const Eigen::VectorXd x = draw(), y = draw();
    const double d2 = (x - y).squaredNorm();
    if (d2 == 0.0) continue;
    worst = std::min(worst, (g.pseudogradient(x) - g.pseudogradient(y)).dot(x - y) / d2);
  }
  return worst;
}

}  // namespace

TEST_CASE("Cournot dimensions and market pattern") {
  const NashCournotParams p{5, 3, 1.0, 1.0};
  const Scenario sc = nash_cournot(p, 0);
  CHECK(sc.game.agents() == 5);
  CHECK(sc.game.constraints() == 3);
  const auto markets = cournot_markets(p, 0);
  REQUIRE(markets.size() == 5);
  for (int i = 0; i < 5; ++i) {
    CHECK(markets[i].size() == 2);  // ceil(3 / 2)
    CHECK(sc.game.dim(i) == 2);
    std::set<int> unique(markets[i].begin(), markets[i].end());
    CHECK(unique.size() == markets[i].size());
    for (int m : markets[i]) {
      CHECK(m >= 0);
      CHECK(m < 3);
    }
  }
  // A is a 0/1 matrix with one nonzero per column
  const Eigen::MatrixXd A = sc.game.coupling_matrix();
  CHECK((A.colwise().sum().array() == 1.0).all());
  CHECK(sc.game.slater_witness().has_value());
}

TEST_CASE("full-size Cournot instance builds") {
  const Scenario sc = nash_cournot({20, 7, 1.0, 1.0}, 0);
  CHECK(sc.game.agents() == 20);
  CHECK(sc.game.constraints() == 7);
  CHECK(sc.game.total_dim() == 20 * 4);
}

TEST_CASE("EV charging dimensions and night slots") {
  const Scenario sc = ev_charging({10, 12, 1.0, 1.0}, 0);
  CHECK(sc.game.agents() == 10);
  CHECK(sc.game.common_dim() == 12);
  CHECK(sc.game.constraints() == 24);
  CHECK(ev_night_slots(12) == std::vector<int>{0, 1, 2, 10, 11});
  CHECK(ev_night_slots(6) == std::vector<int>{0, 1, 5});
  const Scenario desk = ev_charging({4, 6, 1.0, 1.0}, 0);
  for (int s = 0; s < 6; ++s) {
    const bool night = s == 0 || s == 1 || s == 5;
    CHECK(desk.game.rhs()(s) == doctest::Approx(night ? 0.4 : 1.0));
    CHECK(desk.game.rhs()(6 + s) == 0.0);
  }
}

TEST_CASE("EV agents with closed boxes charge nothing at equilibrium") {
  const Scenario sc = ev_charging({4, 6, 1.0, 1.0}, 0);
  const VgneSolution s = solve_vgne(sc.game);
  int closed = 0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 6; ++j)
      if (sc.game.box(i).hi(j) == 0.0) {
        ++closed;
        CHECK(s.x(sc.game.offset(i) + j) == 0.0);
      }
  CHECK(closed > 0);
}

TEST_CASE("same seed, same model; different seed, different model") {
  const Scenario a = nash_cournot({5, 3, 1.0, 1.0}, 4), b = nash_cournot({5, 3, 1.0, 1.0}, 4);
  const Scenario c = nash_cournot({5, 3, 1.0, 1.0}, 5);
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(a.game.total_dim(), 0.3);
  CHECK(a.game.pseudogradient(x) == b.game.pseudogradient(x));
  CHECK(a.game.rhs() == b.game.rhs());
  CHECK(a.game.rhs() != c.game.rhs());
}

TEST_CASE("generated games are strongly monotone on random pairs") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Scenario nc = nash_cournot({5, 3, 1.0, 1.0}, seed);
    CHECK(monotonicity_ratio(nc.game, seed) >= nc.game.constants().eta - 1e-9);
    const Scenario ev = ev_charging({4, 6, 1.0, 1.0}, seed);
    CHECK(monotonicity_ratio(ev.game, seed) >= ev.game.constants().eta - 1e-9);
    QuadraticParams qp;
    const Scenario q = analytic_quadratic(qp, seed);
    CHECK(monotonicity_ratio(q.game, seed) >= q.game.constants().eta - 1e-9);
  }
}

TEST_CASE("analytic quadratic: single agent without constraints") {
  QuadraticParams qp;
  qp.agents = 1;
  qp.dim = 2;
  qp.constraints = 1;
  qp.active = false;
  const Scenario sc = analytic_quadratic(qp, 0);
  REQUIRE(sc.x_star);
  CHECK(sc.lambda_star->cwiseAbs().maxCoeff() == 0.0);
  CHECK(sc.game.pseudogradient(*sc.x_star).norm() < 1e-10);
}

TEST_CASE("analytic quadratic solutions pass the KKT check") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    QuadraticParams qp;
    qp.constraints = 1 + static_cast<int>(seed % 3);
    const Scenario sc = analytic_quadratic(qp, seed);
    CHECK(kkt_check(sc.game, *sc.x_star, *sc.lambda_star, 1e-10).pass);
    if (qp.active) CHECK(sc.lambda_star->maxCoeff() > 0.0);
  }
}

TEST_CASE("two-agent budget instance") {
  const Scenario sc = two_agent_budget();
  CHECK(*sc.x_star == Eigen::Vector2d(0.5, 0.5));
  CHECK((*sc.lambda_star)(0) == 1.0);
  CHECK(kkt_check(sc.game, *sc.x_star, *sc.lambda_star, 1e-12).pass);
}
