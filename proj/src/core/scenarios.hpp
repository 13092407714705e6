#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "core/game.hpp"

namespace sgne {

struct Scenario {
  std::string name;
  GameModel game;
  std::optional<VectorXd> x_star;  // analytic solution, when known
  std::optional<VectorXd> lambda_star;
};

struct NashCournotParams {
  int agents = 5;
  int markets = 3;
  double cost_variance = 1.0;   // variance of the diagonal cost entries
  double price_variance = 1.0;  // variance of the price intercepts
};

struct EvChargingParams {
  int agents = 4;
  int slots = 6;
  double cost_variance = 1.0;
  double price_variance = 1.0;
};

struct QuadraticParams {
  int agents = 3;
  int dim = 2;
  int constraints = 1;
  double coupling_strength = 0.5;  // weight of the average in each cost
  double noise_sigma = 0.0;        // additive Gaussian gradient noise
  bool active = true;              // budget binding at the solution
  GameMode mode = GameMode::network;
};

/// Companies selling into markets with capacity limits; each company serves a
/// seeded random subset of ceil(m/2) markets.
Scenario nash_cournot(const NashCournotParams& params, std::uint64_t seed);
/// Market indices served by each company (same draw as nash_cournot).
std::vector<std::vector<int>> cournot_markets(const NashCournotParams& params, std::uint64_t seed);

/// Electric-vehicle charging over `slots` periods with a grid capacity that is
/// tighter at night. Aggregative mode.
Scenario ev_charging(const EvChargingParams& params, std::uint64_t seed);
/// Night slots: first ceil(n/4) and last ceil(n/6).
std::vector<int> ev_night_slots(int slots);

/// Strongly monotone quadratic game with a known v-GNE built by inverting its
/// KKT system.
Scenario analytic_quadratic(const QuadraticParams& params, std::uint64_t seed);
/// f_i = (x_i − 1)², x_1 + x_2 ≤ 1, x_i ∈ [0, 1]: solution (0.5, 0.5), λ = 1.
Scenario two_agent_budget(GameMode mode = GameMode::network, double noise_sigma = 0.0);

/// η, ℓ_F and ℓ_p from the (constant) Jacobian of an affine pseudogradient.
GameConstants constants_from_jacobian(const MatrixXd& jacobian, const std::vector<int>& offsets);

}  // namespace sgne
