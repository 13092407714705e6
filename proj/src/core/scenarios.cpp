#include "core/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "core/errors.hpp"

namespace sgne {

namespace {

Rng scenario_stream(std::uint64_t seed) { return Rng(stream_key(seed, 0, 0, StreamTag::scenario)); }

double sym_min_eig(const MatrixXd& j) {
  const MatrixXd sym = 0.5 * (j + j.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

double spectral_norm(const MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  return m.jacobiSvd().singularValues()(0);
}

std::vector<int> offsets_of(const std::vector<int>& dims) {
  std::vector<int> off(dims.size() + 1, 0);
  for (std::size_t i = 0; i < dims.size(); ++i) off[i + 1] = off[i] + dims[i];
  return off;
}

// ---------------------------------------------------------------------------

class CournotSampler final : public GradientSampler {
 public:
  CournotSampler(std::vector<std::vector<int>> markets, std::vector<VectorXd> linear, VectorXd slope,
                 int market_count, double cost_mean, double price_mean, double cost_var,
                 double price_var)
      : markets_(std::move(markets)),
        linear_(std::move(linear)),
        slope_(std::move(slope)),
        market_count_(market_count),
        cost_mean_(cost_mean),
        price_mean_(price_mean),
        cost_sd_(std::sqrt(cost_var)),
        price_sd_(std::sqrt(price_var)) {
    std::vector<int> dims;
    for (const auto& mk : markets_) dims.push_back(static_cast<int>(mk.size()));
    offsets_ = offsets_of(dims);
  }

  void exact_grad(int i, const ConstVecRef& own, const ConstVecRef& ctx, VecRef out) const override {
    evaluate(i, own, ctx, VectorXd::Constant(own.size(), cost_mean_),
             VectorXd::Constant(own.size(), price_mean_), out);
  }

  void sample_grad(int i, const ConstVecRef& own, const ConstVecRef& ctx, Rng& rng,
                   VecRef out) const override {
    draw(i, own, ctx, 1, rng, out);
  }

  bool supports_aggregate_sampling() const override { return true; }
  void sample_mean_grad(int i, const ConstVecRef& own, const ConstVecRef& ctx, long batch, Rng& rng,
                        VecRef out) const override {
    draw(i, own, ctx, batch, rng, out);
  }

  bool deterministic() const override { return cost_sd_ == 0.0 && price_sd_ == 0.0; }

 private:
  // Draws the batch mean of the random coefficients; for batch = 1 this is a
  // single realization.
  void draw(int i, const ConstVecRef& own, const ConstVecRef& ctx, long batch, Rng& rng,
            VecRef out) const {
    const double scale = 1.0 / std::sqrt(static_cast<double>(batch));
    std::normal_distribution<double> cost(cost_mean_, cost_sd_ * scale);
    std::normal_distribution<double> price(price_mean_, price_sd_ * scale);
    const Eigen::Index n = own.size();
    VectorXd q(n), p(n);
    for (Eigen::Index k = 0; k < n; ++k) q(k) = cost_sd_ > 0 ? cost(rng) : cost_mean_;
    for (Eigen::Index k = 0; k < n; ++k) p(k) = price_sd_ > 0 ? price(rng) : price_mean_;
    evaluate(i, own, ctx, q, p, out);
  }

  // 2 Q x_i + q_i − A_iᵀ p + A_iᵀ χ∘(A x) + A_iᵀ χ∘(A_i x_i)
  void evaluate(int i, const ConstVecRef& own, const ConstVecRef& ctx, const VectorXd& cost_diag,
                const VectorXd& price, VecRef out) const {
    VectorXd load = VectorXd::Zero(market_count_);
    for (std::size_t j = 0; j < markets_.size(); ++j) {
      if (static_cast<int>(j) == i) continue;
      for (std::size_t k = 0; k < markets_[j].size(); ++k)
        load(markets_[j][k]) += ctx(offsets_[j] + static_cast<int>(k));
    }
    const auto& mk = markets_[i];
    for (std::size_t k = 0; k < mk.size(); ++k) load(mk[k]) += own(static_cast<Eigen::Index>(k));
    for (std::size_t k = 0; k < mk.size(); ++k) {
      const Eigen::Index kk = static_cast<Eigen::Index>(k);
      const double chi = slope_(mk[k]);
      out(kk) = 2.0 * cost_diag(kk) * own(kk) + linear_[i](kk) - price(kk) + chi * load(mk[k]) +
                chi * own(kk);
    }
  }

  std::vector<std::vector<int>> markets_;
  std::vector<VectorXd> linear_;
  VectorXd slope_;
  int market_count_;
  double cost_mean_, price_mean_, cost_sd_, price_sd_;
  std::vector<int> offsets_;
};

// ---------------------------------------------------------------------------

class ChargingSampler final : public GradientSampler {
 public:
  ChargingSampler(int agents, VectorXd slope, double cost_mean, double price_mean, double cost_var,
                  double price_var)
      : agents_(agents),
        slope_(std::move(slope)),
        cost_mean_(cost_mean),
        price_mean_(price_mean),
        cost_sd_(std::sqrt(cost_var)),
        price_sd_(std::sqrt(price_var)) {}

  // c − p + χ∘u + (1/N) χ∘x_i
  void exact_grad(int, const ConstVecRef& own, const ConstVecRef& u, VecRef out) const override {
    out = (cost_mean_ - price_mean_) * VectorXd::Ones(own.size()) +
          slope_.cwiseProduct(u + own / agents_);
  }
  void sample_grad(int i, const ConstVecRef& own, const ConstVecRef& u, Rng& rng,
                   VecRef out) const override {
    draw(i, own, u, 1, rng, out);
  }
  bool supports_aggregate_sampling() const override { return true; }
  void sample_mean_grad(int i, const ConstVecRef& own, const ConstVecRef& u, long batch, Rng& rng,
                        VecRef out) const override {
    draw(i, own, u, batch, rng, out);
  }
  bool deterministic() const override { return cost_sd_ == 0.0 && price_sd_ == 0.0; }

 private:
  void draw(int, const ConstVecRef& own, const ConstVecRef& u, long batch, Rng& rng,
            VecRef out) const {
    const double scale = 1.0 / std::sqrt(static_cast<double>(batch));
    std::normal_distribution<double> cost(cost_mean_, cost_sd_ * scale);
    std::normal_distribution<double> price(price_mean_, price_sd_ * scale);
    const Eigen::Index n = own.size();
    VectorXd c(n), p(n);
    for (Eigen::Index k = 0; k < n; ++k) c(k) = cost_sd_ > 0 ? cost(rng) : cost_mean_;
    for (Eigen::Index k = 0; k < n; ++k) p(k) = price_sd_ > 0 ? price(rng) : price_mean_;
    out = c - p + slope_.cwiseProduct(u + own / agents_);
  }

  int agents_;
  VectorXd slope_;
  double cost_mean_, price_mean_, cost_sd_, price_sd_;
};

// ---------------------------------------------------------------------------

// F_i = (a_i + κ/N) x_i + κ·avg − r_i; avg comes from the estimate (network)
// or is the aggregate estimate itself (aggregative).
class QuadraticSampler final : public GradientSampler {
 public:
  QuadraticSampler(GameMode mode, VectorXd curvature, double kappa, std::vector<VectorXd> target,
                   double sigma)
      : mode_(mode),
        curvature_(std::move(curvature)),
        kappa_(kappa),
        target_(std::move(target)),
        sigma_(sigma) {}

  void exact_grad(int i, const ConstVecRef& own, const ConstVecRef& ctx, VecRef out) const override {
    const int agents = static_cast<int>(curvature_.size());
    const Eigen::Index d = own.size();
    VectorXd avg(d);
    if (mode_ == GameMode::aggregative) {
      avg = ctx;
    } else {
      avg.setZero();
      for (int j = 0; j < agents; ++j)
        avg += j == i ? VectorXd(own) : VectorXd(ctx.segment(static_cast<Eigen::Index>(j) * d, d));
      avg /= agents;
    }
    out = (curvature_(i) + kappa_ / agents) * own + kappa_ * avg - target_[i];
  }
  void sample_grad(int i, const ConstVecRef& own, const ConstVecRef& ctx, Rng& rng,
                   VecRef out) const override {
    draw(i, own, ctx, 1, rng, out);
  }
  bool supports_aggregate_sampling() const override { return true; }
  void sample_mean_grad(int i, const ConstVecRef& own, const ConstVecRef& ctx, long batch, Rng& rng,
                        VecRef out) const override {
    draw(i, own, ctx, batch, rng, out);
  }
  bool deterministic() const override { return sigma_ == 0.0; }

 private:
  void draw(int i, const ConstVecRef& own, const ConstVecRef& ctx, long batch, Rng& rng,
            VecRef out) const {
    exact_grad(i, own, ctx, out);
    if (sigma_ == 0.0) return;
    std::normal_distribution<double> noise(0.0, sigma_ / std::sqrt(static_cast<double>(batch)));
    for (Eigen::Index k = 0; k < out.size(); ++k) out(k) += noise(rng);
  }

  GameMode mode_;
  VectorXd curvature_;
  double kappa_;
  std::vector<VectorXd> target_;
  double sigma_;
};

}  // namespace

GameConstants constants_from_jacobian(const MatrixXd& j, const std::vector<int>& offsets) {
  GameConstants c;
  c.eta = sym_min_eig(j);
  c.lip_F = spectral_norm(j);
  double lp = 0.0;
  for (std::size_t i = 0; i + 1 < offsets.size(); ++i)
    lp = std::max(lp, spectral_norm(j.middleRows(offsets[i], offsets[i + 1] - offsets[i])));
  c.lip_p = lp;
  return c;
}

std::vector<std::vector<int>> cournot_markets(const NashCournotParams& p, std::uint64_t seed) {
  if (p.agents < 2) throw DimensionError("nash_cournot needs at least two companies");
  if (p.markets < 1) throw DimensionError("nash_cournot needs at least one market");
  Rng rng = scenario_stream(seed);
  const int served = (p.markets + 1) / 2;
  std::vector<std::vector<int>> out;
  std::vector<int> all(p.markets);
  std::iota(all.begin(), all.end(), 0);
  for (int i = 0; i < p.agents; ++i) {
    std::vector<int> pick = all;
    // Partial Fisher-Yates with explicit draws so the pattern is portable.
    for (int k = 0; k < served; ++k) {
      const std::uint64_t span = static_cast<std::uint64_t>(p.markets - k);
      const int j = k + static_cast<int>(rng() % span);
      std::swap(pick[k], pick[j]);
    }
    pick.resize(served);
    std::sort(pick.begin(), pick.end());
    out.push_back(pick);
  }
  return out;
}

Scenario nash_cournot(const NashCournotParams& p, std::uint64_t seed) {
  if (p.cost_variance < 0 || p.price_variance < 0)
    throw DimensionError("variances must be nonnegative");
  const auto markets = cournot_markets(p, seed);
  Rng rng(stream_key(seed, 1, 0, StreamTag::scenario));
  std::uniform_real_distribution<double> lin(1.0, 2.0), slope(1.0, 3.0), cap(5.0, 10.0),
      capacity(1.0, 2.0);

  const double cost_mean = 4.5;
  const double price_mean = 15.0;
  std::vector<VectorXd> linear;
  std::vector<Box> boxes;
  std::vector<MatrixXd> coupling;
  std::vector<int> dims;
  VectorXd chi(p.markets);
  for (int j = 0; j < p.markets; ++j) chi(j) = slope(rng);
  VectorXd b(p.markets);
  for (int j = 0; j < p.markets; ++j) b(j) = capacity(rng);
  for (int i = 0; i < p.agents; ++i) {
    const int ni = static_cast<int>(markets[i].size());
    VectorXd q(ni);
    for (int k = 0; k < ni; ++k) q(k) = lin(rng);
    linear.push_back(q);
    const double upper = cap(rng);
    boxes.push_back({VectorXd::Zero(ni), VectorXd::Constant(ni, upper)});
    MatrixXd a = MatrixXd::Zero(p.markets, ni);
    for (int k = 0; k < ni; ++k) a(markets[i][k], k) = 1.0;
    coupling.push_back(a);
    dims.push_back(ni);
  }

  // Jacobian of the expected pseudogradient.
  const std::vector<int> off = offsets_of(dims);
  MatrixXd jac = MatrixXd::Zero(off.back(), off.back());
  const MatrixXd chi_diag = chi.asDiagonal();
  for (int i = 0; i < p.agents; ++i) {
    jac.block(off[i], off[i], dims[i], dims[i]) +=
        2.0 * cost_mean * MatrixXd::Identity(dims[i], dims[i]) +
        coupling[i].transpose() * chi_diag * coupling[i];
    for (int j = 0; j < p.agents; ++j)
      jac.block(off[i], off[j], dims[i], dims[j]) += coupling[i].transpose() * chi_diag * coupling[j];
  }
  GameConstants gc = constants_from_jacobian(jac, off);
  if (!(gc.eta > 0.0)) throw Error("generated Cournot game is not strongly monotone");

  auto sampler = std::make_shared<CournotSampler>(markets, linear, chi, p.markets, cost_mean,
                                                  price_mean, p.cost_variance, p.price_variance);
  GameModel game(GameMode::network, boxes, coupling, b, sampler, gc);

  // Small uniform production is strictly feasible.
  int max_share = 1;
  std::vector<int> share(p.markets, 0);
  for (const auto& mk : markets)
    for (int j : mk) max_share = std::max(max_share, ++share[j]);
  double upper_min = boxes[0].hi(0);
  for (const Box& bx : boxes) upper_min = std::min(upper_min, bx.hi(0));
  const double level = std::min(0.5 * b.minCoeff() / max_share, 0.5 * upper_min);
  game.set_slater_witness(VectorXd::Constant(game.total_dim(), level));
  return Scenario{"nash_cournot", std::move(game), std::nullopt, std::nullopt};
}

std::vector<int> ev_night_slots(int slots) {
  std::vector<int> night;
  const int head = (slots + 3) / 4;
  const int tail = (slots + 5) / 6;
  for (int j = 0; j < slots; ++j)
    if (j < head || j >= slots - tail) night.push_back(j);
  return night;
}

Scenario ev_charging(const EvChargingParams& p, std::uint64_t seed) {
  if (p.agents < 2) throw DimensionError("ev_charging needs at least two users");
  if (p.slots < 2) throw DimensionError("ev_charging needs at least two time slots");
  if (p.cost_variance < 0 || p.price_variance < 0)
    throw DimensionError("variances must be nonnegative");
  Rng rng = scenario_stream(seed);
  std::uniform_real_distribution<double> slope(1.0, 2.0);
  std::bernoulli_distribution available(0.5);
  const int n = p.slots;
  VectorXd chi(n);
  for (int j = 0; j < n; ++j) chi(j) = slope(rng);
  std::vector<Box> boxes;
  std::vector<MatrixXd> coupling;
  MatrixXd a(2 * n, n);
  a << MatrixXd::Identity(n, n), -MatrixXd::Identity(n, n);
  for (int i = 0; i < p.agents; ++i) {
    VectorXd hi(n);
    for (int j = 0; j < n; ++j) hi(j) = available(rng) ? 0.25 : 0.0;
    boxes.push_back({VectorXd::Zero(n), hi});
    coupling.push_back(a);
  }
  VectorXd b = VectorXd::Zero(2 * n);
  b.head(n).setOnes();
  for (int j : ev_night_slots(n)) b(j) = 0.4;

  GameConstants gc;
  gc.eta = chi.minCoeff() / p.agents;
  gc.lip_F = chi.maxCoeff() * (p.agents + 1.0) / p.agents;
  gc.lip_p = gc.lip_F;
  gc.lip_ax = chi.maxCoeff() / p.agents;
  gc.lip_au = chi.maxCoeff();

  auto sampler = std::make_shared<ChargingSampler>(p.agents, chi, 4.0, 4.5, p.cost_variance,
                                                   p.price_variance);
  GameModel game(GameMode::aggregative, boxes, coupling, b, sampler, gc);
  VectorXd witness(game.total_dim());
  for (int i = 0; i < p.agents; ++i) witness.segment(game.offset(i), n) = 0.5 * boxes[i].hi;
  game.set_slater_witness(witness);
  return Scenario{"ev_charging", std::move(game), std::nullopt, std::nullopt};
}

Scenario analytic_quadratic(const QuadraticParams& p, std::uint64_t seed) {
  if (p.agents < 1 || p.dim < 1 || p.constraints < 0)
    throw DimensionError("analytic_quadratic: invalid dimensions");
  if (p.coupling_strength < 0 || p.noise_sigma < 0)
    throw DimensionError("analytic_quadratic: parameters must be nonnegative");
  Rng rng = scenario_stream(seed);
  std::uniform_real_distribution<double> curv(1.0, 2.0), centre(-1.0, 1.0), half(0.5, 1.5),
      mult(0.5, 1.5), slack(0.5, 1.0), entry(0.5, 1.5);
  const int agents = p.agents;
  const int d = p.dim;
  const int m = p.constraints;
  const double kappa = p.coupling_strength;

  VectorXd a(agents);
  for (int i = 0; i < agents; ++i) a(i) = curv(rng);
  VectorXd x_star(agents * d);
  for (int k = 0; k < x_star.size(); ++k) x_star(k) = centre(rng);
  std::vector<Box> boxes;
  for (int i = 0; i < agents; ++i) {
    Box b{VectorXd(d), VectorXd(d)};
    for (int k = 0; k < d; ++k) {
      b.lo(k) = x_star(i * d + k) - half(rng);
      b.hi(k) = x_star(i * d + k) + half(rng);
    }
    boxes.push_back(b);
  }
  std::vector<MatrixXd> coupling;
  for (int i = 0; i < agents; ++i) {
    MatrixXd ai(m, d);
    for (int r = 0; r < m; ++r)
      for (int k = 0; k < d; ++k) ai(r, k) = m == 1 ? 1.0 : entry(rng);
    coupling.push_back(ai);
  }
  VectorXd lambda_star(m);
  for (int r = 0; r < m; ++r) lambda_star(r) = p.active ? mult(rng) : 0.0;
  VectorXd ax = VectorXd::Zero(m);
  for (int i = 0; i < agents; ++i) ax += coupling[i] * x_star.segment(i * d, d);
  VectorXd b = ax;
  if (!p.active)
    for (int r = 0; r < m; ++r) b(r) += slack(rng);

  VectorXd avg = VectorXd::Zero(d);
  for (int i = 0; i < agents; ++i) avg += x_star.segment(i * d, d);
  avg /= agents;
  std::vector<VectorXd> target;
  for (int i = 0; i < agents; ++i)
    target.push_back((a(i) + kappa / agents) * x_star.segment(i * d, d) + kappa * avg +
                     coupling[i].transpose() * lambda_star);

  MatrixXd jac = MatrixXd::Zero(agents * d, agents * d);
  for (int i = 0; i < agents; ++i)
    for (int j = 0; j < agents; ++j)
      jac.block(i * d, j * d, d, d) =
          ((i == j ? a(i) + kappa / agents : 0.0) + kappa / agents) * MatrixXd::Identity(d, d);
  std::vector<int> off(agents + 1);
  for (int i = 0; i <= agents; ++i) off[i] = i * d;
  GameConstants gc = constants_from_jacobian(jac, off);
  gc.lip_ax = a.maxCoeff() + kappa / agents;
  gc.lip_au = kappa;

  auto sampler = std::make_shared<QuadraticSampler>(p.mode, a, kappa, target, p.noise_sigma);
  GameModel game(p.mode, boxes, coupling, b, sampler, gc);
  return Scenario{"analytic_quadratic", std::move(game), x_star, lambda_star};
}

Scenario two_agent_budget(GameMode mode, double noise_sigma) {
  const VectorXd a = VectorXd::Constant(2, 2.0);
  std::vector<VectorXd> target(2, VectorXd::Constant(1, 2.0));
  std::vector<Box> boxes(2, Box{VectorXd::Zero(1), VectorXd::Ones(1)});
  std::vector<MatrixXd> coupling(2, MatrixXd::Ones(1, 1));
  MatrixXd jac = 2.0 * MatrixXd::Identity(2, 2);
  GameConstants gc = constants_from_jacobian(jac, {0, 1, 2});
  gc.lip_ax = 2.0;
  gc.lip_au = 0.0;
  auto sampler = std::make_shared<QuadraticSampler>(mode, a, 0.0, target, noise_sigma);
  GameModel game(mode, boxes, coupling, VectorXd::Ones(1), sampler, gc);
  game.set_slater_witness(VectorXd::Constant(2, 0.25));
  return Scenario{"two_agent_budget", std::move(game), VectorXd::Constant(2, 0.5),
                  VectorXd::Ones(1)};
}

}  // namespace sgne
