#include "core/game.hpp"

#include <cmath>

#include "core/errors.hpp"

namespace sgne {

bool Box::contains(const ConstVecRef& x, double tol) const {
  if (x.size() != lo.size()) return false;
  return ((x.array() >= lo.array() - tol) && (x.array() <= hi.array() + tol)).all();
}

void Box::clamp(VecRef x) const { x = x.cwiseMax(lo).cwiseMin(hi); }

void GradientSampler::sample_mean_grad(int agent, const ConstVecRef& own,
                                       const ConstVecRef& context, long batch, Rng& rng,
                                       VecRef out) const {
  VectorXd draw(out.size());
  out.setZero();
  for (long t = 0; t < batch; ++t) {
    sample_grad(agent, own, context, rng, draw);
    out += draw;
  }
  out /= static_cast<double>(batch);
}

GameModel::GameModel(GameMode mode, std::vector<Box> boxes, std::vector<MatrixXd> coupling,
                     VectorXd rhs, std::shared_ptr<const GradientSampler> sampler,
                     GameConstants constants)
    : mode_(mode),
      boxes_(std::move(boxes)),
      coupling_(std::move(coupling)),
      rhs_(std::move(rhs)),
      sampler_(std::move(sampler)),
      constants_(constants) {
  if (boxes_.empty()) throw DimensionError("game needs at least one agent");
  if (!sampler_) throw DimensionError("game needs a gradient sampler");
  if (coupling_.size() != boxes_.size())
    throw DimensionError("one coupling block per agent required");
  offsets_.assign(1, 0);
  for (std::size_t i = 0; i < boxes_.size(); ++i) {
    const Box& b = boxes_[i];
    if (b.lo.size() == 0 || b.lo.size() != b.hi.size())
      throw DimensionError("box of agent " + std::to_string(i) + " has inconsistent size");
    if (!b.lo.allFinite() || !b.hi.allFinite())
      throw DimensionError("box of agent " + std::to_string(i) + " must be bounded");
    if ((b.lo.array() > b.hi.array()).any())
      throw DimensionError("box of agent " + std::to_string(i) + " is empty");
    if (coupling_[i].rows() != rhs_.size() || coupling_[i].cols() != b.lo.size())
      throw DimensionError("coupling block of agent " + std::to_string(i) +
                           " must be m x n_i");
    if (mode_ == GameMode::aggregative && b.lo.size() != boxes_[0].lo.size())
      throw DimensionError("aggregative games need equal agent dimensions");
    offsets_.push_back(offsets_.back() + static_cast<int>(b.lo.size()));
  }
}

MatrixXd GameModel::coupling_matrix() const {
  MatrixXd a(constraints(), total_dim());
  for (int i = 0; i < agents(); ++i) a.middleCols(offset(i), dim(i)) = coupling_[i];
  return a;
}

VectorXd GameModel::average(const VectorXd& x) const {
  const int n = common_dim();
  VectorXd avg = VectorXd::Zero(n);
  for (int i = 0; i < agents(); ++i) avg += x.segment(offset(i), n);
  return avg / agents();
}

VectorXd GameModel::pseudogradient(const VectorXd& x) const {
  if (x.size() != total_dim()) throw DimensionError("pseudogradient: wrong decision size");
  VectorXd out(total_dim());
  const VectorXd context = mode_ == GameMode::aggregative ? average(x) : x;
  for (int i = 0; i < agents(); ++i)
    sampler_->exact_grad(i, x.segment(offset(i), dim(i)), context,
                         out.segment(offset(i), dim(i)));
  return out;
}

VectorXd GameModel::project(const VectorXd& x) const {
  VectorXd out = x;
  for (int i = 0; i < agents(); ++i) boxes_[i].clamp(out.segment(offset(i), dim(i)));
  return out;
}

bool GameModel::feasible_boxes(const VectorXd& x, double tol) const {
  for (int i = 0; i < agents(); ++i)
    if (!boxes_[i].contains(x.segment(offset(i), dim(i)), tol)) return false;
  return true;
}

long batch_size(const BatchSchedule& s, long k) {
  const double raw = s.scale * std::pow(static_cast<double>(k) + s.offset, s.exponent + 1.0);
  const double m = std::ceil(raw - 1e-12 * std::max(1.0, raw));
  return m < 1.0 ? 1L : static_cast<long>(m);
}

void validate_schedule(const BatchSchedule& s) {
  if (!(s.scale > 0.0)) throw ConfigError("batch.c_b", "must be positive");
  if (!(s.offset >= 0.0)) throw ConfigError("batch.k0", "must be nonnegative");
  if (!(s.exponent > 0.0)) throw ConfigError("batch.a", "must be positive");
}

void sa_pseudogradient(const GameModel& game, int agent, const ConstVecRef& own,
                       const ConstVecRef& context, long batch, Rng& rng, VecRef out,
                       BatchSampling sampling) {
  const GradientSampler& s = game.sampler();
  if (batch < 1) batch = 1;
  if (s.deterministic()) {
    s.exact_grad(agent, own, context, out);
  } else if (batch == 1) {
    s.sample_grad(agent, own, context, rng, out);
  } else if (sampling == BatchSampling::aggregate && s.supports_aggregate_sampling()) {
    s.sample_mean_grad(agent, own, context, batch, rng, out);
  } else {
    s.GradientSampler::sample_mean_grad(agent, own, context, batch, rng, out);
  }
}

VectorXd prox_box(const Box& box, const VectorXd& y) {
  if (y.size() != box.lo.size()) throw DimensionError("prox_box: size mismatch");
  VectorXd out = y;
  box.clamp(out);
  return out;
}

VectorXd project_nonneg(const VectorXd& y) { return y.cwiseMax(0.0); }

double constraint_violation(const GameModel& game, const VectorXd& x) {
  if (x.size() != game.total_dim()) throw DimensionError("constraint_violation: wrong size");
  if (game.constraints() == 0) return 0.0;
  const VectorXd excess = game.coupling_matrix() * x - game.rhs();
  return std::max(0.0, excess.maxCoeff());
}

SlaterReport check_slater(const GameModel& game, const VectorXd& witness) {
  if (witness.size() != game.total_dim()) throw DimensionError("slater witness: wrong size");
  SlaterReport r;
  r.min_slack = game.constraints() > 0
                    ? (game.rhs() - game.coupling_matrix() * witness).minCoeff()
                    : INFINITY;
  double margin = INFINITY;
  for (int i = 0; i < game.agents(); ++i) {
    const auto xi = witness.segment(game.offset(i), game.dim(i));
    const Box& b = game.box(i);
    for (int j = 0; j < b.size(); ++j) {
      if (b.hi(j) == b.lo(j)) continue;  // degenerate coordinate has no interior
      margin = std::min({margin, xi(j) - b.lo(j), b.hi(j) - xi(j)});
    }
  }
  r.min_box_margin = margin;
  r.holds = r.min_slack > 0.0 && r.min_box_margin > 0.0;
  return r;
}

}  // namespace sgne
