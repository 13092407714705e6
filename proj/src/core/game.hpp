#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "core/rng.hpp"

namespace sgne {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using ConstVecRef = Eigen::Ref<const VectorXd>;
using VecRef = Eigen::Ref<VectorXd>;

enum class GameMode { network, aggregative };

struct Box {
  VectorXd lo;
  VectorXd hi;

  int size() const { return static_cast<int>(lo.size()); }
  bool contains(const ConstVecRef& x, double tol = 0.0) const;
  void clamp(VecRef x) const;
};

/// Monotonicity and Lipschitz constants of the expected game.
struct GameConstants {
  double eta = 0.0;       // strong monotonicity of F
  double lip_F = 0.0;     // Lipschitz constant of F
  double lip_p = 0.0;     // Lipschitz constant of the estimate-based pseudogradient
  double lip_ax = 0.0;    // aggregative: Lipschitz in the own action
  double lip_au = 0.0;    // aggregative: Lipschitz in the aggregate estimate
};

/// How a batch of M samples is averaged.
///   loop:      draw M samples and average them.
///   aggregate: draw the batch mean directly from its exact distribution
///              (only for samplers whose noise is Gaussian and affine in the
///              random coefficients; falls back to loop otherwise).
enum class BatchSampling { loop, aggregate };

/// Per-agent gradient oracle.
///
/// `context` is the agent's full stacked estimate in network mode (the own
/// block inside it is ignored and `own` is used instead) and the aggregate
/// estimate u_i in aggregative mode.
class GradientSampler {
 public:
  virtual ~GradientSampler() = default;

  virtual void exact_grad(int agent, const ConstVecRef& own, const ConstVecRef& context,
                          VecRef out) const = 0;
  virtual void sample_grad(int agent, const ConstVecRef& own, const ConstVecRef& context,
                           Rng& rng, VecRef out) const = 0;

  virtual bool supports_aggregate_sampling() const { return false; }
  virtual void sample_mean_grad(int agent, const ConstVecRef& own, const ConstVecRef& context,
                                long batch, Rng& rng, VecRef out) const;

  /// True when sample_grad always equals exact_grad.
  virtual bool deterministic() const { return false; }
};

class GameModel {
 public:
  GameModel(GameMode mode, std::vector<Box> boxes, std::vector<MatrixXd> coupling, VectorXd rhs,
            std::shared_ptr<const GradientSampler> sampler, GameConstants constants);

  GameMode mode() const { return mode_; }
  int agents() const { return static_cast<int>(boxes_.size()); }
  int dim(int agent) const { return boxes_[agent].size(); }
  int offset(int agent) const { return offsets_[agent]; }
  int total_dim() const { return offsets_.back(); }
  /// Common per-agent dimension (aggregative mode).
  int common_dim() const { return dim(0); }
  int constraints() const { return static_cast<int>(rhs_.size()); }

  const Box& box(int agent) const { return boxes_[agent]; }
  const MatrixXd& coupling(int agent) const { return coupling_[agent]; }
  const VectorXd& rhs() const { return rhs_; }
  /// Local share b_i = b / N.
  VectorXd local_rhs() const { return rhs_ / agents(); }
  const GradientSampler& sampler() const { return *sampler_; }
  const GameConstants& constants() const { return constants_; }
  void set_constants(const GameConstants& c) { constants_ = c; }

  const std::optional<VectorXd>& slater_witness() const { return slater_witness_; }
  void set_slater_witness(VectorXd x0) { slater_witness_ = std::move(x0); }

  /// Full coupling matrix A = [A_1 ... A_N].
  MatrixXd coupling_matrix() const;
  /// Centralized expected pseudogradient F(x).
  VectorXd pseudogradient(const VectorXd& x) const;
  /// Projection of a stacked decision vector onto the product of boxes.
  VectorXd project(const VectorXd& x) const;
  bool feasible_boxes(const VectorXd& x, double tol = 0.0) const;

  /// Aggregate value avg(x) (aggregative mode).
  VectorXd average(const VectorXd& x) const;

 private:
  GameMode mode_;
  std::vector<Box> boxes_;
  std::vector<MatrixXd> coupling_;
  VectorXd rhs_;
  std::shared_ptr<const GradientSampler> sampler_;
  GameConstants constants_;
  std::vector<int> offsets_;
  std::optional<VectorXd> slater_witness_;
};

struct BatchSchedule {
  double scale = 1.0;   // c_b
  double offset = 1.0;  // k0
  double exponent = 0.2;
};

/// M_k = max(1, ceil(scale * (k + offset)^(exponent + 1))).
long batch_size(const BatchSchedule& schedule, long k);
void validate_schedule(const BatchSchedule& schedule);

/// Sample average of `batch` gradient draws.
void sa_pseudogradient(const GameModel& game, int agent, const ConstVecRef& own,
                       const ConstVecRef& context, long batch, Rng& rng, VecRef out,
                       BatchSampling sampling = BatchSampling::loop);

VectorXd prox_box(const Box& box, const VectorXd& y);
VectorXd project_nonneg(const VectorXd& y);
/// || max(Ax - b, 0) ||_inf
double constraint_violation(const GameModel& game, const VectorXd& x);

struct SlaterReport {
  bool holds = false;
  double min_slack = 0.0;       // min_j (b - A x0)_j
  double min_box_margin = 0.0;  // distance to the nearest box face
};
SlaterReport check_slater(const GameModel& game, const VectorXd& witness);

}  // namespace sgne
