#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cstdint>
#include <string>
#include <vector>

#include "core/game.hpp"
#include "core/graph.hpp"
#include "core/state.hpp"
#include "core/variant.hpp"

namespace sgne {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// R picks x_i out of x̂_i for every agent; S keeps the other blocks.
struct SelectionMatrices {
  SparseMatrix R;  // n x (N n)
  SparseMatrix S;  // (N n - n) x (N n)

  static SelectionMatrices make(const GameModel& game);
};

struct StepSizeBounds {
  VectorXd alpha;
  VectorXd nu;
  VectorXd delta;
};

struct StepSizeProfile {
  VectorXd alpha;  // per agent
  VectorXd nu;     // per agent (uniform for edge variants)
  VectorXd delta;  // per agent
  double gamma = 0.0;  // tracking gain, aggregative variants only
  double c = 1.0;      // consensus gain
  double tau = 0.1;
  double safety = 0.5;

  StepSizeProfile scaled(double factor) const;
};

/// Per-agent ceilings from the Gershgorin argument on the preconditioner.
StepSizeBounds step_size_bounds(Variant variant, const Graph& graph, const GameModel& game,
                                double tau);

/// safety x bounds; uniform ν for edge variants, γ = safety / (τ + 2 d_max).
StepSizeProfile default_profile(Variant variant, const Graph& graph, const GameModel& game,
                                double tau, double safety, double c);

struct BoundViolation {
  std::string step;  // "alpha", "nu", "delta"
  int agent = 0;
  double value = 0.0;
  double bound = 0.0;
};
std::vector<BoundViolation> bound_violations(const StepSizeProfile& profile,
                                             const StepSizeBounds& bounds);
/// Shape and sign checks; throws ConfigError.
void validate_profile(Variant variant, const StepSizeProfile& profile, int agents);

class Preconditioner {
 public:
  Preconditioner(Variant variant, SparseMatrix matrix);

  Variant variant() const { return variant_; }
  const SparseMatrix& matrix() const { return matrix_; }
  const VectorXd& diagonal() const { return diagonal_; }
  double min_eigenvalue() const;
  bool positive_definite() const;
  /// 1 / λ_min
  double inverse_norm() const;
  VectorXd solve(const VectorXd& rhs) const;
  double norm(const VectorXd& v) const;

 private:
  Variant variant_;
  SparseMatrix matrix_;
  VectorXd diagonal_;
};

struct ForwardSampling {
  bool exact = true;
  std::uint64_t seed = 0;
  BatchSchedule schedule{};
  BatchSampling sampling = BatchSampling::loop;
};

/// Matrix form of the extended operators for one variant. Edge variants use
/// the per-edge auxiliary variable v.
class ExtendedOperator {
 public:
  ExtendedOperator(Variant variant, const GameModel& game, const Graph& graph, double c);

  Variant variant() const { return variant_; }
  AuxForm aux_form() const { return form_; }
  const StateLayout& layout() const { return layout_; }
  double consensus_gain() const { return c_; }

  /// Primal Laplacian L ⊗ I acting on the primal (or aggregate) block.
  const SparseMatrix& primal_laplacian() const { return primal_laplacian_; }
  /// Maps the primal block to col(A_i x_i).
  const SparseMatrix& dual_coupling() const { return dual_coupling_; }
  /// L ⊗ I_m (node) or V ⊗ I_m (edge).
  const SparseMatrix& aux_coupling() const { return aux_coupling_; }
  /// Skew-symmetric part of the backward operator.
  SparseMatrix skew_matrix() const;

  Preconditioner assemble(const StepSizeProfile& profile) const;

  void forward(const VectorXd& w, const ForwardSampling& sampling, long k, VectorXd& out) const;
  VectorXd forward(const VectorXd& w, const ForwardSampling& sampling = {}, long k = 1) const;

  /// Solves Φ w' + B(w') ∋ rhs by the closed-form sweep.
  VectorXd backward_rhs(const Preconditioner& phi, const VectorXd& rhs) const;
  /// (Id + Φ⁻¹B)⁻¹(y)
  VectorXd backward(const Preconditioner& phi, const VectorXd& y) const;
  /// One preconditioned forward-backward iteration.
  VectorXd step(const Preconditioner& phi, const VectorXd& w, const ForwardSampling& sampling,
                long k) const;
  /// ‖w − T(w)‖_Φ with exact gradients.
  double residual(const Preconditioner& phi, const VectorXd& w) const;

  /// Projection onto the domain of B: own primal blocks into the boxes, λ ≥ 0.
  VectorXd project_domain(const VectorXd& w) const;
  void prox_primal(Eigen::Ref<VectorXd> primal) const;

 private:
  Variant variant_;
  AuxForm form_;
  const GameModel& game_;
  const Graph& graph_;
  double c_;
  StateLayout layout_;
  SparseMatrix primal_laplacian_;
  SparseMatrix dual_coupling_;
  SparseMatrix aux_coupling_;
  VectorXd local_rhs_;
};

Preconditioner assemble_preconditioner(Variant variant, const StepSizeProfile& profile,
                                       const Graph& graph, const GameModel& game);

/// A zero of the extended operator built from a v-GNE (x*, λ*), in the
/// matrix-form layout of `op`.
VectorXd equilibrium_state(const ExtendedOperator& op, const GameModel& game, const Graph& graph,
                           const VectorXd& x_star, const VectorXd& lambda_star);

struct TheoryConstants {
  double eta = 0.0, lip_F = 0.0, lip_p = 0.0, lip_ax = 0.0, lip_au = 0.0;
  double lambda2 = 0.0, d_max = 0.0, c = 0.0;
  double c_min = 0.0;  // network variants only, NaN otherwise
  Eigen::Matrix2d upsilon = Eigen::Matrix2d::Zero();
  double mu = 0.0;
  double theta = 0.0;
  double beta = 0.0;
  std::vector<std::string> warnings;
};

TheoryConstants theory_constants(Variant variant, const GameConstants& game,
                                 const SpectralSummary& spectrum, int agents, double c);

/// ‖Φ⁻¹‖ < 2β
struct MetricDiagnostic {
  double inverse_norm = 0.0;
  double two_beta = 0.0;
  bool holds = false;
};
MetricDiagnostic metric_diagnostic(const Preconditioner& phi, const TheoryConstants& theory);

}  // namespace sgne
