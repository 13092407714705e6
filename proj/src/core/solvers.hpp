#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "core/consensus_ops.hpp"
#include "core/game.hpp"
#include "core/graph.hpp"
#include "core/state.hpp"

namespace sgne {

struct SolverOptions {
  AuxForm aux_form = AuxForm::node;
  EdgeDualSign edge_dual = EdgeDualSign::derived;
  BatchSchedule schedule{};
  BatchSampling sampling = BatchSampling::aggregate;
  bool exact_gradients = false;
  std::uint64_t seed = 0;
};

struct IterationRecord {
  long iter = 0;
  double dist_to_ref = 0.0;  // NaN without a reference
  double primal_consensus_gap = 0.0;
  double dual_consensus_gap = 0.0;
  double constraint_violation = 0.0;
  double residual = 0.0;  // NaN when not computed
  long batch_size = 1;
  double wallclock_ms = 0.0;
};

struct IterationTrace {
  std::vector<IterationRecord> records;
};

struct RunControls {
  long max_iters = 1000;
  double tol = 1e-8;
  std::optional<VectorXd> reference;
  bool residual = false;
  bool record_wallclock = true;
};

struct RunResult {
  ExtendedState state;
  IterationTrace trace;
  long iterations = 0;
  bool converged = false;
};

struct ConsensusGaps {
  double primal = 0.0;
  double dual = 0.0;
};

/// Largest pairwise distance between agents' estimates (x̂_i, or u_i = x_i + s_i
/// for aggregative variants) and between their multipliers.
ConsensusGaps consensus_gaps(const ExtendedState& state);

/// Seeded start: x_i⁰ uniform in Ω_i, x̂_{i,j}⁰ = x_j⁰, all other blocks zero.
ExtendedState init_state(Variant variant, AuxForm form, const GameModel& game, const Graph& graph,
                         std::uint64_t seed);
/// Explicit start; rejects λ < 0 or primal points outside the boxes.
ExtendedState init_state(Variant variant, AuxForm form, const GameModel& game, const Graph& graph,
                         const VectorXd& stacked);

/// Re-expresses a state in the matrix-form layout (edge variants: per-edge v).
VectorXd to_operator_layout(const ExtendedState& state, const Graph& graph);

/// Message buffers shared during one communication round. Every read is
/// checked against the graph; reads from non-neighbors are counted.
class Exchange {
 public:
  explicit Exchange(const Graph& graph) : graph_(graph) {}
  void publish(const RowMatrix& values) { buffer_ = values; }
  Eigen::Ref<const Eigen::RowVectorXd> read(int reader, int owner);
  long violations() const { return violations_; }
  long reads() const { return reads_; }

 private:
  const Graph& graph_;
  RowMatrix buffer_;
  long violations_ = 0;
  long reads_ = 0;
};

/// Per-agent message-passing implementation of the four algorithms.
class DistributedSolver {
 public:
  DistributedSolver(Variant variant, const GameModel& game, const Graph& graph,
                    StepSizeProfile profile, SolverOptions options);

  Variant variant() const { return variant_; }
  const StepSizeProfile& profile() const { return profile_; }
  const SolverOptions& options() const { return options_; }
  int communication_rounds() const { return is_edge(variant_) ? 1 : 2; }
  long audit_violations() const { return audit_violations_; }

  /// One iteration in place; k ≥ 1 selects the batch size and sample stream.
  void step(ExtendedState& state, long k);
  RunResult run(ExtendedState initial, const RunControls& controls);

 private:
  void step_network(ExtendedState& s, long k);
  void step_aggregative(ExtendedState& s, long k);
  void update_aux_and_dual(ExtendedState& s, const ExtendedState& old, const RowMatrix& primal_now,
                           Exchange& duals);

  Variant variant_;
  const GameModel& game_;
  const Graph& graph_;
  StepSizeProfile profile_;
  SolverOptions options_;
  VectorXd local_rhs_;
  long audit_violations_ = 0;
};

/// Finds the largest primal step scale whose deterministic iterations settle
/// and returns a profile with α at `safety` times that scale.
struct CalibrationResult {
  StepSizeProfile profile;
  double threshold_scale = 1.0;  // largest settling fraction of the α ceiling
  bool ceiling_stable = true;    // α at its full ceiling is already stable
};
CalibrationResult calibrate_profile(Variant variant, const GameModel& game, const Graph& graph,
                                    const StepSizeProfile& base, long probe_iters = 2000);

/// Shrinks every step size until ‖Φ⁻¹‖ < 2β holds.
StepSizeProfile theory_profile(Variant variant, const GameModel& game, const Graph& graph,
                               const StepSizeProfile& base);

}  // namespace sgne
