#pragma once

#include <Eigen/Dense>

#include "core/game.hpp"
#include "core/graph.hpp"
#include "core/variant.hpp"

namespace sgne {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Offsets of each block inside the stacked state vector
/// [primal | tracking | aux | dual], every block stored agent-major.
struct StateLayout {
  int agents = 0;
  int primal_width = 0;    // n (network estimates) or n_bar (aggregative actions)
  int tracking_width = 0;  // n_bar for aggregative variants, else 0
  int aux_rows = 0;        // N, or E for the per-edge form
  int constraints = 0;     // m
  Eigen::Index primal_offset = 0;
  Eigen::Index tracking_offset = 0;
  Eigen::Index aux_offset = 0;
  Eigen::Index dual_offset = 0;
  Eigen::Index size = 0;

  static StateLayout make(Variant variant, AuxForm form, const GameModel& game, const Graph& graph);
};

/// Algorithm state ω. Rows are agents (edges for the per-edge auxiliary form).
struct ExtendedState {
  Variant variant = Variant::node_network;
  AuxForm aux_form = AuxForm::node;
  RowMatrix primal;    // network: x̂_i (full estimate); aggregative: x_i
  RowMatrix tracking;  // aggregative: s_i
  RowMatrix aux;       // z_i or v_l
  RowMatrix dual;      // λ_i

  Eigen::Index size() const {
    return primal.size() + tracking.size() + aux.size() + dual.size();
  }
  VectorXd stacked() const;
  void assign(const VectorXd& stacked);

  /// Stacked decisions x = col(x_i): own blocks of the estimates in network mode.
  VectorXd decisions(const GameModel& game) const;
  /// Aggregate estimates u_i = x_i + s_i (aggregative variants).
  RowMatrix aggregate_estimates() const { return primal + tracking; }
};

ExtendedState make_state(Variant variant, AuxForm form, const GameModel& game, const Graph& graph);

void check_aux_form(Variant variant, AuxForm form);

}  // namespace sgne
