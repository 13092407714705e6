#include "core/state.hpp"

#include "core/errors.hpp"

namespace sgne {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::node_network: return "node-net";
    case Variant::edge_network: return "edge-net";
    case Variant::node_aggregative: return "node-agg";
    case Variant::edge_aggregative: return "edge-agg";
  }
  return "unknown";
}

Variant parse_variant(const std::string& name) {
  for (Variant v : all_variants)
    if (variant_name(v) == name) return v;
  throw ConfigError("algorithm", "unknown variant '" + name +
                                     "' (expected node-net, edge-net, node-agg or edge-agg)");
}

void check_aux_form(Variant variant, AuxForm form) {
  if (is_edge(variant) == (form == AuxForm::node))
    throw DimensionError("auxiliary form does not match variant " + variant_name(variant));
}

StateLayout StateLayout::make(Variant variant, AuxForm form, const GameModel& game,
                              const Graph& graph) {
  check_aux_form(variant, form);
  if (game.agents() != graph.node_count())
    throw DimensionError("graph has " + std::to_string(graph.node_count()) + " nodes but game has " +
                         std::to_string(game.agents()) + " agents");
  const bool agg = is_aggregative(variant);
  if (agg != (game.mode() == GameMode::aggregative))
    throw DimensionError("variant " + variant_name(variant) + " does not match the game mode");
  StateLayout l;
  l.agents = game.agents();
  l.primal_width = agg ? game.common_dim() : game.total_dim();
  l.tracking_width = agg ? game.common_dim() : 0;
  l.aux_rows = form == AuxForm::edge_v ? graph.edge_count() : game.agents();
  l.constraints = game.constraints();
  l.primal_offset = 0;
  l.tracking_offset = static_cast<Eigen::Index>(l.agents) * l.primal_width;
  l.aux_offset = l.tracking_offset + static_cast<Eigen::Index>(l.agents) * l.tracking_width;
  l.dual_offset = l.aux_offset + static_cast<Eigen::Index>(l.aux_rows) * l.constraints;
  l.size = l.dual_offset + static_cast<Eigen::Index>(l.agents) * l.constraints;
  return l;
}

ExtendedState make_state(Variant variant, AuxForm form, const GameModel& game, const Graph& graph) {
  const StateLayout l = StateLayout::make(variant, form, game, graph);
  ExtendedState s;
  s.variant = variant;
  s.aux_form = form;
  s.primal = RowMatrix::Zero(l.agents, l.primal_width);
  s.tracking = RowMatrix::Zero(l.tracking_width > 0 ? l.agents : 0, l.tracking_width);
  s.aux = RowMatrix::Zero(l.aux_rows, l.constraints);
  s.dual = RowMatrix::Zero(l.agents, l.constraints);
  return s;
}

VectorXd ExtendedState::stacked() const {
  VectorXd out(size());
  Eigen::Index at = 0;
  for (const RowMatrix* block : {&primal, &tracking, &aux, &dual}) {
    out.segment(at, block->size()) = Eigen::Map<const VectorXd>(block->data(), block->size());
    at += block->size();
  }
  return out;
}

void ExtendedState::assign(const VectorXd& v) {
  if (v.size() != size()) throw DimensionError("state vector has the wrong size");
  Eigen::Index at = 0;
  for (RowMatrix* block : {&primal, &tracking, &aux, &dual}) {
    Eigen::Map<VectorXd>(block->data(), block->size()) = v.segment(at, block->size());
    at += block->size();
  }
}

VectorXd ExtendedState::decisions(const GameModel& game) const {
  VectorXd x(game.total_dim());
  for (int i = 0; i < game.agents(); ++i) {
    if (is_aggregative(variant))
      x.segment(game.offset(i), game.dim(i)) = primal.row(i).transpose();
    else
      x.segment(game.offset(i), game.dim(i)) =
          primal.row(i).segment(game.offset(i), game.dim(i)).transpose();
  }
  return x;
}

}  // namespace sgne
