#pragma once

#include <array>
#include <string>

namespace sgne {

enum class Variant { node_network, edge_network, node_aggregative, edge_aggregative };

/// Storage of the auxiliary dual block. Edge variants may keep the per-edge
/// variable v or its node image z = V_m^T v.
enum class AuxForm { node, edge_z, edge_v };

/// Sign of the auxiliary reflection term in the edge-based dual update.
enum class EdgeDualSign { derived, printed };

inline constexpr std::array<Variant, 4> all_variants = {
    Variant::node_network, Variant::edge_network, Variant::node_aggregative,
    Variant::edge_aggregative};

inline bool is_aggregative(Variant v) {
  return v == Variant::node_aggregative || v == Variant::edge_aggregative;
}
inline bool is_edge(Variant v) {
  return v == Variant::edge_network || v == Variant::edge_aggregative;
}

inline AuxForm default_aux_form(Variant v) { return is_edge(v) ? AuxForm::edge_z : AuxForm::node; }

std::string variant_name(Variant v);
/// Accepts "node-net", "edge-net", "node-agg", "edge-agg".
Variant parse_variant(const std::string& name);

}  // namespace sgne
