#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "core/consensus_ops.hpp"
#include "core/graph.hpp"
#include "core/scenarios.hpp"
#include "core/solvers.hpp"

namespace sgne {

enum class StepMode { bounds, calibrated, theory };

struct StepOverrides {
  std::optional<std::vector<double>> alpha, nu, delta;  // one value (broadcast) or one per agent
  std::optional<double> gamma;
  std::optional<double> c;
};

struct TopologySpec {
  std::string name;          // "complete", "cycle", "path" or "custom"
  std::vector<Edge> edges;   // custom only
};

struct ExperimentConfig {
  std::string scenario = "nash_cournot";
  std::string scenario_params = "{}";  // JSON object text
  std::uint64_t scenario_seed = 0;

  std::vector<TopologySpec> topologies{{"complete", {}}};
  std::vector<Variant> variants{Variant::node_network};

  double tau = 0.1;
  double safety = 0.5;
  double c_multiplier = 2.0;
  double aggregative_c = 1.0;
  StepMode step_mode = StepMode::calibrated;
  StepOverrides overrides;

  BatchSchedule batch{1.0, 1.0, 0.2};
  BatchSampling sampling = BatchSampling::aggregate;

  long iters = 5000;
  double tol = 1e-8;
  std::vector<std::uint64_t> seeds{0};
  int jobs = 1;
  bool record_wallclock = false;
  bool residual = false;
  bool exact_gradients = false;

  EdgeDualSign edge_dual = EdgeDualSign::derived;
  AuxForm edge_form = AuxForm::edge_z;
};

/// Throws ConfigError("config", "config not found: <path>") for a missing file.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& json_text);
/// Overrides use the CLI vocabulary: {"algorithm": [...], "topology": [...],
/// "seeds": "0..9" | [...], "iters": n, "jobs": n, "tol": x}.
void apply_overrides(ExperimentConfig& config, const std::string& json_text);
std::vector<std::uint64_t> parse_seed_range(const std::string& text);

Scenario build_scenario(const ExperimentConfig& config);
Graph build_graph(const TopologySpec& topology, int agents);

struct CellSetup {
  Variant variant = Variant::node_network;
  std::string topology;
  StepSizeProfile profile;
  TheoryConstants theory;
  MetricDiagnostic metric;
  double calibration_threshold = 1.0;
  bool calibration_ceiling_stable = true;
};
CellSetup prepare_cell(const ExperimentConfig& config, Variant variant, const Graph& graph,
                       const GameModel& game);

struct ValidationReport {
  bool ok = true;  // no hard failures
  std::vector<std::string> lines;
  std::string text() const;
};
ValidationReport validate_config(const ExperimentConfig& config);

/// Every iteration up to 1000, then every 10th, plus the last one.
void write_trace_csv(std::ostream& out, const IterationTrace& trace);
std::string trace_file_name(Variant variant, const std::string& topology, std::uint64_t seed);

struct ExperimentOutcome {
  std::string summary_json;
  int cells = 0;
  int diverged_cells = 0;  // cells in which every seed diverged
  bool all_diverged() const { return cells > 0 && diverged_cells == cells; }
};
/// Runs every (variant, topology, seed) cell, writes one CSV per cell and
/// summary.json into `output_dir`.
ExperimentOutcome run_experiment(const ExperimentConfig& config, const std::string& output_dir);

}  // namespace sgne
