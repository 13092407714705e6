#include "sgne/sgne.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <mutex>
#include <new>
#include <optional>
#include <string>

#include "core/errors.hpp"
#include "core/experiment.hpp"
#include "core/oracle.hpp"
#include "core/scenarios.hpp"
#include "core/solvers.hpp"

struct sgne_graph {
  std::shared_ptr<const sgne::Graph> graph;
};

struct sgne_game {
  std::shared_ptr<const sgne::Scenario> scenario;
  mutable std::once_flag reference_once;
  mutable std::shared_ptr<const Eigen::VectorXd> reference;
};

struct sgne_solver {
  std::shared_ptr<const sgne::Scenario> scenario;
  std::shared_ptr<const sgne::Graph> graph;
  const sgne_game* game_handle = nullptr;
  sgne::Variant variant = sgne::Variant::node_network;
  sgne::StepSizeProfile profile;
  sgne::SolverOptions options;
  sgne::RunControls controls;
  std::optional<sgne::ExtendedState> last_state;
};

struct sgne_trace {
  sgne::IterationTrace trace;
};

namespace {

thread_local std::string last_error;

sgne_status fail(sgne_status status, const std::string& message) {
  last_error = message;
  return status;
}

template <typename Fn>
sgne_status guarded(Fn&& fn) {
  try {
    last_error.clear();
    return fn();
  } catch (const sgne::ConfigError& e) {
    return fail(SGNE_ERR_CONFIG, e.what());
  } catch (const sgne::GraphError& e) {
    return fail(SGNE_ERR_GRAPH, e.what());
  } catch (const sgne::DimensionError& e) {
    return fail(SGNE_ERR_DIMENSION, e.what());
  } catch (const sgne::DivergenceError& e) {
    return fail(SGNE_ERR_DIVERGED, e.what());
  } catch (const sgne::ConvergenceError& e) {
    return fail(SGNE_ERR_NOT_CONVERGED, e.what());
  } catch (const sgne::PreconditionerError& e) {
    return fail(SGNE_ERR_PRECONDITIONER, e.what());
  } catch (const std::bad_alloc&) {
    return fail(SGNE_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(SGNE_ERR_INTERNAL, e.what());
  }
}

char* duplicate(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

const Eigen::VectorXd& reference_of(const sgne_game* g) {
  std::call_once(g->reference_once, [g] {
    const sgne::Scenario& sc = *g->scenario;
    g->reference = std::make_shared<const Eigen::VectorXd>(
        sc.x_star ? *sc.x_star : sgne::solve_vgne(sc.game).x);
  });
  return *g->reference;
}

}  // namespace

extern "C" {

const char* sgne_last_error(void) { return last_error.c_str(); }

const char* sgne_status_name(sgne_status status) {
  switch (status) {
    case SGNE_OK: return "ok";
    case SGNE_ERR_INVALID_ARGUMENT: return "invalid argument";
    case SGNE_ERR_CONFIG: return "config error";
    case SGNE_ERR_GRAPH: return "graph error";
    case SGNE_ERR_DIMENSION: return "dimension error";
    case SGNE_ERR_DIVERGED: return "diverged";
    case SGNE_ERR_NOT_CONVERGED: return "not converged";
    case SGNE_ERR_PRECONDITIONER: return "preconditioner error";
    case SGNE_ERR_IO: return "i/o error";
    case SGNE_ERR_INTERNAL: return "internal error";
  }
  return "unknown";
}

void sgne_string_free(char* text) { std::free(text); }

sgne_status sgne_graph_create(const char* topology, int nodes, sgne_graph** out) {
  if (!topology || !out) return fail(SGNE_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    auto g = std::make_shared<const sgne::Graph>(sgne::Graph::from_topology(topology, nodes));
    *out = new sgne_graph{std::move(g)};
    return SGNE_OK;
  });
}

sgne_status sgne_graph_create_from_edges(int nodes, int edge_count, const int* tails,
                                         const int* heads, const double* weights,
                                         sgne_graph** out) {
  if (!out || edge_count < 0 || (edge_count > 0 && (!tails || !heads)))
    return fail(SGNE_ERR_INVALID_ARGUMENT, "null or negative argument");
  return guarded([&] {
    std::vector<sgne::Edge> edges;
    for (int l = 0; l < edge_count; ++l) edges.push_back({tails[l], heads[l], weights ? weights[l] : 1.0});
    auto g = std::make_shared<const sgne::Graph>(nodes, std::move(edges));
    *out = new sgne_graph{std::move(g)};
    return SGNE_OK;
  });
}

void sgne_graph_destroy(sgne_graph* graph) { delete graph; }

sgne_status sgne_graph_spectral(const sgne_graph* graph, double* lambda2, double* lambda_n,
                                double* max_degree) {
  if (!graph) return fail(SGNE_ERR_INVALID_ARGUMENT, "null graph");
  return guarded([&] {
    const sgne::SpectralSummary s = graph->graph->spectral_summary();
    if (lambda2) *lambda2 = s.lambda2;
    if (lambda_n) *lambda_n = s.lambda_n;
    if (max_degree) *max_degree = s.max_degree;
    return SGNE_OK;
  });
}

sgne_status sgne_graph_laplacian(const sgne_graph* graph, double* out) {
  if (!graph || !out) return fail(SGNE_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    const Eigen::MatrixXd l = graph->graph->laplacian();
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(out, l.rows(), l.cols()) = l;
    return SGNE_OK;
  });
}

sgne_status sgne_game_create(const char* scenario, const char* params_json, uint64_t seed,
                             sgne_game** out) {
  if (!scenario || !out) return fail(SGNE_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    sgne::ExperimentConfig cfg;
    cfg.scenario = scenario;
    cfg.scenario_params = params_json && *params_json ? params_json : "{}";
    cfg.scenario_seed = seed;
    auto sc = std::make_shared<const sgne::Scenario>(sgne::build_scenario(cfg));
    auto* g = new sgne_game;
    g->scenario = std::move(sc);
    *out = g;
    return SGNE_OK;
  });
}

void sgne_game_destroy(sgne_game* game) { delete game; }

sgne_status sgne_game_dims(const sgne_game* game, int* agents, int* total_dim, int* constraints) {
  if (!game) return fail(SGNE_ERR_INVALID_ARGUMENT, "null game");
  const sgne::GameModel& g = game->scenario->game;
  if (agents) *agents = g.agents();
  if (total_dim) *total_dim = g.total_dim();
  if (constraints) *constraints = g.constraints();
  return SGNE_OK;
}

sgne_status sgne_game_solve_reference(const sgne_game* game, double tol, double* x, double* lambda) {
  if (!game || !x) return fail(SGNE_ERR_INVALID_ARGUMENT, "null argument");
  if (!(tol > 0)) return fail(SGNE_ERR_INVALID_ARGUMENT, "tolerance must be positive");
  return guarded([&] {
    sgne::OracleOptions opt;
    opt.tol = tol;
    const sgne::VgneSolution sol = sgne::solve_vgne(game->scenario->game, opt);
    Eigen::Map<Eigen::VectorXd>(x, sol.x.size()) = sol.x;
    if (lambda) Eigen::Map<Eigen::VectorXd>(lambda, sol.lambda.size()) = sol.lambda;
    return SGNE_OK;
  });
}

sgne_status sgne_game_kkt_check(const sgne_game* game, const double* x, const double* lambda,
                                double tol, int* pass) {
  if (!game || !x || !pass) return fail(SGNE_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    const sgne::GameModel& g = game->scenario->game;
    const Eigen::VectorXd xv = Eigen::Map<const Eigen::VectorXd>(x, g.total_dim());
    const Eigen::VectorXd lv = g.constraints() > 0 && lambda
                                   ? Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(lambda, g.constraints()))
                                   : Eigen::VectorXd::Zero(g.constraints());
    *pass = sgne::kkt_check(g, xv, lv, tol).pass ? 1 : 0;
    return SGNE_OK;
  });
}

void sgne_run_options_default(sgne_run_options* o) {
  if (!o) return;
  o->variant = "node-net";
  o->step_mode = "calibrated";
  o->tau = 0.1;
  o->safety_factor = 0.5;
  o->c_multiplier = 2.0;
  o->aggregative_c = 1.0;
  o->batch_scale = 1.0;
  o->batch_offset = 1.0;
  o->batch_exponent = 0.2;
  o->seed = 0;
  o->max_iters = 1000;
  o->tol = 1e-8;
  o->exact_gradients = 0;
  o->record_wallclock = 0;
  o->residual = 0;
}

sgne_status sgne_solver_create(const sgne_game* game, const sgne_graph* graph,
                               const sgne_run_options* options, sgne_solver** out) {
  if (!game || !graph || !options || !out || !options->variant)
    return fail(SGNE_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    sgne::ExperimentConfig cfg;
    cfg.tau = options->tau;
    cfg.safety = options->safety_factor;
    cfg.c_multiplier = options->c_multiplier;
    cfg.aggregative_c = options->aggregative_c;
    const std::string mode = options->step_mode ? options->step_mode : "calibrated";
    if (mode == "bounds") cfg.step_mode = sgne::StepMode::bounds;
    else if (mode == "calibrated") cfg.step_mode = sgne::StepMode::calibrated;
    else if (mode == "theory") cfg.step_mode = sgne::StepMode::theory;
    else throw sgne::ConfigError("step_mode", "expected bounds, calibrated or theory");
    const sgne::Variant variant = sgne::parse_variant(options->variant);
    const sgne::GameModel& g = game->scenario->game;
    auto* s = new sgne_solver;
    std::unique_ptr<sgne_solver> guard(s);
    s->scenario = game->scenario;
    s->graph = graph->graph;
    s->game_handle = game;
    s->variant = variant;
    s->profile = sgne::prepare_cell(cfg, variant, *graph->graph, g).profile;
    s->options.aux_form = sgne::default_aux_form(variant);
    s->options.schedule = {options->batch_scale, options->batch_offset, options->batch_exponent};
    s->options.exact_gradients = options->exact_gradients != 0;
    s->options.seed = options->seed;
    s->controls.max_iters = options->max_iters;
    s->controls.tol = options->tol;
    s->controls.record_wallclock = options->record_wallclock != 0;
    s->controls.residual = options->residual != 0;
    sgne::DistributedSolver check(variant, g, *graph->graph, s->profile, s->options);
    *out = guard.release();
    return SGNE_OK;
  });
}

void sgne_solver_destroy(sgne_solver* solver) { delete solver; }

sgne_status sgne_solver_run(sgne_solver* s, sgne_trace** trace) {
  if (!s || !trace) return fail(SGNE_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    const sgne::GameModel& g = s->scenario->game;
    sgne::RunControls rc = s->controls;
    rc.reference = reference_of(s->game_handle);
    sgne::DistributedSolver solver(s->variant, g, *s->graph, s->profile, s->options);
    sgne::RunResult r =
        solver.run(sgne::init_state(s->variant, s->options.aux_form, g, *s->graph, s->options.seed), rc);
    s->last_state = std::move(r.state);
    *trace = new sgne_trace{std::move(r.trace)};
    return SGNE_OK;
  });
}

sgne_status sgne_solver_decisions(const sgne_solver* s, double* x) {
  if (!s || !x) return fail(SGNE_ERR_INVALID_ARGUMENT, "null argument");
  if (!s->last_state) return fail(SGNE_ERR_INVALID_ARGUMENT, "solver has not been run");
  const Eigen::VectorXd d = s->last_state->decisions(s->scenario->game);
  Eigen::Map<Eigen::VectorXd>(x, d.size()) = d;
  return SGNE_OK;
}

sgne_status sgne_solver_multipliers(const sgne_solver* s, double* lambda) {
  if (!s || !lambda) return fail(SGNE_ERR_INVALID_ARGUMENT, "null argument");
  if (!s->last_state) return fail(SGNE_ERR_INVALID_ARGUMENT, "solver has not been run");
  const auto& dual = s->last_state->dual;
  for (Eigen::Index k = 0; k < dual.cols(); ++k) lambda[k] = dual(0, k);
  return SGNE_OK;
}

sgne_status sgne_solver_step_sizes(const sgne_solver* s, double* alpha, double* nu, double* delta,
                                   double* gamma, double* c) {
  if (!s) return fail(SGNE_ERR_INVALID_ARGUMENT, "null solver");
  const sgne::StepSizeProfile& p = s->profile;
  if (alpha) Eigen::Map<Eigen::VectorXd>(alpha, p.alpha.size()) = p.alpha;
  if (nu) Eigen::Map<Eigen::VectorXd>(nu, p.nu.size()) = p.nu;
  if (delta) Eigen::Map<Eigen::VectorXd>(delta, p.delta.size()) = p.delta;
  if (gamma) *gamma = p.gamma;
  if (c) *c = p.c;
  return SGNE_OK;
}

long sgne_trace_length(const sgne_trace* trace) {
  return trace ? static_cast<long>(trace->trace.records.size()) : 0;
}

sgne_status sgne_trace_record_at(const sgne_trace* trace, long index, sgne_trace_record* out) {
  if (!trace || !out) return fail(SGNE_ERR_INVALID_ARGUMENT, "null argument");
  if (index < 0 || index >= static_cast<long>(trace->trace.records.size()))
    return fail(SGNE_ERR_INVALID_ARGUMENT, "record index out of range");
  const sgne::IterationRecord& r = trace->trace.records[static_cast<std::size_t>(index)];
  *out = {r.iter, r.dist_to_ref, r.primal_consensus_gap, r.dual_consensus_gap,
          r.constraint_violation, r.residual, r.batch_size, r.wallclock_ms};
  return SGNE_OK;
}

sgne_status sgne_trace_write_csv(const sgne_trace* trace, const char* path) {
  if (!trace || !path) return fail(SGNE_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    std::ofstream out(path);
    if (!out) return fail(SGNE_ERR_IO, std::string("cannot open ") + path);
    sgne::write_trace_csv(out, trace->trace);
    if (!out) return fail(SGNE_ERR_IO, std::string("cannot write ") + path);
    return SGNE_OK;
  });
}

void sgne_trace_destroy(sgne_trace* trace) { delete trace; }

sgne_status sgne_experiment_validate(const char* config_path, char** report, int* ok) {
  if (!config_path || !report) return fail(SGNE_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    const sgne::ValidationReport rep = sgne::validate_config(sgne::load_config(config_path));
    *report = duplicate(rep.text());
    if (ok) *ok = rep.ok ? 1 : 0;
    return SGNE_OK;
  });
}

sgne_status sgne_experiment_run(const char* config_path, const char* overrides_json,
                                const char* output_dir, char** summary, int* all_diverged) {
  if (!config_path || !output_dir) return fail(SGNE_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    sgne::ExperimentConfig cfg = sgne::load_config(config_path);
    if (overrides_json) sgne::apply_overrides(cfg, overrides_json);
    const sgne::ExperimentOutcome outcome = sgne::run_experiment(cfg, output_dir);
    if (summary) *summary = duplicate(outcome.summary_json);
    if (all_diverged) *all_diverged = outcome.all_diverged() ? 1 : 0;
    return SGNE_OK;
  });
}

}  // extern "C"
