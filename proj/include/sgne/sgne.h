#ifndef SGNE_SGNE_H
#define SGNE_SGNE_H

/* C interface to the distributed equilibrium-seeking library.
 * All objects are opaque handles; every call returns an sgne_status and the
 * message of the last failure on the calling thread is available through
 * sgne_last_error(). */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SGNE_API __declspec(dllexport)
#elif defined(SGNE_BUILDING_LIBRARY)
#define SGNE_API __attribute__((visibility("default")))
#else
#define SGNE_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sgne_status {
  SGNE_OK = 0,
  SGNE_ERR_INVALID_ARGUMENT = 1,
  SGNE_ERR_CONFIG = 2,
  SGNE_ERR_GRAPH = 3,
  SGNE_ERR_DIMENSION = 4,
  SGNE_ERR_DIVERGED = 5,
  SGNE_ERR_NOT_CONVERGED = 6,
  SGNE_ERR_PRECONDITIONER = 7,
  SGNE_ERR_IO = 8,
  SGNE_ERR_INTERNAL = 9
} sgne_status;

typedef struct sgne_graph sgne_graph;
typedef struct sgne_game sgne_game;
typedef struct sgne_solver sgne_solver;
typedef struct sgne_trace sgne_trace;

SGNE_API const char* sgne_last_error(void);
SGNE_API const char* sgne_status_name(sgne_status status);
SGNE_API void sgne_string_free(char* text);

/* Graphs. topology: "complete", "cycle" or "path". */
SGNE_API sgne_status sgne_graph_create(const char* topology, int nodes, sgne_graph** out);
SGNE_API sgne_status sgne_graph_create_from_edges(int nodes, int edge_count, const int* tails,
                                                  const int* heads, const double* weights,
                                                  sgne_graph** out);
SGNE_API void sgne_graph_destroy(sgne_graph* graph);
SGNE_API sgne_status sgne_graph_spectral(const sgne_graph* graph, double* lambda2,
                                         double* lambda_n, double* max_degree);
/* Row-major nodes x nodes Laplacian written to `out`. */
SGNE_API sgne_status sgne_graph_laplacian(const sgne_graph* graph, double* out);

/* Games. scenario: "nash_cournot", "ev_charging", "analytic_quadratic",
 * "two_agent_budget"; params_json may be NULL. */
SGNE_API sgne_status sgne_game_create(const char* scenario, const char* params_json,
                                      uint64_t seed, sgne_game** out);
SGNE_API void sgne_game_destroy(sgne_game* game);
SGNE_API sgne_status sgne_game_dims(const sgne_game* game, int* agents, int* total_dim,
                                    int* constraints);
/* Reference equilibrium of the expected game; x has total_dim entries,
 * lambda has constraints entries. */
SGNE_API sgne_status sgne_game_solve_reference(const sgne_game* game, double tol, double* x,
                                               double* lambda);
SGNE_API sgne_status sgne_game_kkt_check(const sgne_game* game, const double* x,
                                         const double* lambda, double tol, int* pass);

typedef struct sgne_run_options {
  const char* variant;   /* "node-net", "edge-net", "node-agg", "edge-agg" */
  const char* step_mode; /* "bounds", "calibrated", "theory" */
  double tau;
  double safety_factor;
  double c_multiplier;   /* network variants: c = c_multiplier * c_min */
  double aggregative_c;
  double batch_scale;
  double batch_offset;
  double batch_exponent;
  uint64_t seed;
  long max_iters;
  double tol;
  int exact_gradients;
  int record_wallclock;
  int residual;
} sgne_run_options;

SGNE_API void sgne_run_options_default(sgne_run_options* options);

/* The game and graph must outlive every solver created from them. */
SGNE_API sgne_status sgne_solver_create(const sgne_game* game, const sgne_graph* graph,
                                        const sgne_run_options* options, sgne_solver** out);
SGNE_API void sgne_solver_destroy(sgne_solver* solver);
/* Runs from the seeded initial state. Distances are measured against the
 * reference equilibrium. */
SGNE_API sgne_status sgne_solver_run(sgne_solver* solver, sgne_trace** trace);
/* Decisions x of the last run (total_dim entries) and agent 0's multipliers. */
SGNE_API sgne_status sgne_solver_decisions(const sgne_solver* solver, double* x);
SGNE_API sgne_status sgne_solver_multipliers(const sgne_solver* solver, double* lambda);
SGNE_API sgne_status sgne_solver_step_sizes(const sgne_solver* solver, double* alpha, double* nu,
                                            double* delta, double* gamma, double* c);

typedef struct sgne_trace_record {
  long iter;
  double dist_to_ref;
  double primal_consensus_gap;
  double dual_consensus_gap;
  double constraint_violation;
  double residual;
  long batch_size;
  double wallclock_ms;
} sgne_trace_record;

SGNE_API long sgne_trace_length(const sgne_trace* trace);
SGNE_API sgne_status sgne_trace_record_at(const sgne_trace* trace, long index,
                                          sgne_trace_record* out);
SGNE_API sgne_status sgne_trace_write_csv(const sgne_trace* trace, const char* path);
SGNE_API void sgne_trace_destroy(sgne_trace* trace);

/* Experiments driven by a JSON config file. */
SGNE_API sgne_status sgne_experiment_validate(const char* config_path, char** report, int* ok);
/* overrides_json may be NULL; summary receives the summary JSON text and
 * all_diverged is set when every cell diverged. */
SGNE_API sgne_status sgne_experiment_run(const char* config_path, const char* overrides_json,
                                         const char* output_dir, char** summary,
                                         int* all_diverged);

#ifdef __cplusplus
}
#endif

#endif
