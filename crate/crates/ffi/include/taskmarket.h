/* C API for the taskmarket pricing engine.
 *
 * Handles are opaque; every constructor has a matching _free. Functions
 * return TM_OK (0) or an error code; tm_last_error_message() describes
 * the most recent failure on the calling thread.
 *
 * Kept in sync with crates/ffi/src/lib.rs by hand.
 */

#ifndef TASKMARKET_H
#define TASKMARKET_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#define TM_OK 0
#define TM_ERR_NULL_POINTER 1
#define TM_ERR_INVALID 2
#define TM_ERR_UTF8 3
#define TM_ERR_DIMENSION 4
#define TM_ERR_EMPTY 5
#define TM_ERR_CYCLE 6
#define TM_ERR_CAP_EXCEEDED 7
#define TM_ERR_ZERO_VECTOR 8
#define TM_ERR_NO_CONVERGENCE 9
#define TM_ERR_UNKNOWN_ID 10
#define TM_ERR_OUT_OF_RANGE 11

typedef struct TmHistogram TmHistogram;
typedef struct TmStats TmStats;
typedef struct TmGraphBuilder TmGraphBuilder;
typedef struct TmGraph TmGraph;

/* A priced contract. markup is the uniform amount added to every
 * interval's expected cost; profits and demand are expectations. */
typedef struct TmPricingOutcome {
  double markup;
  double expected_profit;
  double expected_demand;
  double overall_profit;
  double consumer_utility;
} TmPricingOutcome;

/* Most recent error message on this thread, or NULL. Free the returned
 * string with tm_string_free. */
char *tm_last_error_message(void);
void tm_string_free(char *s);

/* --- Completion-time histograms ------------------------------------- */

/* Point masses at (times[i], masses[i]); masses must sum to one. */
int32_t tm_histogram_from_points(const double *times, const double *masses,
                                 size_t len, TmHistogram **out);

/* Gaussian estimate materialized on a grid of grid_step minutes,
 * truncated at zero. A zero std_dev yields a point mass. */
int32_t tm_histogram_gaussian(double mean, double std_dev, double grid_step,
                              TmHistogram **out);

int32_t tm_histogram_mean(const TmHistogram *hist, double *out);

/* Cosine similarity of the mass vectors on the comparison grid. */
int32_t tm_histogram_cosine_similarity(const TmHistogram *a,
                                       const TmHistogram *b, double *out);

void tm_histogram_free(TmHistogram *hist);

/* --- Interval statistics -------------------------------------------- */

/* Splits a histogram along target times. interior_targets holds the
 * finite targets strictly between 0 and infinity, ascending; the implied
 * full list 0, t_1, ..., t_k, inf gives k + 1 intervals. rate is the
 * configuration's cost in cents per minute. */
int32_t tm_interval_stats(const TmHistogram *hist, double rate,
                          const double *interior_targets, size_t n_interior,
                          TmStats **out);

size_t tm_stats_len(const TmStats *stats);

int32_t tm_stats_interval(const TmStats *stats, size_t index, double *prob,
                          double *expected_time, double *expected_cost);

void tm_stats_free(TmStats *stats);

/* --- Contract pricing ------------------------------------------------ */

/* Optimal prices for the linear utility -time_slope*t - price_slope*p
 * and demand max(0, intercept + slope * utility). epsilon is the markup
 * floor enforcing strict profitability. */
int32_t tm_price_linear(const TmStats *stats, double time_slope,
                        double price_slope, double demand_intercept,
                        double demand_slope, double epsilon,
                        TmPricingOutcome *out);

/* --- Duopoly price competition ---------------------------------------- */

/* Closed-form equilibrium for demands gamma_i - alpha_i*own + beta_i*rival. */
int32_t tm_bertrand_nash(double gamma1, double alpha1, double beta1,
                         double gamma2, double alpha2, double beta2,
                         double *mu1, double *mu2);

/* Synchronized best-response iteration to within tol of the equilibrium. */
int32_t tm_bertrand_iterate(double gamma1, double alpha1, double beta1,
                            double gamma2, double alpha2, double beta2,
                            double init1, double init2, double tol,
                            uint64_t max_steps, double *mu1, double *mu2,
                            uint64_t *steps);

/* --- Task graphs ------------------------------------------------------ */

TmGraphBuilder *tm_graph_builder_new(void);

/* Adds a subtask with n_options deterministic (time, cost) options. */
int32_t tm_graph_builder_add_node(TmGraphBuilder *builder, const char *id,
                                  const double *times, const double *costs,
                                  size_t n_options);

/* Adds a producer-to-consumer edge by node ids. */
int32_t tm_graph_builder_add_edge(TmGraphBuilder *builder, const char *from,
                                  const char *to);

/* Validates and builds. On success the builder is consumed; on failure it
 * stays alive and must still be freed. */
int32_t tm_graph_builder_build(TmGraphBuilder *builder, TmGraph **out);

void tm_graph_builder_free(TmGraphBuilder *builder);

size_t tm_graph_len(const TmGraph *graph);

/* Prices the graph with the fine-grained dynamic program under the linear
 * closed-form profit induced by the utility and demand parameters.
 * choices must have room for tm_graph_len(graph) entries, one chosen
 * option index per node in insertion order. granularity is the time grid
 * step in minutes. */
int32_t tm_graph_price_dp(const TmGraph *graph, double time_slope,
                          double price_slope, double demand_intercept,
                          double demand_slope, double granularity,
                          size_t *choices, double *total_time,
                          double *total_cost, double *profit);

void tm_graph_free(TmGraph *graph);

#ifdef __cplusplus
}
#endif

#endif /* TASKMARKET_H */
