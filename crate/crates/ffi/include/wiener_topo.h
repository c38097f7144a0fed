#ifndef WIENER_TOPO_H
#define WIENER_TOPO_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Solver selector for [`WtConfig`].
typedef enum WtMethod {
  WT_METHOD_EXHAUSTIVE = 0,
  WT_METHOD_COLS = 1,
  WT_METHOD_RWLS = 2,
} WtMethod;

// Result code of every fallible call.
typedef enum WtStatus {
  WT_STATUS_OK = 0,
  // A required pointer argument was null.
  WT_STATUS_NULL_ARGUMENT = 1,
  // Invalid configuration, dimensions or input data.
  WT_STATUS_CONFIG = 2,
  // Singular system, divergence or another numerical failure.
  WT_STATUS_NUMERICAL = 3,
  WT_STATUS_IO = 4,
  // A string argument was not valid UTF-8.
  WT_STATUS_INVALID_UTF8 = 5,
  // An output buffer was too small.
  WT_STATUS_BUFFER_TOO_SMALL = 6,
  // A Rust panic was caught at the boundary.
  WT_STATUS_INTERNAL = 7,
} WtStatus;

// Cross-covariance sequences of a set of series.
typedef struct WtCovariance WtCovariance;

// Ground-truth FIR network used for simulation.
typedef struct WtNetwork WtNetwork;

// Directed weighted graph over named nodes.
typedef struct WtTopology WtTopology;

// Identification settings. Obtain defaults from [`wt_config_default`].
typedef struct WtConfig {
  enum WtMethod method;
  // In-degree bound; ignored when `auto_degree` is set.
  size_t m;
  // Pick each node's degree with the residual-improvement rule.
  bool auto_degree;
  // Filter half-width; each channel has `2L + 1` taps.
  size_t half_width;
  // Relative diagonal loading.
  double ridge;
  size_t rwls_iterations;
  double auto_threshold;
  uint64_t enumeration_budget;
  // Worker threads; 0 uses the available parallelism.
  size_t workers;
} WtConfig;

typedef struct WtComparison {
  size_t true_positives;
  size_t false_positives;
  size_t false_negatives;
  double precision;
  double recall;
  double f1;
} WtComparison;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer
// stays valid until the next call into this library on the same thread.
const char *wt_last_error(void);

// Library version as a static NUL-terminated string.
const char *wt_version(void);

// Releases a string returned by this library.
//
// # Safety
// `s` must be null or a string returned through a `char **` out-parameter
// of this library, not yet freed.
void wt_string_free(char *s);

struct WtConfig wt_config_default(void);

// Estimates covariances up to `max_lag` from a row-major `n × t` matrix
// (one row per node). Rows are mean-removed first.
//
// # Safety
// `data` must point to `n * t` readable doubles; `out` must be writable.
enum WtStatus wt_covariance_estimate(const double *data,
                                     size_t n,
                                     size_t t,
                                     size_t max_lag,
                                     struct WtCovariance **out);

// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum WtStatus wt_covariance_from_json(const char *json, struct WtCovariance **out);

// # Safety
// `cov` must be a live covariance handle; `out` must be writable.
enum WtStatus wt_covariance_to_json(const struct WtCovariance *cov, char **out);

// Node count, or 0 for a null handle.
//
// # Safety
// `cov` must be null or a live covariance handle.
size_t wt_covariance_nodes(const struct WtCovariance *cov);

// Maximum lag, or 0 for a null handle.
//
// # Safety
// `cov` must be null or a live covariance handle.
size_t wt_covariance_max_lag(const struct WtCovariance *cov);

// Writes `R(i, j, tau)` to `out`.
//
// # Safety
// `cov` must be a live covariance handle; `out` must be writable.
enum WtStatus wt_covariance_get(const struct WtCovariance *cov,
                                size_t i,
                                size_t j,
                                int64_t tau,
                                double *out);

// # Safety
// `cov` must be null or a handle not yet freed.
void wt_covariance_free(struct WtCovariance *cov);

// Projects node `target` onto `inputs`. `taps` receives
// `n_inputs * (2 * half_width + 1)` doubles, channel-major with lags
// ascending from `-half_width`; `taps_len` is its capacity.
//
// # Safety
// `inputs` must hold `n_inputs` entries, `taps` `taps_len` writable
// doubles, and `residual` must be writable.
enum WtStatus wt_project(const struct WtCovariance *cov,
                         size_t target,
                         const size_t *inputs,
                         size_t n_inputs,
                         size_t half_width,
                         double ridge,
                         double *taps,
                         size_t taps_len,
                         double *residual);

// Identifies the sparse topology of every node.
//
// # Safety
// `cov` must be a live covariance handle, `config` readable and `out`
// writable.
enum WtStatus wt_identify(const struct WtCovariance *cov,
                          const struct WtConfig *config,
                          struct WtTopology **out);

// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum WtStatus wt_topology_from_json(const char *json, struct WtTopology **out);

// # Safety
// `topo` must be a live topology handle; `out` must be writable.
enum WtStatus wt_topology_to_json(const struct WtTopology *topo, char **out);

// # Safety
// `topo` must be a live topology handle; `out` must be writable.
enum WtStatus wt_topology_to_dot(const struct WtTopology *topo, char **out);

// Node count, or 0 for a null handle.
//
// # Safety
// `topo` must be null or a live topology handle.
size_t wt_topology_nodes(const struct WtTopology *topo);

// Edge count, or 0 for a null handle.
//
// # Safety
// `topo` must be null or a live topology handle.
size_t wt_topology_edge_count(const struct WtTopology *topo);

// Edge `k` in `(from, to)` order.
//
// # Safety
// `topo` must be a live topology handle; the out-pointers must be writable.
enum WtStatus wt_topology_edge(const struct WtTopology *topo,
                               size_t k,
                               size_t *from,
                               size_t *to,
                               double *weight);

// Residual variance of node `i`.
//
// # Safety
// `topo` must be a live topology handle; `out` must be writable.
enum WtStatus wt_topology_residual(const struct WtTopology *topo, size_t i, double *out);

// Copy of `topo` without edges lighter than `delta_rel` times the
// heaviest edge.
//
// # Safety
// `topo` must be a live topology handle; `out` must be writable.
enum WtStatus wt_topology_threshold(const struct WtTopology *topo,
                                    double delta_rel,
                                    struct WtTopology **out);

// Scores `estimated` against `truth` by exact directed edge matches.
//
// # Safety
// Both handles must be live; `out` must be writable.
enum WtStatus wt_topology_compare(const struct WtTopology *truth,
                                  const struct WtTopology *estimated,
                                  struct WtComparison *out);

// # Safety
// `topo` must be null or a handle not yet freed.
void wt_topology_free(struct WtTopology *topo);

// Random acyclic network where each node draws between 0 and
// `max_in_degree` parents, with FIR filters of the given order.
//
// # Safety
// `out` must be writable.
enum WtStatus wt_network_random(size_t n,
                                size_t max_in_degree,
                                size_t order,
                                uint64_t seed,
                                struct WtNetwork **out);

// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum WtStatus wt_network_from_json(const char *json, struct WtNetwork **out);

// # Safety
// `net` must be a live network handle; `out` must be writable.
enum WtStatus wt_network_to_json(const struct WtNetwork *net, char **out);

// Node count, or 0 for a null handle.
//
// # Safety
// `net` must be null or a live network handle.
size_t wt_network_nodes(const struct WtNetwork *net);

// Simulates `steps` samples into the row-major `n × steps` buffer `data`
// (capacity `data_len`). A positive `snr` calibrates node noise to that
// target; 0 keeps the spec's noise levels. `achieved_snr`, when not null,
// receives `n` values.
//
// # Safety
// `net` must be a live network handle, `data` must hold `data_len`
// writable doubles and `achieved_snr` must be null or hold `n`.
enum WtStatus wt_network_simulate(const struct WtNetwork *net,
                                  size_t steps,
                                  double snr,
                                  double *data,
                                  size_t data_len,
                                  double *achieved_snr);

// Ground-truth topology of `net`; edge weights are filter energies.
//
// # Safety
// `net` must be a live network handle; `out` must be writable.
enum WtStatus wt_network_topology(const struct WtNetwork *net, struct WtTopology **out);

// # Safety
// `net` must be null or a handle not yet freed.
void wt_network_free(struct WtNetwork *net);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WIENER_TOPO_H */
