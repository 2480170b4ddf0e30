#ifndef IHRRP_H
#define IHRRP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum IhrrpStatus {
  IHRRP_STATUS_OK = 0,
  IHRRP_STATUS_NULL_POINTER = 1,
  IHRRP_STATUS_INVALID_ARGUMENT = 2,
  IHRRP_STATUS_INVALID_SPEC = 3,
  IHRRP_STATUS_PARSE = 4,
  IHRRP_STATUS_SIZE_CAP = 5,
  IHRRP_STATUS_NO_CYCLE = 6,
  IHRRP_STATUS_MISMATCH = 7,
  IHRRP_STATUS_NUMERIC = 8,
  IHRRP_STATUS_IO = 9,
  IHRRP_STATUS_PANIC = 10,
} IhrrpStatus;

/**
 * Opaque service specification.
 */
typedef struct IhrrpSpec IhrrpSpec;

typedef struct IhrrpOptimizeOptions {
  size_t memory_size;
  size_t steps;
  uint64_t seed;
  uint64_t restart;
  double learning_rate;
  bool determinize_each_step;
  size_t samples;
  size_t max_cycle;
} IhrrpOptimizeOptions;

typedef struct IhrrpOptimizeResult {
  double best_rfm_value;
  /**
   * NaN when no periodic schedule was sampled.
   */
  double best_periodic_value;
  size_t best_step;
} IhrrpOptimizeResult;

/**
 * Copies the calling thread's last error message into `buf` (nul
 * terminated, truncated to `len`). Returns the full message length without
 * the terminator, or 0 when there is no message.
 */
size_t ihrrp_last_error_message(char *buf, size_t len);

/**
 * Parses an instance JSON document.
 *
 * # Safety
 * `json` must be a valid nul-terminated string; `out` must be writable.
 */
enum IhrrpStatus ihrrp_spec_from_json(const char *json, struct IhrrpSpec **out);

/**
 * The two-node example instance.
 */
enum IhrrpStatus ihrrp_spec_fig1(struct IhrrpSpec **out);

/**
 * Grid instance with `k` long-maintenance nodes.
 */
enum IhrrpStatus ihrrp_spec_grid(size_t k, uint64_t seed, bool waits, struct IhrrpSpec **out);

/**
 * Releases a handle; null is ignored.
 *
 * # Safety
 * `spec` must come from this library and not be used afterwards.
 */
void ihrrp_spec_free(struct IhrrpSpec *spec);

enum IhrrpStatus ihrrp_spec_node_count(const struct IhrrpSpec *spec, size_t *out);

/**
 * Serializes the instance; free the string with `ihrrp_string_free`.
 */
enum IhrrpStatus ihrrp_spec_to_json(const struct IhrrpSpec *spec, char **out);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void ihrrp_string_free(char *s);

/**
 * Value of the periodic schedule `nodes[0], times[0], ..., nodes[moves]`;
 * `nodes` holds `moves + 1` entries and `times` holds `moves`.
 *
 * # Safety
 * The arrays must hold the stated number of elements.
 */
enum IhrrpStatus ihrrp_eval_schedule(const struct IhrrpSpec *spec,
                                     const size_t *nodes,
                                     const uint64_t *times,
                                     size_t moves,
                                     double *out);

struct IhrrpOptimizeOptions ihrrp_optimize_options_default(void);

/**
 * Runs one optimization restart.
 *
 * # Safety
 * `options` must point to a valid options struct.
 */
enum IhrrpStatus ihrrp_optimize(const struct IhrrpSpec *spec,
                                const struct IhrrpOptimizeOptions *options,
                                struct IhrrpOptimizeResult *out);

/**
 * Optimal periodic value of a tiny instance with waits up to `wait_cap`.
 */
enum IhrrpStatus ihrrp_oracle_value(const struct IhrrpSpec *spec, uint64_t wait_cap, double *out);

#endif  /* IHRRP_H */
