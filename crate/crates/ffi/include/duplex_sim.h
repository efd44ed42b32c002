#ifndef DUPLEX_SIM_H
#define DUPLEX_SIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DsDepth {
  DS_DEPTH_CLOSED_FORM = 0,
  DS_DEPTH_PREDICTORS = 1,
  DS_DEPTH_FULL = 2,
} DsDepth;

typedef enum DsMetric {
  DS_METRIC_RATE_MONTE_CARLO = 0,
  DS_METRIC_RATE_CLOSED = 1,
} DsMetric;

typedef enum DsStatus {
  DS_STATUS_OK = 0,
  DS_STATUS_NULL_POINTER = 1,
  DS_STATUS_INVALID_UTF8 = 2,
  DS_STATUS_INVALID_ARGUMENT = 3,
  DS_STATUS_IO = 4,
  DS_STATUS_CONFIG = 5,
  DS_STATUS_SIMULATION = 6,
  DS_STATUS_NOT_AVAILABLE = 7,
  DS_STATUS_PANIC = 8,
} DsStatus;

/**
 * System parameters plus trial count and seed.
 */
typedef struct DsConfig DsConfig;

/**
 * Result of one scheme at one velocity.
 */
typedef struct DsReport DsReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *ds_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ds_version(void);

/**
 * Default configuration. Never NULL.
 */
struct DsConfig *ds_config_default(void);

/**
 * Load a TOML configuration file.
 *
 * # Safety
 * `path` must be NULL or a NUL-terminated string; `out` must be NULL or writable.
 */
enum DsStatus ds_config_load(const char *path, struct DsConfig **out);

/**
 * Parse a TOML configuration from text.
 *
 * # Safety
 * `text` must be NULL or a NUL-terminated string; `out` must be NULL or writable.
 */
enum DsStatus ds_config_parse(const char *text, struct DsConfig **out);

/**
 * # Safety
 * `cfg` must be NULL or a handle from this library not yet freed.
 */
void ds_config_free(struct DsConfig *cfg);

/**
 * # Safety
 * `cfg` must be NULL or a live handle.
 */
enum DsStatus ds_config_set_trials(struct DsConfig *cfg, size_t trials);

/**
 * # Safety
 * `cfg` must be NULL or a live handle.
 */
enum DsStatus ds_config_set_seed(struct DsConfig *cfg, uint64_t seed);

/**
 * # Safety
 * `cfg` must be NULL or a live handle.
 */
enum DsStatus ds_config_set_frame_length(struct DsConfig *cfg, size_t frame_length);

/**
 * Simulate `scheme` (e.g. `"MDD-1(7)"`) at `velocity_kmh` with the
 * configuration's trial count and seed.
 *
 * # Safety
 * `cfg` must be NULL or a live handle, `scheme` NULL or NUL-terminated,
 * `out` NULL or writable.
 */
enum DsStatus ds_run(const struct DsConfig *cfg,
                     const char *scheme,
                     double velocity_kmh,
                     enum DsDepth depth,
                     struct DsReport **out);

/**
 * # Safety
 * `report` must be NULL or a handle from [`ds_run`] not yet freed.
 */
void ds_report_free(struct DsReport *report);

/**
 * Number of symbols in the report's frame.
 *
 * # Safety
 * `report` must be NULL or a live handle; `out` NULL or writable.
 */
enum DsStatus ds_report_frame_length(const struct DsReport *report, size_t *out);

/**
 * Frame-average rate in bit/s/Hz per subcarrier.
 * `DS_STATUS_NOT_AVAILABLE` when the metric was not computed.
 *
 * # Safety
 * `report` must be NULL or a live handle; `out` NULL or writable.
 */
enum DsStatus ds_report_frame_average(const struct DsReport *report,
                                      enum DsMetric metric,
                                      double *out);

/**
 * Sum-rate over users and both directions at 1-based `symbol`.
 *
 * # Safety
 * `report` must be NULL or a live handle; `out` NULL or writable.
 */
enum DsStatus ds_report_symbol_rate(const struct DsReport *report,
                                    size_t symbol,
                                    enum DsMetric metric,
                                    double *out);

/**
 * Pooled prediction NMSE at 1-based `symbol`.
 *
 * # Safety
 * `report` must be NULL or a live handle; `out` NULL or writable.
 */
enum DsStatus ds_report_nmse(const struct DsReport *report, size_t symbol, double *out);

/**
 * Write the report's per-symbol rows as CSV.
 *
 * # Safety
 * `report` must be NULL or a live handle; `path` NULL or NUL-terminated.
 */
enum DsStatus ds_report_write_csv(const struct DsReport *report, const char *path);

/**
 * AR(1) coefficient `J0(2π f_D T_s)` for the given mobility.
 *
 * # Safety
 * `out` must be NULL or writable.
 */
enum DsStatus ds_fading_alpha(double carrier_frequency_hz,
                              double symbol_duration_s,
                              double velocity_kmh,
                              double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DUPLEX_SIM_H */
