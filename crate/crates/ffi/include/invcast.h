#ifndef INVCAST_H
#define INVCAST_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum InvcastStatus {
  INVCAST_STATUS_OK = 0,
  INVCAST_STATUS_NULL_POINTER = 1,
  INVCAST_STATUS_INVALID_UTF8 = 2,
  INVCAST_STATUS_IO = 3,
  INVCAST_STATUS_FORMAT = 4,
  INVCAST_STATUS_COVERAGE = 5,
  INVCAST_STATUS_PARSE = 6,
  INVCAST_STATUS_REFERENCE = 7,
  INVCAST_STATUS_INSUFFICIENT_HISTORY = 8,
  INVCAST_STATUS_INVALID_PARAMETER = 9,
  INVCAST_STATUS_LEAKAGE = 10,
  INVCAST_STATUS_EMPTY_WINDOW = 11,
  INVCAST_STATUS_WINDOW_MISMATCH = 12,
  INVCAST_STATUS_NOT_CONVERGED = 13,
  INVCAST_STATUS_CONFIG = 14,
  INVCAST_STATUS_PANIC = 99,
} InvcastStatus;

/**
 * Opaque set of point forecasts over one window.
 */
typedef struct InvcastForecastSet InvcastForecastSet;

/**
 * Opaque demand panel.
 */
typedef struct InvcastPanel InvcastPanel;

typedef struct InvcastSplits {
  uint32_t train_first;
  uint32_t train_last;
  uint32_t valid_first;
  uint32_t valid_last;
  uint32_t test_first;
  uint32_t test_last;
} InvcastSplits;

typedef struct InvcastAccuracy {
  double rmse;
  double mae;
  double mape;
  bool mape_unreliable;
  size_t n_points;
} InvcastAccuracy;

typedef struct InvcastSimResult {
  double avg_cost;
  double fill_rate;
  double total_overage_units;
  double total_shortage_units;
  double total_demand;
  size_t n_cells;
} InvcastSimResult;

typedef struct InvcastNetworkResult {
  double avg_network_cost;
  double network_fill_rate;
  double total_fulfilled;
  double total_demand;
} InvcastNetworkResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or NULL. The pointer stays
 * valid until the next invcast call on the same thread.
 */
const char *invcast_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *invcast_version(void);

/**
 * Loads an M5-style sales file and calendar. `filter` may be NULL or a
 * string such as `"state_id=CA,dept_id=FOODS_1"`.
 *
 * # Safety
 * String arguments must be NUL-terminated; `out` must be writable.
 */
enum InvcastStatus invcast_panel_load(const char *sales_path,
                                      const char *calendar_path,
                                      const char *filter,
                                      struct InvcastPanel **out);

/**
 * # Safety
 * `panel` must come from [`invcast_panel_load`] and not be freed twice.
 */
void invcast_panel_free(struct InvcastPanel *panel);

/**
 * Number of series, or 0 for a NULL handle.
 *
 * # Safety
 * `panel` must be NULL or a live handle.
 */
size_t invcast_panel_n_series(const struct InvcastPanel *panel);

/**
 * Number of days, or 0 for a NULL handle.
 *
 * # Safety
 * `panel` must be NULL or a live handle.
 */
size_t invcast_panel_n_days(const struct InvcastPanel *panel);

/**
 * Realized demand of `series` on day ordinal `d` (the N in `d_N`).
 *
 * # Safety
 * `panel` must be a live handle and `out` writable.
 */
enum InvcastStatus invcast_panel_demand(const struct InvcastPanel *panel,
                                        size_t series,
                                        uint32_t d,
                                        double *out);

/**
 * Chronological train / validation / test boundaries (inclusive day ordinals).
 *
 * # Safety
 * `panel` must be a live handle and `out` writable.
 */
enum InvcastStatus invcast_panel_splits(const struct InvcastPanel *panel,
                                        size_t valid_days,
                                        size_t test_days,
                                        struct InvcastSplits *out);

/**
 * Builds a forecast set from a row-major `n_series × len` array. `split` is
 * 0 for validation, 1 for test.
 *
 * # Safety
 * `values` must point to `n_values` doubles; strings must be NUL-terminated.
 */
enum InvcastStatus invcast_forecast_new(const struct InvcastPanel *panel,
                                        const char *model_name,
                                        uint32_t split,
                                        uint32_t first_d,
                                        uint32_t len,
                                        const double *values,
                                        size_t n_values,
                                        struct InvcastForecastSet **out);

/**
 * Lag-1 forecasts over `[first_d, first_d + len)`.
 *
 * # Safety
 * `panel` must be a live handle and `out` writable.
 */
enum InvcastStatus invcast_forecast_naive(const struct InvcastPanel *panel,
                                          uint32_t first_d,
                                          uint32_t len,
                                          struct InvcastForecastSet **out);

/**
 * Reads a forecast file that must cover every series of `panel` on every
 * day of the window.
 *
 * # Safety
 * `path` must be NUL-terminated; handles must be live; `out` writable.
 */
enum InvcastStatus invcast_forecast_import(const char *path,
                                           const struct InvcastPanel *panel,
                                           uint32_t first_d,
                                           uint32_t len,
                                           struct InvcastForecastSet **out);

/**
 * # Safety
 * `fs` must be a live handle and `path` NUL-terminated.
 */
enum InvcastStatus invcast_forecast_export(const struct InvcastForecastSet *fs, const char *path);

/**
 * Copies the forecast values (row-major, series by day) into `buf` if it
 * holds at least that many doubles; always reports the count in `n_out`.
 *
 * # Safety
 * `buf` must be NULL or point to `buf_len` writable doubles.
 */
enum InvcastStatus invcast_forecast_values(const struct InvcastForecastSet *fs,
                                           double *buf,
                                           size_t buf_len,
                                           size_t *n_out);

/**
 * # Safety
 * `fs` must come from one of the forecast constructors and not be freed twice.
 */
void invcast_forecast_free(struct InvcastForecastSet *fs);

/**
 * Pooled RMSE, MAE and MAPE against realized demand.
 *
 * # Safety
 * Handles must be live and `out` writable.
 */
enum InvcastStatus invcast_accuracy(const struct InvcastForecastSet *fs,
                                    const struct InvcastPanel *panel,
                                    struct InvcastAccuracy *out);

/**
 * Rolling newsvendor evaluation with orders `max(0, forecast)`.
 *
 * # Safety
 * Handles must be live and `out` writable.
 */
enum InvcastStatus invcast_simulate(const struct InvcastForecastSet *fs,
                                    const struct InvcastPanel *panel,
                                    double holding,
                                    double shortage,
                                    bool round_orders,
                                    struct InvcastSimResult *out);

/**
 * Single-period cost `h·max(Q-D, 0) + b·max(D-Q, 0)`.
 *
 * # Safety
 * `out` must be writable.
 */
enum InvcastStatus invcast_period_cost(double order,
                                       double demand,
                                       double holding,
                                       double shortage,
                                       double *out);

/**
 * Rations `available` DC supply across `n` store requests into `out`.
 *
 * # Safety
 * `requests` and `out` must each point to `n` doubles.
 */
enum InvcastStatus invcast_allocate(const double *requests,
                                    size_t n,
                                    double available,
                                    double *out);

/**
 * Two-echelon simulation: one DC supplying the listed series indices.
 *
 * # Safety
 * `stores` must point to `n_stores` indices; handles must be live.
 */
enum InvcastStatus invcast_simulate_network(const struct InvcastForecastSet *fs,
                                            const struct InvcastPanel *panel,
                                            const size_t *stores,
                                            size_t n_stores,
                                            double dc_holding,
                                            double dc_shortage,
                                            double store_shortage,
                                            double initial_dc_inventory,
                                            struct InvcastNetworkResult *out);

/**
 * Runs a full evaluation from a TOML config, writing reports to its output
 * directory. Config problems come back as `INVCAST_STATUS_CONFIG` with every
 * finding in the error message.
 *
 * # Safety
 * `config_path` must be NUL-terminated.
 */
enum InvcastStatus invcast_run(const char *config_path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* INVCAST_H */
