/* C interface of the tsnet shared library. Every function returns a
 * tsnet_status; on failure tsnet_last_error() describes the problem (the
 * message is per thread and valid until the next call on that thread). */
#ifndef TSNET_TSNET_H
#define TSNET_TSNET_H

#include <stddef.h>
#include <stdint.h>

#if defined(TSNET_BUILDING_LIBRARY)
#define TSNET_API __attribute__((visibility("default")))
#else
#define TSNET_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum tsnet_status {
  TSNET_OK = 0,
  TSNET_ERR_ARGUMENT = 1,
  TSNET_ERR_PARSE = 2,
  TSNET_ERR_VALIDATION = 3,
  TSNET_ERR_IO = 4,
  TSNET_ERR_NUMERIC = 5,
  TSNET_ERR_COMPAT = 6,
  TSNET_ERR_MODE = 7,
  TSNET_ERR_ENCODING = 8,
  TSNET_ERR_INTERNAL = 9
} tsnet_status;

typedef enum tsnet_log_level {
  TSNET_LOG_DEBUG = 0,
  TSNET_LOG_INFO = 1,
  TSNET_LOG_WARNING = 2,
  TSNET_LOG_ERROR = 3
} tsnet_log_level;

typedef struct tsnet_config tsnet_config;
typedef struct tsnet_model tsnet_model;

typedef struct tsnet_metric_row {
  double horizon_s;
  double ade, c_ade, fde, c_fde;
  int k, c;
  uint64_t seed;
} tsnet_metric_row;

typedef void (*tsnet_log_fn)(tsnet_log_level level, const char* message, void* user);

TSNET_API const char* tsnet_last_error(void);
TSNET_API const char* tsnet_version(void);
/* NULL restores the default sink (stderr). */
TSNET_API void tsnet_set_log_callback(tsnet_log_fn fn, void* user);

/* Configuration: defaults, `key = value` files, single keys. */
TSNET_API tsnet_status tsnet_config_create(tsnet_config** out);
TSNET_API void tsnet_config_destroy(tsnet_config* cfg);
TSNET_API tsnet_status tsnet_config_load(tsnet_config* cfg, const char* path);
TSNET_API tsnet_status tsnet_config_set(tsnet_config* cfg, const char* key, const char* value);
/* Copies the value with its terminator into buf; *needed receives the full size. */
TSNET_API tsnet_status tsnet_config_get(const tsnet_config* cfg, const char* key, char* buf, size_t size, size_t* needed);
TSNET_API tsnet_status tsnet_config_save(const tsnet_config* cfg, const char* path);
TSNET_API tsnet_status tsnet_config_validate(const tsnet_config* cfg);

/* Synthetic JSONL dataset. The category lists are comma-separated indices;
 * NULL keeps the defaults (informative 0,1; decoy 2,3,4). */
TSNET_API tsnet_status tsnet_synth(const char* out_path, int tracks, double noise_px, uint64_t seed,
                                   const char* informative, const char* decoy);

/* Trains on the train split and writes a checkpoint; log_csv (nullable)
 * receives the per-epoch curve. */
TSNET_API tsnet_status tsnet_train(const tsnet_config* cfg, const char* dataset, const char* checkpoint,
                                   const char* log_csv);

TSNET_API tsnet_status tsnet_model_load(const char* checkpoint, tsnet_model** out);
TSNET_API void tsnet_model_destroy(tsnet_model* model);
/* Checkpoint configuration as a new handle owned by the caller. */
TSNET_API tsnet_status tsnet_model_config(const tsnet_model* model, tsnet_config** out);

/* `overrides` (nullable) may change only evaluation keys (k, c, use_ftc,
 * ftc_space, seed, batch_size, stride); other differences give
 * TSNET_ERR_COMPAT. split is "train", "val" or "test". rows (nullable)
 * receives up to *row_count rows; *row_count is set to the number written. */
TSNET_API tsnet_status tsnet_evaluate(tsnet_model* model, const tsnet_config* overrides, const char* dataset,
                                      const char* split, const char* metrics_csv, tsnet_metric_row* rows,
                                      size_t* row_count);

TSNET_API tsnet_status tsnet_predict(tsnet_model* model, const tsnet_config* overrides, const char* dataset,
                                     const char* split, size_t index, const char* out_json);

/* background_png may be NULL or missing (blank canvas, with a warning). */
TSNET_API tsnet_status tsnet_plot(const char* prediction_json, const char* background_png, const char* out_png);

/* axis: "components", "characters", "threshold" or "clustering". */
TSNET_API tsnet_status tsnet_ablate(const tsnet_config* cfg, const char* dataset, const char* axis,
                                    const char* out_csv);

#ifdef __cplusplus
}
#endif

#endif
