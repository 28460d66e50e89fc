#ifndef HEVS_H
#define HEVS_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define HEVS_API __attribute__((visibility("default")))
#else
#define HEVS_API
#endif

typedef enum hevs_status {
  HEVS_OK = 0,
  HEVS_ERR_FORMAT = 1,
  HEVS_ERR_RANGE = 2,
  HEVS_ERR_TRUNCATED = 3,
  HEVS_ERR_SHAPE = 4,
  HEVS_ERR_BOUNDS = 5,
  HEVS_ERR_CONFIG = 6,
  HEVS_ERR_IO = 7,
  HEVS_ERR_PAIRING = 8,
  HEVS_ERR_KEY_MISMATCH = 9,
  HEVS_ERR_NUMERIC = 10,
  HEVS_ERR_PRECONDITION = 11,
  HEVS_ERR_EMPTY_REPORT = 12,
  HEVS_ERR_INVALID_ARGUMENT = 64,
  HEVS_ERR_INTERNAL = 99
} hevs_status;

/* Message of the last failing call on this thread, "" when none. */
HEVS_API const char* hevs_last_error(void);
HEVS_API const char* hevs_status_name(hevs_status s);
HEVS_API const char* hevs_version(void);

typedef struct hevs_raw hevs_raw;
typedef struct hevs_rgb hevs_rgb;
typedef struct hevs_model hevs_model;

/* Raw mosaics: 10-bit samples, default HybridEVS pattern. */
HEVS_API hevs_status hevs_raw_create(int height, int width, const uint16_t* samples, hevs_raw** out);
HEVS_API hevs_status hevs_raw_read(const char* path, hevs_raw** out);
HEVS_API hevs_status hevs_raw_write(const hevs_raw* raw, const char* path);
HEVS_API hevs_status hevs_raw_dims(const hevs_raw* raw, int* height, int* width);
HEVS_API const uint16_t* hevs_raw_data(const hevs_raw* raw);
HEVS_API void hevs_raw_free(hevs_raw* raw);

/* RGB images: float HWC in [0,1]. */
HEVS_API hevs_status hevs_rgb_create(int height, int width, const float* hwc, hevs_rgb** out);
HEVS_API hevs_status hevs_rgb_read_png(const char* path, hevs_rgb** out);
HEVS_API hevs_status hevs_rgb_write_png(const hevs_rgb* img, const char* path);
HEVS_API hevs_status hevs_rgb_dims(const hevs_rgb* img, int* height, int* width);
HEVS_API const float* hevs_rgb_data(const hevs_rgb* img);
HEVS_API void hevs_rgb_free(hevs_rgb* img);

HEVS_API hevs_status hevs_extend_to_rgb(const hevs_raw* raw, hevs_rgb** out);
HEVS_API hevs_status hevs_mosaic(const hevs_rgb* img, hevs_raw** out);
HEVS_API hevs_status hevs_bilinear_baseline(const hevs_raw* raw, hevs_rgb** out);

/* Models. init is "default", "residual_zero" or "zero". config_path may be
 * NULL for the built-in defaults. */
HEVS_API hevs_status hevs_model_create(const char* config_path, const char* init, uint64_t seed,
                                       hevs_model** out);
HEVS_API hevs_status hevs_model_load(const char* checkpoint_path, hevs_model** out);
HEVS_API hevs_status hevs_model_save(const hevs_model* model, const char* checkpoint_path);
HEVS_API hevs_status hevs_model_param_count(const hevs_model* model, int64_t* out);
/* tile <= 0 runs the whole image at once. */
HEVS_API hevs_status hevs_model_forward(hevs_model* model, const hevs_raw* raw, int tile, int overlap,
                                        hevs_rgb** out);
HEVS_API void hevs_model_free(hevs_model* model);

HEVS_API hevs_status hevs_psnr(const hevs_rgb* pred, const hevs_rgb* gt, double* out);
HEVS_API hevs_status hevs_ssim(const hevs_rgb* pred, const hevs_rgb* gt, double* out);

/* Runs a batch command (synth, train, finetune, infer, eval, ablate, report).
 * config_path may be NULL; overrides are "key.path=value" strings applied in
 * order. *exit_code receives 0 when every item succeeded, 1 otherwise.
 * Output goes to stdout/stderr. */
HEVS_API hevs_status hevs_run_command(const char* verb, const char* config_path,
                                      const char* const* overrides, size_t n_overrides,
                                      int* exit_code);

/* Prints the effective configuration text for config_path plus overrides
 * into a library-owned buffer valid until the next call on this thread. */
HEVS_API hevs_status hevs_dump_config(const char* config_path, const char* const* overrides,
                                      size_t n_overrides, const char** out);

#ifdef __cplusplus
}
#endif

#endif
