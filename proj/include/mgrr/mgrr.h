/* SPDX-License-Identifier: Apache-2.0 */

#ifndef MGRR_H
#define MGRR_H

#include <stddef.h>

#ifndef MGRR_API
#define MGRR_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mgrr_status {
  MGRR_OK = 0,
  MGRR_ERR_ARGUMENT = 1,   /* null handle, bad enum string, buffer too small */
  MGRR_ERR_INPUT = 2,      /* unreadable or invalid input files / values */
  MGRR_ERR_PARSE = 3,      /* malformed CSV or config line */
  MGRR_ERR_SPEC = 4,       /* inconsistent configuration */
  MGRR_ERR_MANIFEST = 5,   /* checkpoint / dataset / config disagree */
  MGRR_ERR_DIMENSION = 6,
  MGRR_ERR_NUMERIC = 7,    /* divergence or non-finite values */
  MGRR_ERR_METRIC = 8,     /* metric undefined for the given data */
  MGRR_ERR_INTERNAL = 99
} mgrr_status;

typedef struct mgrr_config mgrr_config;
typedef struct mgrr_model mgrr_model;
typedef struct mgrr_report mgrr_report;

/* Message of the last failed call on this thread ("" if none). */
MGRR_API const char* mgrr_last_error(void);
MGRR_API const char* mgrr_status_name(mgrr_status s);
MGRR_API const char* mgrr_version(void);

/* Progress and report text of the commands. Default: standard error. */
typedef void (*mgrr_log_fn)(const char* text, void* user);
MGRR_API void mgrr_set_log(mgrr_log_fn fn, void* user);

/* Run configuration, initialised to defaults. */
MGRR_API mgrr_status mgrr_config_new(mgrr_config** out);
MGRR_API void mgrr_config_free(mgrr_config* cfg);
MGRR_API mgrr_status mgrr_config_load(mgrr_config* cfg, const char* path);
MGRR_API mgrr_status mgrr_config_set(mgrr_config* cfg, const char* key, const char* value);
/* "key=value" */
MGRR_API mgrr_status mgrr_config_assign(mgrr_config* cfg, const char* assignment);
/* Copies the value into buf; *needed receives strlen + 1. */
MGRR_API mgrr_status mgrr_config_get(const mgrr_config* cfg, const char* key, char* buf, size_t cap, size_t* needed);
MGRR_API mgrr_status mgrr_config_write(const mgrr_config* cfg, const char* path);
MGRR_API size_t mgrr_config_key_count(void);
MGRR_API const char* mgrr_config_key_name(size_t i);
MGRR_API const char* mgrr_config_key_default(size_t i);
MGRR_API const char* mgrr_config_key_help(size_t i);

/* Commands. Directories are created; non-empty outputs need force != 0. */
MGRR_API mgrr_status mgrr_generate(const mgrr_config* cfg, const char* out_dir, int force);
MGRR_API mgrr_status mgrr_prior(const char* labels_csv, const char* out_csv, double smoothing);
MGRR_API mgrr_status mgrr_train(const mgrr_config* cfg, const char* data_dir, const char* run_dir, int resume,
                                int force);
/* split: "all", "train" or "test". out_csv and out may be NULL. */
MGRR_API mgrr_status mgrr_eval(const char* checkpoint_dir, const char* data_dir, const char* split,
                               const char* out_csv, mgrr_report** out);
/* variants: comma separated tags, NULL or "" for the full component table. */
MGRR_API mgrr_status mgrr_ablate(const mgrr_config* cfg, const char* data_dir, const char* out_dir,
                                 const char* variants, int force);
/* data_dir may be NULL to skip gate statistics. */
MGRR_API mgrr_status mgrr_inspect(const char* checkpoint_dir, const char* data_dir, const char* out_dir,
                                  size_t probe_count);

/* Metric report. Values are fractions in [0, 1]; AUC may be absent. */
MGRR_API size_t mgrr_report_aus(const mgrr_report* r);
MGRR_API double mgrr_report_f1(const mgrr_report* r, size_t au);
MGRR_API double mgrr_report_accuracy(const mgrr_report* r, size_t au);
/* MGRR_ERR_METRIC when the AU has a single ground-truth class. */
MGRR_API mgrr_status mgrr_report_auc(const mgrr_report* r, size_t au, double* out);
MGRR_API double mgrr_report_avg_f1(const mgrr_report* r);
MGRR_API double mgrr_report_avg_accuracy(const mgrr_report* r);
MGRR_API double mgrr_report_avg_auc(const mgrr_report* r);
MGRR_API double mgrr_report_landmark_error(const mgrr_report* r);
MGRR_API void mgrr_report_free(mgrr_report* r);

/* Trained model from a checkpoint directory. */
MGRR_API mgrr_status mgrr_model_load(const char* checkpoint_dir, mgrr_model** out);
MGRR_API void mgrr_model_free(mgrr_model* m);
MGRR_API size_t mgrr_model_aus(const mgrr_model* m);
MGRR_API size_t mgrr_model_landmarks(const mgrr_model* m);
MGRR_API size_t mgrr_model_image_size(const mgrr_model* m);
MGRR_API size_t mgrr_model_image_channels(const mgrr_model* m);
/* image: channels * size * size values, row-major; landmarks: 2m pixel coordinates.
   probs receives n final probabilities; landmarks_out (may be NULL) 2m values. */
MGRR_API mgrr_status mgrr_model_predict(const mgrr_model* m, const double* image, size_t image_len,
                                        const double* landmarks, size_t landmark_len, double* probs,
                                        double* landmarks_out);

#ifdef __cplusplus
}
#endif

#endif /* MGRR_H */
