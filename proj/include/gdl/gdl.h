// Copyright 2026 The gdl Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/* C interface to the gdl library.
 *
 * Every function returns a gdl_status. On failure the message of the most
 * recent error on the calling thread is available from gdl_last_error().
 * Strings returned through `char**` out-parameters are owned by the caller
 * and must be released with gdl_string_free(). Handles are opaque and freed
 * with their matching *_free function; passing NULL to a free is a no-op.
 */
#ifndef GDL_GDL_H_
#define GDL_GDL_H_

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define GDL_API __attribute__((visibility("default")))
#else
#define GDL_API
#endif

typedef enum gdl_status {
  GDL_OK = 0,
  GDL_E_SHAPE_MISMATCH = 1,
  GDL_E_DOMAIN_ERROR = 2,
  GDL_E_INVALID_HYPERPARAMETER = 3,
  GDL_E_DEGENERATE_BATCH = 4,
  GDL_E_INVALID_TARGET = 5,
  GDL_E_DETACHED_TENSOR = 6,
  GDL_E_OVERFLOW = 7,
  GDL_E_NO_HEAD = 8,
  GDL_E_MISSING_GRADIENT = 9,
  GDL_E_EMPTY_BATCH = 10,
  GDL_E_NON_FINITE_LOSS = 11,
  GDL_E_EMPTY_DATASET = 12,
  GDL_E_UNTRAINED_GENERATOR = 13,
  GDL_E_SIZE_MISMATCH = 14,
  GDL_E_MISSING_CLASS_DIR = 15,
  GDL_E_UNDECODABLE_IMAGE = 16,
  GDL_E_TOO_SMALL = 17,
  GDL_E_IO = 18,
  GDL_E_CORRUPT_ARCHIVE = 19,
  GDL_E_LENGTH_MISMATCH = 20,
  GDL_E_INVALID_LABEL = 21,
  GDL_E_EMPTY_MATRIX = 22,
  GDL_E_CONFIG = 23,
  GDL_E_ORACLE_MISMATCH = 24,
  GDL_E_MALFORMED_INPUT = 25,
  GDL_E_INVALID_ARGUMENT = 100,
  GDL_E_INTERNAL = 101
} gdl_status;

typedef struct gdl_config gdl_config;
typedef struct gdl_model gdl_model;

GDL_API const char* gdl_version(void);
GDL_API const char* gdl_status_name(gdl_status status);
GDL_API const char* gdl_last_error(void);
/* Process exit status conventionally used for `status` (0 for GDL_OK). */
GDL_API int gdl_exit_code(gdl_status status);
GDL_API void gdl_string_free(char* text);

/* Run configuration. Layering is defaults, then a file, then gdl_config_set. */
GDL_API gdl_status gdl_config_new(gdl_config** out);
GDL_API gdl_status gdl_config_load(const char* path, gdl_config** out);
/* `key` is a dotted path such as "gan.iterations"; `json_value` a JSON literal. */
GDL_API gdl_status gdl_config_set(gdl_config* config, const char* key, const char* json_value);
GDL_API gdl_status gdl_config_to_json(const gdl_config* config, char** out_json);
GDL_API void gdl_config_free(gdl_config* config);

/* Commands. Text outputs may be NULL when not wanted. */
GDL_API gdl_status gdl_ingest(const char* data_root, int image_size, const char* manifest_path, int64_t* records,
                              int64_t* undecodable, char** manifest);
/* label: 0 Normal, 1 Pneumonia. Writes checkpoints and a JSON-lines log to output_dir. */
GDL_API gdl_status gdl_train_gan(const gdl_config* config, int label, char** summary_json);
/* label < 0 takes the class stored in the checkpoint. */
GDL_API gdl_status gdl_generate(const char* checkpoint, int count, const char* out_dir, uint64_t seed, int label,
                                int64_t* written);
GDL_API gdl_status gdl_pipeline(const gdl_config* config, char** summary_json, char** metrics_text,
                                char** confusion_table);
GDL_API gdl_status gdl_evaluate(const char* checkpoint, const char* data_root, const char* out_dir,
                                char** metrics_text, char** confusion_table);
/* Returns GDL_E_ORACLE_MISMATCH (with the report still filled in) when a
 * published value is not reproduced and is not listed as a known anomaly. */
GDL_API gdl_status gdl_verify_tables(const char* matrices_path, char** report);
/* counts: predicted-Normal/actual-Normal, predicted-Normal/actual-Pneumonia,
 * predicted-Pneumonia/actual-Normal, predicted-Pneumonia/actual-Pneumonia. */
GDL_API gdl_status gdl_metrics_from_counts(const int64_t counts[4], char** metrics_text, char** confusion_table);

/* Models. kind: generator, discriminator, alexnet_mini, squeezenet_mini,
 * googlenet_mini, resnet18_mini. */
GDL_API gdl_status gdl_model_build(const char* kind, int image_size, int base_channels, int latent_dim, uint64_t seed,
                                   gdl_model** out);
GDL_API gdl_status gdl_model_load(const char* path, gdl_model** out);
GDL_API gdl_status gdl_model_save(const gdl_model* model, const char* path);
GDL_API gdl_status gdl_model_checksum(const gdl_model* model, uint64_t* out);
/* JSON object with kind, sizes, parameter count, checksum and layer census. */
GDL_API gdl_status gdl_model_describe(const gdl_model* model, char** out_json);
GDL_API void gdl_model_free(gdl_model* model);

#ifdef __cplusplus
}
#endif

#endif /* GDL_GDL_H_ */
