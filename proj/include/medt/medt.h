// Copyright 2026 The medt Authors
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

/* C interface to the medt library. Every function returns a medt_status;
 * on failure medt_last_error() describes the problem (thread-local, valid
 * until the next failing call on the same thread). Handles are opaque and
 * must be released with the matching *_free function. */

#ifndef MEDT_MEDT_H_
#define MEDT_MEDT_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define MEDT_API __declspec(dllexport)
#else
#define MEDT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum medt_status {
  MEDT_OK = 0,
  MEDT_ERR_UNKNOWN = 1,
  MEDT_ERR_DIMENSION = 2,
  MEDT_ERR_CONTRACT = 3,
  MEDT_ERR_CONFIG = 4,
  MEDT_ERR_INPUT = 5,
  MEDT_ERR_INFEASIBLE = 6,
  MEDT_ERR_TRANSPLANT = 7,
  MEDT_ERR_FORMAT = 8,
  MEDT_ERR_IO = 9,
  MEDT_ERR_NUMERIC = 10,
  MEDT_ERR_INTERNAL = 11
} medt_status;

typedef struct medt_config medt_config;
typedef struct medt_model medt_model;

MEDT_API const char* medt_version(void);
/* Short lowercase name, e.g. "config" for MEDT_ERR_CONFIG. */
MEDT_API const char* medt_status_name(medt_status status);
MEDT_API const char* medt_last_error(void);
MEDT_API void medt_string_free(char* s);

/* Experiment configuration (key=value settings with defaults). */
MEDT_API medt_status medt_config_create(medt_config** out);
MEDT_API medt_status medt_config_load(const char* path, medt_config** out);
/* Merges another file on top of the current settings. */
MEDT_API medt_status medt_config_merge(medt_config* config, const char* path);
MEDT_API medt_status medt_config_set(medt_config* config, const char* key, const char* value);
/* Copies the value (NUL-terminated) into buf if it fits; *needed receives
 * the required size including the terminator. */
MEDT_API medt_status medt_config_get(const medt_config* config, const char* key, char* buf, size_t buf_size,
                                     size_t* needed);
MEDT_API void medt_config_free(medt_config* config);

/* Commands. When summary is non-NULL it receives a human-readable report
 * to be released with medt_string_free (NULL on failure). */
MEDT_API medt_status medt_gen(const medt_config* config, char** summary);
MEDT_API medt_status medt_train(const medt_config* config, char** summary);
MEDT_API medt_status medt_recipe(const medt_config* config, char** summary);
MEDT_API medt_status medt_ablation(const medt_config* config, char** summary);
MEDT_API medt_status medt_decode(const medt_config* config, char** summary);
MEDT_API medt_status medt_analyze(const medt_config* config, char** summary);

/* Trained models. */
MEDT_API medt_status medt_model_load(const char* path, medt_model** out);
MEDT_API medt_status medt_model_save(const medt_model* model, const char* path);
MEDT_API medt_status medt_model_num_parameters(const medt_model* model, size_t* out);
/* Joint CTC/attention beam search over a [frames, dims] row-major feature
 * matrix. Writes up to 'capacity' token ids; *length receives the full
 * hypothesis length, *score (if non-NULL) its combined score. */
MEDT_API medt_status medt_model_transcribe(const medt_model* model, const float* features, size_t frames,
                                           size_t dims, size_t beam, double alpha, int32_t* tokens,
                                           size_t capacity, size_t* length, double* score);
MEDT_API void medt_model_free(medt_model* model);

#ifdef __cplusplus
}
#endif

#endif /* MEDT_MEDT_H_ */
