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

#include "medt/medt.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "medt/checkpoint.hpp"
#include "medt/decode.hpp"
#include "medt/error.hpp"
#include "medt/experiment.hpp"

struct medt_config {
  medt::ExperimentConfig impl;
};

struct medt_model {
  explicit medt_model(medt::MedModel m) : impl(std::move(m)) {}
  medt::MedModel impl;
};

namespace {

thread_local std::string g_last_error;

medt_status fail(medt_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

template <typename F>
medt_status guarded(F&& f) {
  try {
    f();
    return MEDT_OK;
  } catch (const medt::Error& e) {
    return fail(static_cast<medt_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(MEDT_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(MEDT_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(MEDT_ERR_UNKNOWN, "unknown exception");
  }
}

char* dup_string(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (p == nullptr) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

medt_status null_arg(const char* what) { return fail(MEDT_ERR_CONTRACT, std::string(what) + " is NULL"); }

template <typename Cmd>
medt_status run_command(const medt_config* config, char** summary, Cmd cmd) {
  if (summary) *summary = nullptr;
  if (config == nullptr) return null_arg("config");
  return guarded([&] {
    const std::string s = cmd(config->impl);
    if (summary) *summary = dup_string(s);
  });
}

}  // namespace

extern "C" {

const char* medt_version(void) { return "0.1.0"; }

const char* medt_status_name(medt_status status) {
  switch (status) {
    case MEDT_OK: return "ok";
    case MEDT_ERR_UNKNOWN: return "unknown";
    case MEDT_ERR_INTERNAL: return "internal";
    default: break;
  }
  if (status >= MEDT_ERR_DIMENSION && status <= MEDT_ERR_NUMERIC) {
    return medt::error_code_name(static_cast<medt::ErrorCode>(status));
  }
  return "unknown";
}

const char* medt_last_error(void) { return g_last_error.c_str(); }

void medt_string_free(char* s) { std::free(s); }

medt_status medt_config_create(medt_config** out) {
  if (out == nullptr) return null_arg("out");
  *out = nullptr;
  return guarded([&] { *out = new medt_config(); });
}

medt_status medt_config_load(const char* path, medt_config** out) {
  if (out == nullptr) return null_arg("out");
  *out = nullptr;
  if (path == nullptr) return null_arg("path");
  return guarded([&] { *out = new medt_config{medt::ExperimentConfig::load(path)}; });
}

medt_status medt_config_merge(medt_config* config, const char* path) {
  if (config == nullptr) return null_arg("config");
  if (path == nullptr) return null_arg("path");
  return guarded([&] { config->impl.merge_file(path); });
}

medt_status medt_config_set(medt_config* config, const char* key, const char* value) {
  if (config == nullptr) return null_arg("config");
  if (key == nullptr || value == nullptr) return null_arg("key/value");
  return guarded([&] { config->impl.set(key, value); });
}

medt_status medt_config_get(const medt_config* config, const char* key, char* buf, size_t buf_size, size_t* needed) {
  if (config == nullptr) return null_arg("config");
  if (key == nullptr) return null_arg("key");
  return guarded([&] {
    const std::string& v = config->impl.get(key);
    if (needed) *needed = v.size() + 1;
    if (buf != nullptr && buf_size > v.size()) std::memcpy(buf, v.c_str(), v.size() + 1);
  });
}

void medt_config_free(medt_config* config) { delete config; }

medt_status medt_gen(const medt_config* c, char** s) { return run_command(c, s, medt::cmd_gen); }
medt_status medt_train(const medt_config* c, char** s) { return run_command(c, s, medt::cmd_train); }
medt_status medt_recipe(const medt_config* c, char** s) { return run_command(c, s, medt::cmd_recipe); }
medt_status medt_ablation(const medt_config* c, char** s) { return run_command(c, s, medt::cmd_ablation); }
medt_status medt_decode(const medt_config* c, char** s) { return run_command(c, s, medt::cmd_decode); }
medt_status medt_analyze(const medt_config* c, char** s) { return run_command(c, s, medt::cmd_analyze); }

medt_status medt_model_load(const char* path, medt_model** out) {
  if (out == nullptr) return null_arg("out");
  *out = nullptr;
  if (path == nullptr) return null_arg("path");
  return guarded([&] { *out = new medt_model(medt::load_model(path)); });
}

medt_status medt_model_save(const medt_model* model, const char* path) {
  if (model == nullptr) return null_arg("model");
  if (path == nullptr) return null_arg("path");
  return guarded([&] { medt::save_model(path, model->impl); });
}

medt_status medt_model_num_parameters(const medt_model* model, size_t* out) {
  if (model == nullptr) return null_arg("model");
  if (out == nullptr) return null_arg("out");
  *out = model->impl.parameters().scalar_count();
  return MEDT_OK;
}

medt_status medt_model_transcribe(const medt_model* model, const float* features, size_t frames, size_t dims,
                                  size_t beam, double alpha, int32_t* tokens, size_t capacity, size_t* length,
                                  double* score) {
  if (model == nullptr) return null_arg("model");
  if (features == nullptr && frames * dims > 0) return null_arg("features");
  if (length == nullptr) return null_arg("length");
  if (tokens == nullptr && capacity > 0) return null_arg("tokens");
  return guarded([&] {
    std::vector<medt::Real> data(features, features + frames * dims);
    medt::BeamOptions opts;
    opts.beam = beam;
    opts.ctc_weight = alpha;
    const medt::BeamResult r = medt::beam_search(model->impl, medt::Tensor({frames, dims}, std::move(data)), opts);
    const auto labels = r.best().labels(model->impl.config().vocabulary().eos());
    *length = labels.size();
    for (size_t i = 0; i < labels.size() && i < capacity; ++i) tokens[i] = labels[i];
    if (score) *score = r.best().combined;
  });
}

void medt_model_free(medt_model* model) { delete model; }

}  // extern "C"
