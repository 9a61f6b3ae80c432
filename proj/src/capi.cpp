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

#include "gdl/gdl.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include "gdl/checkpoint.hpp"
#include "gdl/checksum.hpp"
#include "gdl/commands.hpp"
#include "gdl/error.hpp"
#include "gdl/metrics.hpp"
#include "gdl/models.hpp"
#include "json.hpp"

struct gdl_config {
  gdl::RunConfig value;
};

struct gdl_model {
  gdl::ModelGraph value;
};

namespace {

thread_local std::string last_error;

static_assert(static_cast<int>(gdl::ErrorCode::kMalformedInput) + 1 == GDL_E_MALFORMED_INPUT,
              "gdl_status must mirror gdl::ErrorCode");

gdl_status status_of(gdl::ErrorCode code) { return static_cast<gdl_status>(static_cast<int>(code) + 1); }

template <typename Fn>
gdl_status guarded(Fn&& fn) {
  try {
    fn();
    last_error.clear();
    return GDL_OK;
  } catch (const gdl::Error& e) {
    last_error = e.what();
    return status_of(e.code());
  } catch (const std::exception& e) {
    last_error = std::string("internal error: ") + e.what();
    return GDL_E_INTERNAL;
  } catch (...) {
    last_error = "internal error";
    return GDL_E_INTERNAL;
  }
}

gdl_status invalid(const char* what) {
  last_error = std::string("invalid argument: ") + what;
  return GDL_E_INVALID_ARGUMENT;
}

void emit(char** out, const std::string& text) {
  if (!out) return;
  auto* buf = static_cast<char*>(std::malloc(text.size() + 1));
  if (!buf) throw std::bad_alloc();
  std::memcpy(buf, text.c_str(), text.size() + 1);
  *out = buf;
}

}  // namespace

extern "C" {

const char* gdl_version(void) { return "1.0.0"; }

const char* gdl_status_name(gdl_status status) {
  if (status == GDL_OK) return "Ok";
  if (status == GDL_E_INVALID_ARGUMENT) return "InvalidArgument";
  if (status == GDL_E_INTERNAL) return "Internal";
  if (status >= 1 && status <= GDL_E_MALFORMED_INPUT) {
    return gdl::error_code_name(static_cast<gdl::ErrorCode>(static_cast<int>(status) - 1));
  }
  return "Unknown";
}

const char* gdl_last_error(void) { return last_error.c_str(); }

int gdl_exit_code(gdl_status status) {
  if (status == GDL_OK) return 0;
  if (status == GDL_E_INVALID_ARGUMENT) return 1;
  if (status >= 1 && status <= GDL_E_MALFORMED_INPUT) {
    return gdl::exit_code_for(static_cast<gdl::ErrorCode>(static_cast<int>(status) - 1));
  }
  return 7;
}

void gdl_string_free(char* text) { std::free(text); }

gdl_status gdl_config_new(gdl_config** out) {
  if (!out) return invalid("out is NULL");
  return guarded([&] { *out = new gdl_config{}; });
}

gdl_status gdl_config_load(const char* path, gdl_config** out) {
  if (!path || !out) return invalid("path and out are required");
  return guarded([&] { *out = new gdl_config{gdl::load_run_config(path)}; });
}

gdl_status gdl_config_set(gdl_config* config, const char* key, const char* json_value) {
  if (!config || !key || !json_value) return invalid("config, key and value are required");
  return guarded([&] { gdl::set_config_value(config->value, key, json_value); });
}

gdl_status gdl_config_to_json(const gdl_config* config, char** out_json) {
  if (!config || !out_json) return invalid("config and out_json are required");
  return guarded([&] { emit(out_json, gdl::run_config_json(config->value)); });
}

void gdl_config_free(gdl_config* config) { delete config; }

gdl_status gdl_ingest(const char* data_root, int image_size, const char* manifest_path, int64_t* records,
                      int64_t* undecodable, char** manifest) {
  if (!data_root) return invalid("data_root is NULL");
  return guarded([&] {
    std::optional<std::filesystem::path> out;
    if (manifest_path) out = manifest_path;
    auto r = gdl::cmd_ingest(data_root, image_size, out);
    if (records) *records = static_cast<int64_t>(r.dataset.size());
    if (undecodable) *undecodable = static_cast<int64_t>(r.undecodable.size());
    emit(manifest, r.manifest);
  });
}

gdl_status gdl_train_gan(const gdl_config* config, int label, char** summary_json) {
  if (!config) return invalid("config is NULL");
  return guarded([&] {
    auto r = gdl::cmd_train_gan(config->value, label);
    nlohmann::json j = {{"iterations", r.report.g_loss.size()},
                        {"final_d_real", gdl::tail_mean(r.report.d_real)},
                        {"final_d_fake", gdl::tail_mean(r.report.d_fake)},
                        {"final_g_loss", gdl::tail_mean(r.report.g_loss)},
                        {"final_d_loss", gdl::tail_mean(r.report.d_loss)},
                        {"checksum", gdl::hex64(r.report.checksum)},
                        {"wall_seconds", r.report.wall_seconds},
                        {"generator", r.generator_checkpoint.string()},
                        {"discriminator", r.discriminator_checkpoint.string()},
                        {"log", r.log.string()}};
    emit(summary_json, j.dump(2) + "\n");
  });
}

gdl_status gdl_generate(const char* checkpoint, int count, const char* out_dir, uint64_t seed, int label,
                        int64_t* written) {
  if (!checkpoint || !out_dir) return invalid("checkpoint and out_dir are required");
  return guarded([&] {
    std::optional<int> cls;
    if (label >= 0) cls = label;
    auto files = gdl::cmd_generate(checkpoint, count, out_dir, seed, cls);
    if (written) *written = static_cast<int64_t>(files.size());
  });
}

gdl_status gdl_pipeline(const gdl_config* config, char** summary_json, char** metrics_text, char** confusion_table) {
  if (!config) return invalid("config is NULL");
  return guarded([&] {
    auto r = gdl::run_pipeline(config->value);
    emit(summary_json, r.summary_json);
    emit(metrics_text, r.metrics_text);
    emit(confusion_table, r.confusion_table);
  });
}

gdl_status gdl_evaluate(const char* checkpoint, const char* data_root, const char* out_dir, char** metrics_text,
                        char** confusion_table) {
  if (!checkpoint || !data_root) return invalid("checkpoint and data_root are required");
  return guarded([&] {
    std::optional<std::filesystem::path> out;
    if (out_dir) out = out_dir;
    auto r = gdl::cmd_evaluate(checkpoint, data_root, out);
    emit(metrics_text, r.metrics_text);
    emit(confusion_table, r.confusion_table);
  });
}

gdl_status gdl_verify_tables(const char* matrices_path, char** report) {
  if (!matrices_path) return invalid("matrices_path is NULL");
  return guarded([&] {
    auto v = gdl::cmd_verify_tables(matrices_path);
    emit(report, v.report);
    if (v.mismatches > 0) {
      gdl::fail(gdl::ErrorCode::kOracleMismatch, std::to_string(v.mismatches) + " published value(s) not reproduced");
    }
  });
}

gdl_status gdl_metrics_from_counts(const int64_t counts[4], char** metrics_text, char** confusion_table) {
  if (!counts) return invalid("counts is NULL");
  return guarded([&] {
    auto cm = gdl::make_confusion(counts[0], counts[1], counts[2], counts[3]);
    emit(metrics_text, gdl::metrics_key_values(gdl::metrics_report(cm)));
    emit(confusion_table, gdl::render_confusion_table(cm));
  });
}

gdl_status gdl_model_build(const char* kind, int image_size, int base_channels, int latent_dim, uint64_t seed,
                           gdl_model** out) {
  if (!kind || !out) return invalid("kind and out are required");
  return guarded([&] {
    auto k = gdl::parse_model_kind(kind);
    if (!k) gdl::fail(gdl::ErrorCode::kConfigError, std::string("unknown model kind '") + kind + "'");
    gdl::ModelOptions o;
    o.image_size = image_size;
    o.base_channels = base_channels;
    o.latent_dim = latent_dim;
    o.seed = seed;
    if (*k == gdl::ModelKind::kGenerator) {
      *out = new gdl_model{gdl::build_generator(o)};
    } else if (*k == gdl::ModelKind::kDiscriminator) {
      *out = new gdl_model{gdl::build_discriminator(o)};
    } else {
      *out = new gdl_model{gdl::build_backbone(*k, o)};
    }
  });
}

gdl_status gdl_model_load(const char* path, gdl_model** out) {
  if (!path || !out) return invalid("path and out are required");
  return guarded([&] { *out = new gdl_model{gdl::load_model(path)}; });
}

gdl_status gdl_model_save(const gdl_model* model, const char* path) {
  if (!model || !path) return invalid("model and path are required");
  return guarded([&] { gdl::save_model(model->value, path); });
}

gdl_status gdl_model_checksum(const gdl_model* model, uint64_t* out) {
  if (!model || !out) return invalid("model and out are required");
  return guarded([&] { *out = model->value.checksum(); });
}

gdl_status gdl_model_describe(const gdl_model* model, char** out_json) {
  if (!model || !out_json) return invalid("model and out_json are required");
  return guarded([&] {
    const auto& m = model->value;
    const auto& meta = m.metadata();
    const auto census = gdl::audit_layers(m);
    nlohmann::json j = {{"kind", gdl::model_kind_name(meta.kind)},
                        {"image_size", meta.image_size},
                        {"latent_dim", meta.latent_dim},
                        {"base_channels", meta.base_channels},
                        {"num_classes", meta.num_classes},
                        {"dtype", gdl::dtype_name(meta.dtype)},
                        {"trained", m.trained()},
                        {"parameters", m.parameter_count()},
                        {"checksum", gdl::hex64(m.checksum())},
                        {"layers",
                         {{"conv", census.conv},
                          {"conv_transpose", census.conv_transpose},
                          {"batchnorm", census.batchnorm},
                          {"relu", census.relu},
                          {"leaky_relu", census.leaky_relu},
                          {"tanh", census.tanh},
                          {"sigmoid", census.sigmoid},
                          {"all_conv_kernels_4x4", census.all_conv_kernels_4x4}}}};
    emit(out_json, j.dump(2) + "\n");
  });
}

void gdl_model_free(gdl_model* model) { delete model; }

}  // extern "C"
