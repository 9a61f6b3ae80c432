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

// Command-line front end. Everything goes through the C interface in gdl.h.

#include <cstdio>
#include <cstdlib>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gdl/gdl.h"

#ifndef GDL_DEFAULT_MATRICES
#define GDL_DEFAULT_MATRICES "data/paper_matrices.json"
#endif

namespace {

// Owns a string returned by the library.
struct Text {
  char* ptr = nullptr;
  ~Text() { gdl_string_free(ptr); }
  char** out() { return &ptr; }
  void print(std::FILE* f = stdout) const {
    if (ptr) std::fputs(ptr, f);
  }
};

struct ConfigHandle {
  gdl_config* ptr = nullptr;
  ~ConfigHandle() { gdl_config_free(ptr); }
};

int report(gdl_status status) {
  if (status != GDL_OK) std::fprintf(stderr, "gdl: %s\n", gdl_last_error());
  return gdl_exit_code(status);
}

int parse_class(const std::string& name) {
  std::string lower;
  for (char c : name) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "normal" || lower == "0") return 0;
  if (lower == "pneumonia" || lower == "1") return 1;
  return -1;
}

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

// Flags shared by commands that take a run configuration.
struct ConfigFlags {
  std::string file;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> order;
  std::optional<int> multiplier;
  std::optional<int> iterations;
  std::optional<int> epochs;
  std::optional<std::string> data;
  std::vector<std::string> overrides;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", file, "JSON run configuration")->check(CLI::ExistingFile);
    cmd->add_option("--seed", seed, "global seed");
    cmd->add_option("--out", out, "output directory");
    cmd->add_option("--order", order, "paper (split after augmenting) or sound (split first)")
        ->check(CLI::IsMember({"paper", "sound"}));
    cmd->add_option("--multiplier", multiplier, "dataset growth factor");
    cmd->add_option("--iterations", iterations, "GAN iterations");
    cmd->add_option("--epochs", epochs, "classifier epochs");
    cmd->add_option("--data", data, "dataset root with Normal/ and Pneumonia/");
    cmd->add_option("--set", overrides, "override KEY=JSON, e.g. --set gan.batch_size=16");
  }

  // Defaults, then the file, then flags.
  gdl_status build(ConfigHandle& cfg) const {
    gdl_status s = file.empty() ? gdl_config_new(&cfg.ptr) : gdl_config_load(file.c_str(), &cfg.ptr);
    auto set = [&](const char* key, const std::string& json) {
      if (s == GDL_OK) s = gdl_config_set(cfg.ptr, key, json.c_str());
    };
    if (seed) set("seed", std::to_string(*seed));
    if (out) set("output_dir", quoted(*out));
    if (order) set("order", quoted(*order));
    if (multiplier) set("multiplier", std::to_string(*multiplier));
    if (iterations) set("gan.iterations", std::to_string(*iterations));
    if (epochs) set("classifier.epochs", std::to_string(*epochs));
    if (data) {
      set("data.source", "\"directory\"");
      set("data.root", quoted(*data));
    }
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos || eq == 0) {
        std::fprintf(stderr, "gdl: --set expects KEY=VALUE, got '%s'\n", kv.c_str());
        return GDL_E_CONFIG;
      }
      set(kv.substr(0, eq).c_str(), kv.substr(eq + 1));
    }
    return s;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GAN-augmented two-class image classification toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", gdl_version());

  auto* ingest = app.add_subcommand("ingest", "decode a dataset directory and write its manifest");
  std::string ingest_data, ingest_out;
  int ingest_size = 64;
  ingest->add_option("--data", ingest_data, "dataset root")->required();
  ingest->add_option("--size", ingest_size, "target image size");
  ingest->add_option("--out", ingest_out, "manifest path (default: stdout)");

  auto* train_gan = app.add_subcommand("train-gan", "train the GAN of one class");
  ConfigFlags gan_flags;
  std::string gan_class;
  gan_flags.attach(train_gan);
  train_gan->add_option("--class", gan_class, "Normal or Pneumonia")->required();

  auto* generate = app.add_subcommand("generate", "sample images from a generator checkpoint");
  std::string gen_ckpt, gen_out = "generated", gen_class;
  int gen_count = 0;
  std::uint64_t gen_seed = 0;
  generate->add_option("--checkpoint", gen_ckpt, "generator checkpoint")->required();
  generate->add_option("--count", gen_count, "number of images")->required();
  generate->add_option("--out", gen_out, "output root; images go to <out>/<Class>/");
  generate->add_option("--seed", gen_seed, "sampling seed");
  generate->add_option("--class", gen_class, "class label, overriding the checkpoint");

  auto* pipeline = app.add_subcommand("pipeline", "subsample, augment, split, fine-tune and evaluate");
  ConfigFlags pipe_flags;
  pipe_flags.attach(pipeline);

  auto* evaluate = app.add_subcommand("evaluate", "score a saved classifier on a dataset directory");
  std::string eval_ckpt, eval_data, eval_out;
  evaluate->add_option("--checkpoint", eval_ckpt, "classifier checkpoint")->required();
  evaluate->add_option("--data", eval_data, "dataset root")->required();
  evaluate->add_option("--out", eval_out, "directory for metrics.txt and confusion.txt");

  auto* verify = app.add_subcommand("verify-tables", "check published tables against their confusion matrices");
  std::string matrices = GDL_DEFAULT_MATRICES;
  verify->add_option("--matrices", matrices, "matrices fixture (JSON)");

  auto* metrics = app.add_subcommand("metrics", "metrics for one confusion matrix");
  std::vector<std::int64_t> counts;
  metrics->add_option("--counts", counts, "PN/AN PN/AP PP/AN PP/AP (rows predicted, columns actual)")
      ->expected(4)
      ->required();

  auto* describe = app.add_subcommand("describe", "summarize a checkpoint or a freshly built model");
  std::string desc_ckpt, desc_kind;
  int desc_size = 64, desc_width = 32, desc_latent = 100;
  describe->add_option("--checkpoint", desc_ckpt, "model checkpoint");
  describe->add_option("--kind", desc_kind, "model kind to build instead");
  describe->add_option("--size", desc_size, "image size for --kind");
  describe->add_option("--width", desc_width, "base channels for --kind");
  describe->add_option("--latent", desc_latent, "latent size for --kind");

  auto* show_config = app.add_subcommand("config", "print the effective run configuration");
  ConfigFlags show_flags;
  show_flags.attach(show_config);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (*ingest) {
    Text manifest;
    std::int64_t records = 0, undecodable = 0;
    const auto s = gdl_ingest(ingest_data.c_str(), ingest_size, ingest_out.empty() ? nullptr : ingest_out.c_str(),
                              &records, &undecodable, manifest.out());
    if (s == GDL_OK) {
      if (ingest_out.empty()) manifest.print();
      std::fprintf(stderr, "ingested %lld images, %lld undecodable\n", static_cast<long long>(records),
                   static_cast<long long>(undecodable));
    }
    return report(s);
  }

  if (*train_gan) {
    const int label = parse_class(gan_class);
    if (label < 0) {
      std::fprintf(stderr, "gdl: unknown class '%s'\n", gan_class.c_str());
      return 1;
    }
    ConfigHandle cfg;
    auto s = gan_flags.build(cfg);
    Text summary;
    if (s == GDL_OK) s = gdl_train_gan(cfg.ptr, label, summary.out());
    summary.print();
    return report(s);
  }

  if (*generate) {
    int label = -1;
    if (!gen_class.empty() && (label = parse_class(gen_class)) < 0) {
      std::fprintf(stderr, "gdl: unknown class '%s'\n", gen_class.c_str());
      return 1;
    }
    std::int64_t written = 0;
    const auto s = gdl_generate(gen_ckpt.c_str(), gen_count, gen_out.c_str(), gen_seed, label, &written);
    if (s == GDL_OK) std::printf("wrote %lld images\n", static_cast<long long>(written));
    return report(s);
  }

  if (*pipeline) {
    ConfigHandle cfg;
    auto s = pipe_flags.build(cfg);
    Text summary, kv, table;
    if (s == GDL_OK) s = gdl_pipeline(cfg.ptr, summary.out(), kv.out(), table.out());
    if (s == GDL_OK) {
      table.print();
      std::printf("\n");
      kv.print();
    }
    return report(s);
  }

  if (*evaluate) {
    Text kv, table;
    const auto s = gdl_evaluate(eval_ckpt.c_str(), eval_data.c_str(), eval_out.empty() ? nullptr : eval_out.c_str(),
                                kv.out(), table.out());
    if (s == GDL_OK) {
      table.print();
      std::printf("\n");
      kv.print();
    }
    return report(s);
  }

  if (*verify) {
    Text text;
    const auto s = gdl_verify_tables(matrices.c_str(), text.out());
    text.print();
    return report(s);
  }

  if (*metrics) {
    Text kv, table;
    const auto s = gdl_metrics_from_counts(counts.data(), kv.out(), table.out());
    if (s == GDL_OK) {
      table.print();
      std::printf("\n");
      kv.print();
    }
    return report(s);
  }

  if (*describe) {
    if (desc_ckpt.empty() == desc_kind.empty()) {
      std::fprintf(stderr, "gdl: describe needs exactly one of --checkpoint or --kind\n");
      return 1;
    }
    gdl_model* model = nullptr;
    auto s = desc_ckpt.empty() ? gdl_model_build(desc_kind.c_str(), desc_size, desc_width, desc_latent, 0, &model)
                               : gdl_model_load(desc_ckpt.c_str(), &model);
    Text json;
    if (s == GDL_OK) s = gdl_model_describe(model, json.out());
    gdl_model_free(model);
    json.print();
    return report(s);
  }

  if (*show_config) {
    ConfigHandle cfg;
    auto s = show_flags.build(cfg);
    Text json;
    if (s == GDL_OK) s = gdl_config_to_json(cfg.ptr, json.out());
    json.print();
    std::printf("\n");
    return report(s);
  }
  return 1;
}
