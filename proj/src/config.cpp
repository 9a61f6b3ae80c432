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

#include "gdl/config.hpp"

#include <fstream>
#include <sstream>

#include "gdl/checksum.hpp"
#include "gdl/error.hpp"
#include "json.hpp"

namespace gdl {

namespace {

using nlohmann::json;

const char* order_key(SplitOrder order) { return order == SplitOrder::kSplitAfterAugment ? "paper" : "sound"; }

SplitOrder parse_order(const std::string& s) {
  if (s == "paper" || s == "split_after_augment") return SplitOrder::kSplitAfterAugment;
  if (s == "sound" || s == "split_before_augment") return SplitOrder::kSplitBeforeAugment;
  fail(ErrorCode::kConfigError, "order must be \"paper\" or \"sound\", got \"" + s + "\"");
}

DType parse_dtype(const std::string& s) {
  if (s == "f32") return DType::kF32;
  if (s == "f64") return DType::kF64;
  fail(ErrorCode::kConfigError, "dtype must be \"f32\" or \"f64\", got \"" + s + "\"");
}

json to_json(const RunConfig& c) {
  const auto& g = c.gan;
  const auto& k = c.classifier;
  return json{
      {"data",
       {{"source", c.data.source == DataSourceKind::kFixture ? "fixture" : "directory"},
        {"root", c.data.root.string()},
        {"fixture", fixture_kind_name(c.data.fixture)},
        {"per_class", c.data.per_class},
        {"noise", c.data.noise},
        {"seed", c.data.seed}}},
      {"output_dir", c.output_dir.string()},
      {"order", order_key(c.order)},
      {"subsample_fraction", c.subsample_fraction},
      {"augment", c.augment},
      {"multiplier", c.multiplier},
      {"image_size", c.image_size},
      {"train_fraction", c.train_fraction},
      {"seed", c.seed},
      {"gan",
       {{"iterations", g.train.iterations},
        {"batch_size", g.train.batch_size},
        {"latent_dim", g.train.latent_dim},
        {"d_steps", g.train.d_steps},
        {"generator_loss", generator_loss_name(g.train.generator_loss)},
        {"base_channels", g.base_channels},
        {"dtype", dtype_name(g.dtype)},
        {"stub", g.stub},
        {"g_lr", g.train.g_optimizer.learning_rate},
        {"d_lr", g.train.d_optimizer.learning_rate},
        {"beta1", g.train.g_optimizer.beta1},
        {"beta2", g.train.g_optimizer.beta2}}},
      {"classifier",
       {{"backbone", model_kind_name(k.backbone)},
        {"base_channels", k.base_channels},
        {"dtype", dtype_name(k.dtype)},
        {"epochs", k.train.epochs},
        {"batch_size", k.train.batch_size},
        {"freeze_backbone", k.train.freeze_backbone},
        {"lr", k.train.optimizer.learning_rate},
        {"beta1", k.train.optimizer.beta1},
        {"beta2", k.train.optimizer.beta2},
        {"init_checkpoint", k.init_checkpoint.string()}}},
  };
}

// Reads keys of `in` into `out` (a fully populated default tree), rejecting
// keys `out` does not have and values of a different JSON type.
void overlay(json& out, const json& in, const std::string& where) {
  if (!in.is_object()) fail(ErrorCode::kConfigError, (where.empty() ? "config" : where) + " must be an object");
  for (const auto& [key, value] : in.items()) {
    const auto path = where.empty() ? key : where + "." + key;
    if (!out.contains(key)) fail(ErrorCode::kConfigError, "unknown config key \"" + path + "\"");
    auto& slot = out[key];
    if (slot.is_object()) {
      overlay(slot, value, path);
    } else if (slot.is_number() && value.is_number()) {
      if ((slot.is_number_integer() || slot.is_number_unsigned()) && value.is_number_float()) {
        fail(ErrorCode::kConfigError, "config key \"" + path + "\" must be an integer");
      }
      if (slot.is_number_unsigned() && value.is_number_integer() && value.get<std::int64_t>() < 0) {
        fail(ErrorCode::kConfigError, "config key \"" + path + "\" must be non-negative");
      }
      slot = value;
    } else if (slot.type() == value.type()) {
      slot = value;
    } else {
      fail(ErrorCode::kConfigError, "config key \"" + path + "\" has type " + std::string(value.type_name()) +
                                        ", expected " + slot.type_name());
    }
  }
}

RunConfig from_json(const json& j) {
  RunConfig c;
  const auto& d = j.at("data");
  const auto source = d.at("source").get<std::string>();
  if (source == "fixture") {
    c.data.source = DataSourceKind::kFixture;
  } else if (source == "directory") {
    c.data.source = DataSourceKind::kDirectory;
  } else {
    fail(ErrorCode::kConfigError, "data.source must be \"directory\" or \"fixture\", got \"" + source + "\"");
  }
  c.data.root = d.at("root").get<std::string>();
  try {
    c.data.fixture = parse_fixture_kind(d.at("fixture").get<std::string>());
  } catch (const Error& e) {
    fail(ErrorCode::kConfigError, std::string("data.fixture: ") + e.what());
  }
  c.data.per_class = d.at("per_class").get<int>();
  c.data.noise = d.at("noise").get<double>();
  c.data.seed = d.at("seed").get<std::uint64_t>();
  c.output_dir = j.at("output_dir").get<std::string>();
  c.order = parse_order(j.at("order").get<std::string>());
  c.subsample_fraction = j.at("subsample_fraction").get<double>();
  c.augment = j.at("augment").get<bool>();
  c.multiplier = j.at("multiplier").get<int>();
  c.image_size = j.at("image_size").get<int>();
  c.train_fraction = j.at("train_fraction").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();

  const auto& g = j.at("gan");
  c.gan.train.iterations = g.at("iterations").get<int>();
  c.gan.train.batch_size = g.at("batch_size").get<int>();
  c.gan.train.latent_dim = g.at("latent_dim").get<int>();
  c.gan.train.d_steps = g.at("d_steps").get<int>();
  try {
    c.gan.train.generator_loss = parse_generator_loss(g.at("generator_loss").get<std::string>());
  } catch (const Error& e) {
    fail(ErrorCode::kConfigError, std::string("gan.generator_loss: ") + e.what());
  }
  c.gan.base_channels = g.at("base_channels").get<int>();
  c.gan.dtype = parse_dtype(g.at("dtype").get<std::string>());
  c.gan.stub = g.at("stub").get<bool>();
  c.gan.train.g_optimizer.learning_rate = g.at("g_lr").get<double>();
  c.gan.train.d_optimizer.learning_rate = g.at("d_lr").get<double>();
  for (auto* opt : {&c.gan.train.g_optimizer, &c.gan.train.d_optimizer}) {
    opt->beta1 = g.at("beta1").get<double>();
    opt->beta2 = g.at("beta2").get<double>();
  }

  const auto& k = j.at("classifier");
  const auto backbone = k.at("backbone").get<std::string>();
  const auto kind = parse_model_kind(backbone);
  if (!kind || !is_backbone(*kind)) fail(ErrorCode::kConfigError, "classifier.backbone: unknown backbone \"" + backbone + "\"");
  c.classifier.backbone = *kind;
  c.classifier.base_channels = k.at("base_channels").get<int>();
  c.classifier.dtype = parse_dtype(k.at("dtype").get<std::string>());
  c.classifier.train.epochs = k.at("epochs").get<int>();
  c.classifier.train.batch_size = k.at("batch_size").get<int>();
  c.classifier.train.freeze_backbone = k.at("freeze_backbone").get<bool>();
  c.classifier.train.optimizer.learning_rate = k.at("lr").get<double>();
  c.classifier.train.optimizer.beta1 = k.at("beta1").get<double>();
  c.classifier.train.optimizer.beta2 = k.at("beta2").get<double>();
  c.classifier.init_checkpoint = k.at("init_checkpoint").get<std::string>();
  return c;
}

json parse_json(std::string_view text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kConfigError, what + " is not valid JSON: " + e.what());
  }
}

RunConfig overlay_config(const RunConfig& base, const json& patch) {
  json tree = to_json(base);
  overlay(tree, patch, "");
  try {
    return from_json(tree);
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfigError, e.what());
  }
}

}  // namespace

RunConfig parse_run_config(std::string_view json_text, const RunConfig& base) {
  return overlay_config(base, parse_json(json_text, "config"));
}

RunConfig load_run_config(const std::filesystem::path& path, const RunConfig& base) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kConfigError, "cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return overlay_config(base, parse_json(buf.str(), "config file " + path.string()));
}

void set_config_value(RunConfig& config, std::string_view key, std::string_view json_value) {
  if (key.empty()) fail(ErrorCode::kConfigError, "empty config key");
  json value = parse_json(json_value, "value for " + std::string(key));
  json patch = value;
  std::string k(key);
  for (auto pos = k.rfind('.');; pos = k.rfind('.')) {
    const auto leaf = pos == std::string::npos ? k : k.substr(pos + 1);
    patch = json{{leaf, patch}};
    if (pos == std::string::npos) break;
    k.resize(pos);
  }
  config = overlay_config(config, patch);
}

std::string run_config_json(const RunConfig& config, int indent) { return to_json(config).dump(indent); }

void validate_run_config(const RunConfig& c) {
  auto bad = [](const std::string& m) { fail(ErrorCode::kConfigError, m); };
  if (c.data.source == DataSourceKind::kDirectory && c.data.root.empty()) bad("data.root is required for a directory source");
  if (c.data.per_class < 1) bad("data.per_class must be >= 1");
  if (c.data.noise < 0) bad("data.noise must be >= 0");
  if (!(c.subsample_fraction > 0 && c.subsample_fraction <= 1)) bad("subsample_fraction must lie in (0, 1]");
  if (c.multiplier < 1) bad("multiplier must be >= 1");
  if (!(c.train_fraction > 0 && c.train_fraction < 1)) bad("train_fraction must lie in (0, 1)");
  if (c.image_size < 8) bad("image_size must be >= 8");
  if (c.gan.train.iterations < 0) bad("gan.iterations must be >= 0");
  if (c.gan.train.batch_size < 1) bad("gan.batch_size must be >= 1");
  if (c.gan.train.latent_dim < 1) bad("gan.latent_dim must be >= 1");
  if (c.gan.train.d_steps < 1) bad("gan.d_steps must be >= 1");
  if (c.gan.base_channels < 1) bad("gan.base_channels must be >= 1");
  if (c.classifier.train.epochs < 0) bad("classifier.epochs must be >= 0");
  if (c.classifier.train.batch_size < 1) bad("classifier.batch_size must be >= 1");
  if (!is_backbone(c.classifier.backbone)) bad("classifier.backbone must name a classifier backbone");
}

std::uint64_t phase_seed(std::uint64_t global_seed, std::string_view phase) {
  Fnv1a h;
  h.update(phase);
  // splitmix64 finaliser over the mixed value.
  std::uint64_t z = global_seed ^ h.digest();
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace gdl
