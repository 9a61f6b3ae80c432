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

#include "gdl/commands.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "gdl/augment.hpp"
#include "gdl/checkpoint.hpp"
#include "gdl/checksum.hpp"
#include "gdl/error.hpp"
#include "json.hpp"

namespace gdl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string lower_class(int label) { return label == kNormal ? "normal" : "pneumonia"; }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIoError, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorCode::kIoError, "write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIoError, "cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Dataset class_subset(const Dataset& ds, int label) {
  Dataset out;
  out.image_size = ds.image_size;
  for (const auto& r : ds.records)
    if (r.label == label) out.records.push_back(r);
  return out;
}

json counts_json(const SplitCounts& c) {
  return {{"total", c.total}, {"normal", c.normal}, {"pneumonia", c.pneumonia}, {"real", c.real},
          {"synthetic", c.synthetic}};
}

json metrics_json(const MetricsReport& r) {
  auto opt = [](const Ratio& v) { return v ? json(*v) : json(nullptr); };
  const auto& c = r.matrix.counts;
  return {{"confusion", {{c[0][0], c[0][1]}, {c[1][0], c[1][1]}}},
          {"accuracy", r.accuracy},
          {"precision", {opt(r.precision[0]), opt(r.precision[1])}},
          {"recall", {opt(r.recall[0]), opt(r.recall[1])}},
          {"macro_precision", r.macro_precision},
          {"macro_recall", r.macro_recall},
          {"f1", r.f1},
          {"paper_precision", r.paper_precision},
          {"paper_recall", r.paper_recall}};
}

ModelOptions gan_options(const RunConfig& c, std::uint64_t seed) {
  ModelOptions o;
  o.image_size = c.image_size;
  o.latent_dim = c.gan.train.latent_dim;
  o.base_channels = c.gan.base_channels;
  o.dtype = c.gan.dtype;
  o.seed = seed;
  return o;
}

struct GanOutcome {
  ModelGraph generator;
  ModelGraph discriminator;
  TrainingReport report;
};

// Trains (or, for a stub, just builds) the GAN of one class.
GanOutcome train_class_gan(const RunConfig& c, const Dataset& class_data, int label,
                           const std::optional<fs::path>& log) {
  const auto tag = lower_class(label);
  GanOutcome out{build_generator(gan_options(c, phase_seed(c.seed, "gan-g-" + tag))),
                 build_discriminator(gan_options(c, phase_seed(c.seed, "gan-d-" + tag))), {}};
  if (c.gan.stub) {
    out.generator.set_trained(true);
    return out;
  }
  auto cfg = c.gan.train;
  cfg.seed = phase_seed(c.seed, "gan-train-" + tag);
  cfg.log_path = log;
  out.report = train_gan(out.generator, out.discriminator, class_data, cfg);
  return out;
}

json gan_report_json(const TrainingReport& r, bool stub) {
  if (stub) return {{"stub", true}};
  return {{"iterations", r.g_loss.size()},
          {"final_d_real", tail_mean(r.d_real)},
          {"final_d_fake", tail_mean(r.d_fake)},
          {"final_g_loss", tail_mean(r.g_loss)},
          {"final_d_loss", tail_mean(r.d_loss)},
          {"checksum", hex64(r.checksum)}};
}

// Moves the files in `from` into `to`, replacing same-named entries.
void move_contents(const fs::path& from, const fs::path& to) {
  fs::create_directories(to);
  for (const auto& entry : fs::directory_iterator(from)) {
    const auto target = to / entry.path().filename();
    fs::remove_all(target);
    fs::rename(entry.path(), target);
  }
  fs::remove_all(from);
}

}  // namespace

SplitCounts count_split(const Dataset& ds) {
  SplitCounts c;
  c.total = ds.size();
  c.normal = ds.count_label(kNormal);
  c.pneumonia = ds.count_label(kPneumonia);
  c.real = ds.count_provenance(Provenance::kReal);
  c.synthetic = ds.count_provenance(Provenance::kSynthetic);
  return c;
}

LoadedData load_run_data(const RunConfig& c) {
  LoadedData out;
  if (c.data.source == DataSourceKind::kFixture) {
    out.loaded = synth_fixture_dataset(c.data.fixture, c.data.per_class, c.image_size, c.data.noise, c.data.seed);
  } else {
    auto loaded = load_image_directory(c.data.root, c.image_size);
    out.loaded = std::move(loaded.dataset);
    out.undecodable = std::move(loaded.undecodable);
  }
  out.subsampled = c.subsample_fraction >= 1.0
                       ? out.loaded
                       : subsample_fraction(out.loaded, c.subsample_fraction, phase_seed(c.seed, "subsample"));
  return out;
}

IngestResult cmd_ingest(const fs::path& root, int image_size, const std::optional<fs::path>& manifest_out) {
  auto loaded = load_image_directory(root, image_size);
  IngestResult r{std::move(loaded.dataset), std::move(loaded.undecodable), {}};
  r.manifest = dataset_manifest(r.dataset);
  if (manifest_out) write_text(*manifest_out, r.manifest);
  return r;
}

GanCommandResult cmd_train_gan(const RunConfig& config, int label) {
  validate_run_config(config);
  if (label != kNormal && label != kPneumonia) fail(ErrorCode::kConfigError, "class must be Normal or Pneumonia");
  const auto data = load_run_data(config);
  const auto class_data = class_subset(data.subsampled, label);
  if (class_data.empty()) fail(ErrorCode::kEmptyDataset, std::string("no ") + kClassNames[label] + " images");
  fs::create_directories(config.output_dir);
  const auto tag = lower_class(label);
  GanCommandResult r;
  r.log = config.output_dir / ("gan_" + tag + ".jsonl");
  auto gan = train_class_gan(config, class_data, label, r.log);
  r.report = gan.report;
  r.generator_checkpoint = config.output_dir / ("generator_" + tag + ".gdlc");
  r.discriminator_checkpoint = config.output_dir / ("discriminator_" + tag + ".gdlc");
  auto archive = model_archive(gan.generator);
  archive.add("meta/class_label", Tensor::scalar(label, DType::kF64));
  save_checkpoint(archive, r.generator_checkpoint);
  save_model(gan.discriminator, r.discriminator_checkpoint);
  return r;
}

std::vector<fs::path> cmd_generate(const fs::path& checkpoint, int count, const fs::path& out_dir,
                                   std::uint64_t seed, std::optional<int> label) {
  if (count < 0) fail(ErrorCode::kConfigError, "count must be >= 0");
  const auto archive = load_checkpoint(checkpoint);
  auto generator = std::make_shared<ModelGraph>(model_from_archive(archive));
  if (generator->metadata().kind != ModelKind::kGenerator) {
    fail(ErrorCode::kConfigError, checkpoint.string() + " does not hold a generator");
  }
  if (!label) {
    if (!archive.contains("meta/class_label")) {
      fail(ErrorCode::kConfigError, "checkpoint carries no class; pass the class explicitly");
    }
    label = static_cast<int>(archive.at("meta/class_label").item());
  }
  if (*label != kNormal && *label != kPneumonia) fail(ErrorCode::kCorruptArchive, "checkpoint class is not 0 or 1");
  std::vector<fs::path> written;
  if (count == 0) return written;
  AugmentationPlan plan;
  plan.synthetic_counts[static_cast<std::size_t>(*label)] = static_cast<std::size_t>(count);
  plan.generators[static_cast<std::size_t>(*label)] = generator;
  plan.seed = seed;
  const auto images = generate_synthetic(plan, generator->metadata().image_size);
  const auto dir = out_dir / kClassNames[static_cast<std::size_t>(*label)];
  fs::create_directories(dir);
  for (const auto& rec : images.records) {
    auto path = dir / (fs::path(rec.id).filename().string() + ".png");
    write_png(path, rec.pixels, images.image_size);
    written.push_back(path);
  }
  return written;
}

PipelineResult run_pipeline(const RunConfig& config) {
  validate_run_config(config);
  const fs::path out_dir = config.output_dir;
  const fs::path staging = out_dir / ".staging";
  fs::create_directories(out_dir);
  fs::remove_all(staging);
  fs::create_directories(staging / "checkpoints");
  std::string phase = "load";
  const auto start = std::chrono::steady_clock::now();

  try {
    write_text(staging / "config.json", run_config_json(config) + "\n");
    PipelineResult r;
    r.output_dir = out_dir;
    const auto data = load_run_data(config);
    r.loaded = count_split(data.loaded);
    r.subsampled = count_split(data.subsampled);

    const bool paper = config.order == SplitOrder::kSplitAfterAugment;
    const bool use_gan = config.augment && config.multiplier > 1;
    r.gan_used = use_gan;
    SplitSpec split;
    split.train_fraction = config.train_fraction;
    split.seed = phase_seed(config.seed, "split");
    split.order = config.order;

    json gan_summary = json::object();
    // Grows `real` to multiplier x with per-class GANs trained on it.
    auto augment = [&](const Dataset& real) {
      if (!use_gan) return Dataset{real.image_size, {}};
      phase = "gan";
      auto plan = plan_augmentation(real, config.multiplier, phase_seed(config.seed, "synthesis"));
      for (int label = 0; label < 2; ++label) {
        const auto tag = lower_class(label);
        auto gan = train_class_gan(config, class_subset(real, label), label, staging / ("gan_" + tag + ".jsonl"));
        gan_summary[tag] = gan_report_json(gan.report, config.gan.stub);
        auto archive = model_archive(gan.generator);
        archive.add("meta/class_label", Tensor::scalar(label, DType::kF64));
        save_checkpoint(archive, staging / "checkpoints" / ("generator_" + tag + ".gdlc"));
        save_model(gan.discriminator, staging / "checkpoints" / ("discriminator_" + tag + ".gdlc"));
        plan.generators[static_cast<std::size_t>(label)] = std::make_shared<ModelGraph>(std::move(gan.generator));
      }
      phase = "augment";
      return generate_synthetic(plan, config.image_size);
    };

    Dataset train, test;
    if (paper) {
      const auto synthetic = augment(data.subsampled);
      r.synthetic = count_split(synthetic);
      const auto merged = merge_datasets(data.subsampled, synthetic);
      r.merged = count_split(merged);
      phase = "split";
      std::tie(train, test) = split_dataset(merged, split);
    } else {
      phase = "split";
      Dataset train_real;
      std::tie(train_real, test) = split_dataset(data.subsampled, split);
      const auto synthetic = augment(train_real);
      r.synthetic = count_split(synthetic);
      train = merge_datasets(train_real, synthetic);
      r.merged = count_split(train);
    }
    r.train = count_split(train);
    r.test = count_split(test);

    phase = "classifier";
    ModelOptions mo;
    mo.image_size = config.image_size;
    mo.base_channels = config.classifier.base_channels;
    mo.dtype = config.classifier.dtype;
    mo.seed = phase_seed(config.seed, "classifier-init");
    ModelGraph model = build_backbone(config.classifier.backbone, mo);
    if (!config.classifier.init_checkpoint.empty()) {
      auto loaded = load_model(config.classifier.init_checkpoint);
      if (loaded.metadata().kind != config.classifier.backbone || loaded.metadata().image_size != config.image_size) {
        fail(ErrorCode::kConfigError, "classifier.init_checkpoint holds a " +
                                          std::string(model_kind_name(loaded.metadata().kind)) + " for " +
                                          std::to_string(loaded.metadata().image_size) + " px images");
      }
      model = std::move(loaded);
    }
    auto ccfg = config.classifier.train;
    ccfg.seed = phase_seed(config.seed, "classifier-train");
    ccfg.log_path = staging / "classifier.jsonl";
    const auto creport = train_classifier(model, train, ccfg);
    save_model(model, staging / "checkpoints" / "classifier.gdlc");

    phase = "evaluate";
    const auto predicted = predict(model, test);
    const auto actual = test.labels();
    r.metrics = metrics_report(confusion_from_predictions(predicted, actual));
    r.metrics_text = metrics_key_values(r.metrics);
    r.confusion_table = render_confusion_table(r.metrics.matrix);

    json summary = {
        {"order", paper ? "paper" : "sound"},
        {"seed", config.seed},
        {"multiplier", config.multiplier},
        {"gan_used", use_gan},
        {"counts",
         {{"loaded", counts_json(r.loaded)},
          {"undecodable", data.undecodable.size()},
          {"subsampled", counts_json(r.subsampled)},
          {"synthetic", counts_json(r.synthetic)},
          {"merged", counts_json(r.merged)},
          {"train", counts_json(r.train)},
          {"test", counts_json(r.test)}}},
        {"gan", gan_summary},
        {"classifier",
         {{"backbone", model_kind_name(config.classifier.backbone)},
          {"epochs", creport.loss.size()},
          {"final_loss", creport.loss.empty() ? json(nullptr) : json(creport.loss.back())},
          {"checksum", hex64(creport.checksum)}}},
        {"metrics", metrics_json(r.metrics)},
    };
    r.summary_json = summary.dump(2) + "\n";
    write_text(staging / "summary.json", r.summary_json);
    write_text(staging / "metrics.txt", r.metrics_text);
    write_text(staging / "confusion.txt", r.confusion_table);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_text(staging / "timing.json", json{{"wall_seconds", seconds}}.dump() + "\n");

    fs::remove_all(out_dir / "failed");
    move_contents(staging, out_dir);
    return r;
  } catch (const Error& e) {
    std::error_code ec;
    const auto failed = out_dir / "failed";
    fs::remove_all(failed, ec);
    fs::rename(staging, failed, ec);
    if (!ec) {
      std::ofstream(failed / "error.json")
          << json{{"phase", phase}, {"code", error_code_name(e.code())}, {"message", e.what()}}.dump(2) << "\n";
    }
    throw;
  }
}

EvaluateResult cmd_evaluate(const fs::path& checkpoint, const fs::path& data_root,
                            const std::optional<fs::path>& out_dir) {
  auto model = load_model(checkpoint);
  if (!is_backbone(model.metadata().kind)) {
    fail(ErrorCode::kConfigError, checkpoint.string() + " does not hold a classifier");
  }
  const auto data = load_image_directory(data_root, model.metadata().image_size).dataset;
  const auto predicted = predict(model, data);
  const auto actual = data.labels();
  EvaluateResult r;
  r.metrics = metrics_report(confusion_from_predictions(predicted, actual));
  r.metrics_text = metrics_key_values(r.metrics);
  r.confusion_table = render_confusion_table(r.metrics.matrix);
  if (out_dir) {
    fs::create_directories(*out_dir);
    write_text(*out_dir / "metrics.txt", r.metrics_text);
    write_text(*out_dir / "confusion.txt", r.confusion_table);
  }
  return r;
}

TableVerification verify_tables_text(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kMalformedInput, std::string("matrices file: ") + e.what());
  }
  TableVerification v;
  std::ostringstream out;
  try {
    const double tol = doc.value("tolerance_pp", 0.05);
    auto anomalous = [&](const std::string& model, const std::string& table, const std::string& field) {
      if (!doc.contains("known_anomalies")) return false;
      for (const auto& a : doc.at("known_anomalies")) {
        if (a.at("model") == model && a.at("table") == table && a.at("field") == field) return true;
      }
      return false;
    };
    const auto& models = doc.at("models");
    if (!models.is_array() || models.empty()) fail(ErrorCode::kMalformedInput, "\"models\" must be a non-empty array");
    for (std::size_t i = 0; i < models.size(); ++i) {
      const auto& m = models[i];
      const auto name = m.at("name").get<std::string>();
      const auto& mat = m.at("matrix");
      if (!mat.is_array() || mat.size() != 2 || mat[0].size() != 2 || mat[1].size() != 2) {
        fail(ErrorCode::kMalformedInput, "models[" + std::to_string(i) + "].matrix must be 2x2");
      }
      const auto cm = make_confusion(mat[0][0].get<std::int64_t>(), mat[0][1].get<std::int64_t>(),
                                     mat[1][0].get<std::int64_t>(), mat[1][1].get<std::int64_t>());
      const auto r = metrics_report(cm);
      std::vector<std::tuple<std::string, std::string, double>> computed = {
          {"table1", "normal", r.precision[0].value_or(0.0)},
          {"table1", "pneumonia", r.precision[1].value_or(0.0)},
          {"table1", "total", r.accuracy},
          {"table2", "precision", r.paper_precision},
          {"table2", "recall", r.paper_recall},
          {"table2", "f1", r.f1},
      };
      for (const auto& [table, field, value] : computed) {
        if (!m.contains(table) || !m.at(table).contains(field)) continue;
        const double expected = m.at(table).at(field).get<double>();
        const double got = value * 100.0;
        const bool ok = std::abs(got - expected) <= tol + 1e-9;
        char line[200];
        const char* status = ok ? "ok" : (anomalous(name, table, field) ? "known-anomaly" : "MISMATCH");
        std::snprintf(line, sizeof line, "%-11s %-6s %-9s expected %6.2f computed %7.3f  %s\n", name.c_str(),
                      table.c_str(), field.c_str(), expected, got, status);
        out << line;
        ++v.checked;
        if (!ok) ++(anomalous(name, table, field) ? v.known_anomalies : v.mismatches);
      }
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kMalformedInput, std::string("matrices file: ") + e.what());
  }
  out << "checked " << v.checked << ", mismatches " << v.mismatches << ", known anomalies " << v.known_anomalies
      << "\n";
  v.report = out.str();
  return v;
}

TableVerification cmd_verify_tables(const fs::path& matrices_file) {
  return verify_tables_text(read_text(matrices_file));
}

}  // namespace gdl
