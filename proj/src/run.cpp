#include "sslkit/run.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

#include "sslkit/checkpoint.hpp"
#include "sslkit/errors.hpp"

namespace sslkit {

namespace fs = std::filesystem;

nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": invalid JSON: " + e.what());
  }
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
}

namespace {

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory " + dir.string() + ": " + ec.message());
}

// Exclusive lock on a run directory, released on scope exit.
class RunLock {
 public:
  explicit RunLock(const fs::path& dir) : path_(dir / ".lock") {
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
      throw DataError("run directory " + dir.string() + " is locked by another process (" +
                      path_.string() + " exists)");
    }
    const std::string pid = std::to_string(::getpid()) + "\n";
    if (::write(fd, pid.data(), pid.size()) < 0) {
      // The pid is informational; the lock is the file itself.
    }
    ::close(fd);
  }
  ~RunLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  fs::path path_;
};

struct Split {
  LabeledDataset train;
  LabeledDataset eval;
};

Split split_dataset(const LabeledDataset& data, const std::optional<fs::path>& foldplan, std::size_t fold) {
  if (!foldplan) return {data, data};
  const FoldPlan plan = fold_plan_from_json(read_json_file(*foldplan));
  if (plan.assignments.size() != data.size()) {
    throw DataError("fold plan " + foldplan->string() + " covers " + std::to_string(plan.assignments.size()) +
                    " samples, dataset has " + std::to_string(data.size()));
  }
  if (fold >= plan.k) {
    throw ConfigError("fold: " + std::to_string(fold) + " outside [0, " + std::to_string(plan.k) + ")");
  }
  return {data.subset(plan.train_indices(fold)), data.subset(plan.fold_indices(fold))};
}

fs::path checkpoint_path(const fs::path& dir, std::size_t epoch) {
  return dir / ("epoch_" + std::to_string(epoch) + ".ckpt");
}

}  // namespace

TrainConfig resolve_config(const std::string& preset, const nlohmann::json& file_config,
                           const nlohmann::json& overrides) {
  std::string name = preset;
  if (name.empty() && file_config.is_object() && file_config.contains("preset")) {
    if (!file_config["preset"].is_string()) throw ConfigError("preset: expected a string");
    name = file_config["preset"].get<std::string>();
  }
  TrainConfig config = preset_config(name);
  if (!file_config.is_null()) config = train_config_from_json(file_config, config);
  if (!overrides.is_null()) config = train_config_from_json(overrides, config);
  config.validate();
  return config;
}

std::string cmd_generate(const GenerateOptions& options) {
  SyntheticSpec spec;
  if (!options.preset.empty()) {
    if (options.preset != "marrow-longtail") {
      throw ConfigError("preset: unknown value '" + options.preset + "'; allowed: marrow-longtail");
    }
    if (options.spec_file) throw ConfigError("--preset and --spec are mutually exclusive");
    spec = marrow_longtail_spec();
  } else if (options.spec_file) {
    try {
      spec = synthetic_spec_from_json(read_json_file(*options.spec_file));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(options.spec_file->string() + ": " + e.what());
    }
  } else {
    throw ConfigError("generate needs --spec or --preset");
  }
  const LabeledDataset data = generate_synthetic(spec, options.seed);
  if (options.packed) {
    if (options.out.has_parent_path()) ensure_dir(options.out.parent_path());
    write_packed(options.out, data);
  } else {
    write_dataset_dir(options.out, data);
  }
  return data.fingerprint();
}

FoldPlan cmd_split(const SplitOptions& options) {
  const LabeledDataset data = load_dataset(options.dataset);
  const FoldPlan plan = stratified_kfold(data, options.k, options.seed);
  fs::path out = options.out;
  if (fs::is_directory(out) || (!out.empty() && out.extension().empty())) {
    ensure_dir(out);
    out /= "foldplan.json";
  } else if (out.has_parent_path()) {
    ensure_dir(out.parent_path());
  }
  write_text_file(out, fold_plan_to_json(plan).dump(2) + "\n");
  return plan;
}

TrainHistory cmd_train(const TrainOptions& options) {
  const nlohmann::json file_config =
      options.config_file ? read_json_file(*options.config_file) : nlohmann::json(nullptr);
  nlohmann::json overrides = options.overrides;
  if (options.seed) overrides["seed"] = *options.seed;
  const TrainConfig config = resolve_config(options.preset, file_config, overrides);

  const LabeledDataset data = load_dataset(options.dataset);
  const Split split = split_dataset(data, options.foldplan, options.fold);
  if (split.train.empty()) throw DataError("empty training fold");

  ensure_dir(options.out);
  RunLock lock(options.out);
  const fs::path ckpt_dir = options.out / "checkpoints";
  ensure_dir(ckpt_dir);

  const nlohmann::json config_json = train_config_to_json(config);
  nlohmann::json manifest = {
      {"command", options.command_line},
      {"config", config_json},
      {"dataset", {{"path", options.dataset.string()}, {"fingerprint", data.fingerprint()}, {"size", data.size()}}},
      {"foldplan", options.foldplan ? nlohmann::json(options.foldplan->string()) : nlohmann::json(nullptr)},
      {"fold", options.foldplan ? nlohmann::json(options.fold) : nlohmann::json(nullptr)},
      {"code_version", kCodeVersion},
      {"started_at", utc_now()},
  };
  write_text_file(options.out / "manifest.json", manifest.dump(2) + "\n");
  write_text_file(options.out / "config.json", config_json.dump(2) + "\n");

  // Supervised runs validate on the held-out fold; the self-supervised
  // regimes only see the training fold.
  const LabeledDataset validation = options.foldplan ? split.eval : LabeledDataset{};

  TrainHistory seen;
  std::optional<std::size_t> best_epoch;
  std::optional<double> best_metric;
  std::vector<std::size_t> kept;
  std::ostringstream timing;
  timing << "epoch,seconds\n";
  auto on_epoch = [&](const EpochRecord& rec, const TrainedModel& model) {
    seen.epochs.push_back(rec);
    save_checkpoint(checkpoint_path(ckpt_dir, rec.epoch), Checkpoint{model, config_json, rec.epoch, rec.metric});
    if (!best_epoch || (rec.metric && (!best_metric || *rec.metric > *best_metric))) {
      best_epoch = rec.epoch;
      best_metric = rec.metric;
    }
    // Keep the last and the best checkpoint only.
    std::erase_if(kept, [&](std::size_t e) {
      if (e == rec.epoch || e == *best_epoch) return false;
      fs::remove(checkpoint_path(ckpt_dir, e));
      return true;
    });
    kept.push_back(rec.epoch);
    write_text_file(options.out / "history.csv", seen.to_csv(false));
    timing << rec.epoch << ',' << format_double(rec.seconds) << '\n';
    write_text_file(options.out / "timing.csv", timing.str());
    if (options.verbose) {
      std::fprintf(stderr, "epoch %zu/%zu loss %.6f%s%s (%.1fs)\n", rec.epoch, config.epochs, rec.loss,
                   rec.metric ? " val-macro-f1 " : "", rec.metric ? format_double(*rec.metric).c_str() : "",
                   rec.seconds);
    }
  };
  TrainResult result = train(config, split.train, validation, on_epoch);

  save_checkpoint(options.out / "model.ckpt",
                  Checkpoint{result.model, config_json, config.epochs, result.history.epochs.back().metric});
  if (result.model.classifier && !validation.empty()) {
    const MetricsReport report =
        evaluate_model(result.model.encoder, *result.model.classifier, result.model.standardization, validation);
    write_text_file(options.out / "metrics.json", metrics_to_json(report).dump(2) + "\n");
  }
  manifest["best_epoch"] = best_epoch ? nlohmann::json(*best_epoch) : nlohmann::json(nullptr);
  manifest["finished_at"] = utc_now();
  write_text_file(options.out / "manifest.json", manifest.dump(2) + "\n");
  return result.history;
}

ProbeResult cmd_probe(const ProbeOptions& options) {
  Checkpoint ck = load_checkpoint(options.checkpoint);
  TrainConfig base;
  if (ck.config.is_object()) base = train_config_from_json(ck.config);
  if (!options.overrides.empty()) base = train_config_from_json({{"probe", options.overrides}}, base);
  const ProbeConfig probe = base.probe;
  const LabeledDataset data = load_dataset(options.dataset);
  if (data.num_classes() != ck.model.class_names.size() && !ck.model.class_names.empty() &&
      ck.model.regime == Regime::kSupervised) {
    throw DataError("dataset has " + std::to_string(data.num_classes()) + " classes, checkpoint " +
                    std::to_string(ck.model.class_names.size()));
  }
  const Split split = split_dataset(data, options.foldplan, options.fold);
  if (!options.foldplan) std::fprintf(stderr, "warning: no fold plan; probing and scoring on the same data\n");

  const std::string before = encoder_fingerprint(ck.model.encoder);
  ProbeResult result = linear_probe(ck.model.encoder, ck.model.standardization, split.train, split.eval, probe,
                                    options.seed);
  if (encoder_fingerprint(ck.model.encoder) != before) throw std::logic_error("probe modified the encoder");

  ensure_dir(options.out);
  nlohmann::json metrics = metrics_to_json(result.report);
  metrics["encoder_fingerprint"] = before;
  write_text_file(options.out / "metrics.json", metrics.dump(2) + "\n");
  Checkpoint probed = ck;
  probed.model.classifier = result.head;
  probed.model.class_names = data.class_names();
  probed.metric = result.report.macro_f1;
  save_checkpoint(options.out / "probe.ckpt", probed);
  if (options.export_embeddings) export_embeddings(ck.model.encoder, ck.model.standardization, data, *options.export_embeddings);
  return result;
}

MetricsReport cmd_evaluate(const EvaluateOptions& options) {
  const Checkpoint ck = load_checkpoint(options.checkpoint);
  if (!ck.model.classifier) {
    throw DataError(options.checkpoint.string() + " has no classifier head; run probe first");
  }
  const LabeledDataset data = load_dataset(options.dataset);
  const Split split = split_dataset(data, options.foldplan, options.fold);
  if (split.eval.empty()) throw DataError("empty evaluation fold");
  const MetricsReport report =
      evaluate_model(ck.model.encoder, *ck.model.classifier, ck.model.standardization, split.eval);
  ensure_dir(options.out);
  write_text_file(options.out / "metrics.json", metrics_to_json(report).dump(2) + "\n");
  std::cout << metrics_to_text(report);
  return report;
}

}  // namespace sslkit
