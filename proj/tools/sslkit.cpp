// sslkit command-line entry point.
#include <cstdio>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "sslkit/errors.hpp"
#include "sslkit/run.hpp"

namespace {

using sslkit::ConfigError;

std::string config_help() {
  std::ostringstream out;
  out << "\nConfig fields (JSON config file, or --set field=value):\n";
  for (const auto& f : sslkit::config_field_info()) {
    out << "  " << f.name << ": " << f.description;
    if (!f.paper_value.empty()) out << " [paper: " << f.paper_value << "]";
    out << '\n';
  }
  out << "Presets:";
  for (const auto& p : sslkit::preset_names()) out << ' ' << p;
  out << "\nExit codes: 0 ok, 2 config error, 3 data error, 4 numerical failure.\n"
         "SSLKIT_THREADS caps worker threads.\n";
  return out.str();
}

// "a.b=v" -> {"a": {"b": v}}; v is parsed as JSON when possible.
void apply_set(nlohmann::json& target, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects field=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  nlohmann::json* node = &target;
  std::size_t start = 0;
  for (std::size_t dot; (dot = key.find('.', start)) != std::string::npos; start = dot + 1) {
    node = &(*node)[key.substr(start, dot - start)];
    if (!node->is_object()) *node = nlohmann::json::object();
  }
  (*node)[key.substr(start)] = value;
}

std::string joined_args(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) s += (i ? " " : "") + std::string(argv[i]);
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sslkit: supervised, SwAV and supervised-contrastive training on labeled image sets"};
  app.require_subcommand(1);
  app.footer(config_help());

  // generate
  sslkit::GenerateOptions gen;
  std::string gen_spec;
  auto* generate = app.add_subcommand("generate", "Render a synthetic labeled dataset");
  generate->add_option("--spec", gen_spec, "JSON dataset spec");
  generate->add_option("--preset", gen.preset, "Built-in spec: marrow-longtail (21 classes, supports / 10)");
  generate->add_option("--seed", gen.seed, "Root seed")->default_val(0);
  generate->add_option("--out", gen.out, "Output directory (or .imset file with --packed)")->required();
  generate->add_flag("--packed", gen.packed, "Write one packed .imset file");
  generate->footer(config_help());

  // split
  sslkit::SplitOptions split;
  auto* split_cmd = app.add_subcommand("split", "Write a stratified k-fold plan");
  split_cmd->add_option("--dataset", split.dataset, "Dataset directory or .imset file")->required();
  split_cmd->add_option("-k,--folds", split.k, "Number of folds")->default_val(5);
  split_cmd->add_option("--seed", split.seed, "Root seed")->default_val(0);
  split_cmd->add_option("--out", split.out, "Output file or directory")->required();
  split_cmd->footer(config_help());

  // train
  sslkit::TrainOptions tr;
  std::string tr_config, tr_foldplan, tr_regime;
  std::uint64_t tr_seed = 0;
  std::vector<std::string> tr_sets;
  std::size_t tr_epochs = 0;
  auto* train = app.add_subcommand("train", "Train a model into a run directory");
  train->add_option("--config", tr_config, "JSON config file (may contain a \"preset\" field)");
  train->add_option("--preset", tr.preset, "Preset applied before config fields");
  train->add_option("--regime", tr_regime, "supervised | swav | supcon");
  train->add_option("--epochs", tr_epochs, "Override epochs");
  train->add_option("--set", tr_sets, "Override a config field: field=value (nested: encoder.embedding_dim=128)");
  train->add_option("--dataset", tr.dataset, "Dataset directory or .imset file")->required();
  train->add_option("--foldplan", tr_foldplan, "Fold plan JSON; the selected fold is held out");
  train->add_option("--fold", tr.fold, "Held-out fold index")->default_val(0);
  auto* tr_seed_opt = train->add_option("--seed", tr_seed, "Root seed (overrides the config)");
  train->add_option("--out", tr.out, "Run directory")->required();
  train->add_flag("!--quiet", tr.verbose, "Suppress per-epoch progress");
  train->footer(config_help());

  // probe
  sslkit::ProbeOptions pr;
  std::string pr_foldplan, pr_export;
  std::vector<std::string> pr_sets;
  auto* probe = app.add_subcommand("probe", "Fit a linear classifier on frozen encoder features");
  probe->add_option("--checkpoint", pr.checkpoint, "Checkpoint file")->required();
  probe->add_option("--dataset", pr.dataset, "Dataset directory or .imset file")->required();
  probe->add_option("--foldplan", pr_foldplan, "Fold plan JSON; the selected fold is scored");
  probe->add_option("--fold", pr.fold, "Held-out fold index")->default_val(0);
  probe->add_option("--set", pr_sets, "Override a probe field: field=value");
  probe->add_option("--seed", pr.seed, "Root seed")->default_val(0);
  probe->add_option("--out", pr.out, "Output directory")->required();
  probe->add_option("--export-embeddings", pr_export, "Write sample_id,label,z_1..z_d CSV for the whole dataset");
  probe->footer(config_help());

  // evaluate
  sslkit::EvaluateOptions ev;
  std::string ev_foldplan;
  std::uint64_t ev_seed = 0;
  auto* evaluate = app.add_subcommand("evaluate", "Score a checkpoint with a classifier head");
  evaluate->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
  evaluate->add_option("--dataset", ev.dataset, "Dataset directory or .imset file")->required();
  evaluate->add_option("--foldplan", ev_foldplan, "Fold plan JSON; the selected fold is scored");
  evaluate->add_option("--fold", ev.fold, "Held-out fold index")->default_val(0);
  evaluate->add_option("--seed", ev_seed, "Accepted for uniformity; evaluation draws no randomness");
  evaluate->add_option("--out", ev.out, "Output directory")->required();
  evaluate->footer(config_help());

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*generate) {
      if (!gen_spec.empty()) gen.spec_file = gen_spec;
      std::cout << sslkit::cmd_generate(gen) << '\n';
    } else if (*split_cmd) {
      sslkit::cmd_split(split);
    } else if (*train) {
      if (!tr_config.empty()) tr.config_file = tr_config;
      if (!tr_foldplan.empty()) tr.foldplan = tr_foldplan;
      if (*tr_seed_opt) tr.seed = tr_seed;
      for (const auto& s : tr_sets) apply_set(tr.overrides, s);
      if (!tr_regime.empty()) tr.overrides["regime"] = tr_regime;
      if (tr_epochs) tr.overrides["epochs"] = tr_epochs;
      tr.command_line = joined_args(argc, argv);
      sslkit::cmd_train(tr);
    } else if (*probe) {
      if (!pr_foldplan.empty()) pr.foldplan = pr_foldplan;
      if (!pr_export.empty()) pr.export_embeddings = pr_export;
      for (const auto& s : pr_sets) apply_set(pr.overrides, s);
      const auto result = sslkit::cmd_probe(pr);
      std::cout << sslkit::metrics_to_text(result.report);
    } else if (*evaluate) {
      if (!ev_foldplan.empty()) ev.foldplan = ev_foldplan;
      sslkit::cmd_evaluate(ev);
    }
  } catch (const sslkit::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const sslkit::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const sslkit::NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
