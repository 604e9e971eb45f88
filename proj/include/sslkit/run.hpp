#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "sslkit/training.hpp"

namespace sslkit {

inline constexpr const char* kCodeVersion = "sslkit 0.1.0";

struct GenerateOptions {
  std::optional<std::filesystem::path> spec_file;  // JSON SyntheticSpec
  std::string preset;                              // "marrow-longtail"
  std::filesystem::path out;
  std::uint64_t seed = 0;
  bool packed = false;  // write a single .imset file instead of a PNG tree
};

struct SplitOptions {
  std::filesystem::path dataset;
  std::size_t k = 5;
  std::uint64_t seed = 0;
  std::filesystem::path out;  // file, or directory receiving foldplan.json
};

struct TrainOptions {
  std::optional<std::filesystem::path> config_file;
  std::string preset;          // overrides the config file's "preset" field
  nlohmann::json overrides = nlohmann::json::object();  // CLI-level fields
  std::filesystem::path dataset;
  std::optional<std::filesystem::path> foldplan;
  std::size_t fold = 0;
  std::optional<std::uint64_t> seed;
  std::filesystem::path out;   // run directory
  std::string command_line;
  bool verbose = true;
};

struct ProbeOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path dataset;
  std::optional<std::filesystem::path> foldplan;
  std::size_t fold = 0;
  std::uint64_t seed = 0;
  nlohmann::json overrides = nlohmann::json::object();  // ProbeConfig fields
  std::filesystem::path out;
  std::optional<std::filesystem::path> export_embeddings;
};

struct EvaluateOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path dataset;
  std::optional<std::filesystem::path> foldplan;
  std::size_t fold = 0;
  std::filesystem::path out;
};

// Precedence: overrides > config file fields > preset > built-in defaults.
// The preset comes from `preset` when non-empty, else from the file's
// "preset" field.
TrainConfig resolve_config(const std::string& preset, const nlohmann::json& file_config,
                           const nlohmann::json& overrides);

// Returns the dataset fingerprint.
std::string cmd_generate(const GenerateOptions& options);
FoldPlan cmd_split(const SplitOptions& options);
// Writes the run directory and returns the training history.
TrainHistory cmd_train(const TrainOptions& options);
ProbeResult cmd_probe(const ProbeOptions& options);
MetricsReport cmd_evaluate(const EvaluateOptions& options);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace sslkit
