#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "sslkit/data.hpp"
#include "sslkit/eval.hpp"
#include "sslkit/model.hpp"

namespace sslkit {

enum class Sampling { kBalanced, kNatural };
enum class ClassWeighting { kInverseFrequency, kUniform };

struct ProbeConfig {
  std::size_t epochs = 300;
  std::size_t batch_size = 64;
  double learning_rate = 0.5;
  double momentum = 0.9;
  double weight_decay = 0.0;
  ClassWeighting class_weighting = ClassWeighting::kInverseFrequency;
};

struct TrainConfig {
  Regime regime = Regime::kSupervised;
  std::size_t epochs = 20;
  std::size_t batch_size = 64;
  double learning_rate = 0.05;
  double momentum = 0.9;
  double weight_decay = 1e-4;

  std::size_t views = 2;                  // M
  double supcon_temperature = 0.2;        // tau
  double code_temperature = 0.1;          // softmax temperature of SwAV codes
  double sinkhorn_epsilon = 0.03;
  std::size_t sinkhorn_iterations = 3;
  std::size_t prototypes = 64;            // K
  std::size_t projection_dim = 128;       // d_proj
  std::size_t queue_capacity = 256;
  std::size_t queue_start_epoch = 15;     // 1-based; queue used from this epoch on
  std::size_t prototype_freeze_epochs = 2;

  std::size_t samples_per_class = 0;      // N_c; 0 selects the median class support
  Sampling sampling = Sampling::kBalanced;
  ClassWeighting class_weighting = ClassWeighting::kInverseFrequency;
  bool mixup = false;
  double mixup_alpha = 0.2;
  std::optional<double> mixup_lambda;     // fixes lambda instead of drawing it

  std::uint64_t seed = 0;
  ReferenceEncoderConfig encoder;
  AugmentConfig augment;
  // Replace augment.standardize with statistics of the training split.
  bool auto_standardize = true;
  ProbeConfig probe;

  // Throws ConfigError naming the field and its allowed range.
  void validate() const;
};

nlohmann::json train_config_to_json(const TrainConfig& config);
// Applies the fields present in `j` on top of `base`. Unknown fields are rejected.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

// Named presets: "desk" (built-in defaults), "paper-short" (20-epoch CE),
// "paper-full" (100-epoch CE), "paper-swav", "paper-supcon".
TrainConfig preset_config(const std::string& name);
std::vector<std::string> preset_names();

struct ConfigFieldInfo {
  std::string name;
  std::string description;
  std::string paper_value;  // empty when the field has no paper-reported value
};
const std::vector<ConfigFieldInfo>& config_field_info();

// ---------------------------------------------------------------------------

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;
  std::optional<double> metric;  // validation macro-F1 when labels are held out
  double seconds = 0.0;
  std::size_t batches = 0;
  std::size_t skipped_batches = 0;
  std::size_t queue_rows = 0;        // queue rows fed to Sinkhorn during the epoch
  std::size_t prototype_updates = 0; // optimizer steps applied to prototypes
  std::size_t clamped_logs = 0;
  std::vector<std::size_t> class_draws;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;

  std::vector<double> losses() const;
  // epoch,loss,metric,batches,skipped_batches,queue_rows,prototype_updates,clamped_logs[,seconds]
  std::string to_csv(bool include_timing = true) const;
};

struct TrainResult {
  TrainedModel model;
  TrainHistory history;
};

using EpochCallback = std::function<void(const EpochRecord&, const TrainedModel&)>;

struct SgdConfig {
  double learning_rate = 0.05;
  double momentum = 0.0;
  double weight_decay = 0.0;
};

// velocity = momentum * velocity + grad + weight_decay * param; param -= lr * velocity.
void sgd_step(std::span<double> params, std::span<const double> grads, std::span<double> velocity,
              const SgdConfig& config);

// Class-weighted cross-entropy on `train`; validation macro-F1 per epoch on
// `validation` when it is non-empty.
TrainResult train_supervised(const TrainConfig& config, const LabeledDataset& train,
                             const LabeledDataset& validation, const EpochCallback& on_epoch = {});
TrainResult train_supervised(const TrainConfig& config, const LabeledDataset& dataset,
                             const FoldPlan& plan, std::size_t fold_index,
                             const EpochCallback& on_epoch = {});

// Labels are ignored. Returns encoder, projection head and prototypes.
TrainResult train_swav(const TrainConfig& config, const LabeledDataset& dataset,
                       const EpochCallback& on_epoch = {});

// Returns the encoder only; the projection head is discarded after training.
TrainResult train_supcon(const TrainConfig& config, const LabeledDataset& dataset,
                         const EpochCallback& on_epoch = {});

TrainResult train(const TrainConfig& config, const LabeledDataset& train,
                  const LabeledDataset& validation, const EpochCallback& on_epoch = {});

struct ProbeResult {
  ClassifierHead head;
  MetricsReport report;
  std::vector<double> losses;
};

// Fits a linear classifier on frozen features of `train` and reports metrics
// on `eval`. The encoder is only read.
ProbeResult linear_probe(const Encoder& frozen_encoder, const ChannelStats& standardization,
                         const LabeledDataset& train, const LabeledDataset& eval,
                         const ProbeConfig& config, std::uint64_t seed);

}  // namespace sslkit
