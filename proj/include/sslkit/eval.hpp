#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "sslkit/data.hpp"
#include "sslkit/encoder.hpp"

namespace sslkit {

// rows = true class, cols = predicted class.
using ConfusionMatrix = std::vector<std::vector<std::size_t>>;

// Per-class precision, recall and F1 plus macro averages. A metric whose
// denominator is zero is left empty (undefined) and is excluded from the
// macro mean. F1 is 2TP / (2TP + FP + FN), which equals the harmonic mean of
// precision and recall whenever both are defined.
struct MetricsReport {
  std::vector<std::string> classes;
  ConfusionMatrix confusion;
  std::vector<std::size_t> support;
  std::vector<std::optional<double>> precision;
  std::vector<std::optional<double>> recall;
  std::vector<std::optional<double>> f1;
  std::optional<double> macro_precision;
  std::optional<double> macro_recall;
  std::optional<double> macro_f1;
  // Harmonic mean of macro precision and macro recall.
  std::optional<double> f1_of_means;
  double accuracy = 0.0;
  std::size_t total = 0;
};

inline constexpr const char* kUndefinedMetricConvention =
    "metrics with a zero denominator are undefined (null) and excluded from macro means";

// Class ids are 0-based. Throws std::invalid_argument on length mismatch or
// an id outside [0, num_classes).
ConfusionMatrix confusion_matrix(std::span<const int> predictions, std::span<const int> labels,
                                 std::size_t num_classes);

MetricsReport per_class_metrics(const ConfusionMatrix& confusion,
                                std::vector<std::string> classes = {});

// Harmonic mean; empty when precision + recall == 0.
std::optional<double> harmonic_f1(double precision, double recall);

// Argmax class per sample of classify(encode(standardize(x))).
std::vector<int> predict(const Encoder& encoder, const ClassifierHead& head,
                         const ChannelStats& standardization, const LabeledDataset& dataset,
                         std::span<const std::size_t> indices = {});

// Latent features of the selected samples (all when `indices` is empty),
// standardization only.
std::vector<std::vector<double>> extract_features(const Encoder& encoder,
                                                  const ChannelStats& standardization,
                                                  const LabeledDataset& dataset,
                                                  std::span<const std::size_t> indices = {});

MetricsReport evaluate_model(const Encoder& encoder, const ClassifierHead& head,
                             const ChannelStats& standardization, const LabeledDataset& dataset,
                             std::span<const std::size_t> indices = {});

nlohmann::json metrics_to_json(const MetricsReport& report);
std::string metrics_to_text(const MetricsReport& report);

// CSV: sample_id,label,z_1..z_d with one row per sample.
void export_embeddings(const Encoder& encoder, const ChannelStats& standardization,
                       const LabeledDataset& dataset, const std::filesystem::path& path);

// Shortest round-trip decimal form of a double.
std::string format_double(double v);

}  // namespace sslkit
