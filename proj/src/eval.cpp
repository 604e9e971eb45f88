#include "sslkit/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "sslkit/errors.hpp"
#include "sslkit/parallel.hpp"

namespace sslkit {

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) return "nan";
  return std::string(buf, ptr);
}

ConfusionMatrix confusion_matrix(std::span<const int> predictions, std::span<const int> labels,
                                 std::size_t num_classes) {
  if (predictions.size() != labels.size()) {
    throw std::invalid_argument("confusion_matrix: " + std::to_string(predictions.size()) +
                                " predictions vs " + std::to_string(labels.size()) + " labels");
  }
  ConfusionMatrix m(num_classes, std::vector<std::size_t>(num_classes, 0));
  auto check = [num_classes](int id, const char* what) {
    if (id < 0 || static_cast<std::size_t>(id) >= num_classes)
      throw std::invalid_argument(std::string("confusion_matrix: ") + what + " id " +
                                  std::to_string(id) + " outside [0, " + std::to_string(num_classes) + ")");
  };
  for (std::size_t i = 0; i < labels.size(); ++i) {
    check(labels[i], "label");
    check(predictions[i], "prediction");
    ++m[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(predictions[i])];
  }
  return m;
}

std::optional<double> harmonic_f1(double precision, double recall) {
  if (precision + recall == 0.0) return std::nullopt;
  return 2.0 * precision * recall / (precision + recall);
}

namespace {

std::optional<double> mean_defined(const std::vector<std::optional<double>>& v) {
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& x : v) {
    if (x) {
      s += *x;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return s / static_cast<double>(n);
}

}  // namespace

MetricsReport per_class_metrics(const ConfusionMatrix& confusion, std::vector<std::string> classes) {
  const std::size_t c = confusion.size();
  if (c == 0) throw std::invalid_argument("per_class_metrics: empty confusion matrix");
  for (const auto& row : confusion)
    if (row.size() != c) throw std::invalid_argument("per_class_metrics: confusion matrix is not square");
  if (classes.empty()) {
    for (std::size_t k = 0; k < c; ++k) classes.push_back(std::to_string(k));
  }
  if (classes.size() != c) throw std::invalid_argument("per_class_metrics: class name count mismatch");

  MetricsReport r;
  r.classes = std::move(classes);
  r.confusion = confusion;
  r.support.assign(c, 0);
  std::vector<std::size_t> predicted(c, 0);
  std::size_t correct = 0;
  for (std::size_t t = 0; t < c; ++t) {
    for (std::size_t p = 0; p < c; ++p) {
      r.support[t] += confusion[t][p];
      predicted[p] += confusion[t][p];
      r.total += confusion[t][p];
    }
    correct += confusion[t][t];
  }
  r.accuracy = r.total ? static_cast<double>(correct) / static_cast<double>(r.total) : 0.0;

  for (std::size_t k = 0; k < c; ++k) {
    const double tp = static_cast<double>(confusion[k][k]);
    const double fp = static_cast<double>(predicted[k]) - tp;
    const double fn = static_cast<double>(r.support[k]) - tp;
    r.precision.push_back(tp + fp > 0.0 ? std::optional<double>(tp / (tp + fp)) : std::nullopt);
    r.recall.push_back(tp + fn > 0.0 ? std::optional<double>(tp / (tp + fn)) : std::nullopt);
    const double denom = 2.0 * tp + fp + fn;
    r.f1.push_back(denom > 0.0 ? std::optional<double>(2.0 * tp / denom) : std::nullopt);
  }
  r.macro_precision = mean_defined(r.precision);
  r.macro_recall = mean_defined(r.recall);
  r.macro_f1 = mean_defined(r.f1);
  if (r.macro_precision && r.macro_recall) r.f1_of_means = harmonic_f1(*r.macro_precision, *r.macro_recall);
  return r;
}

std::vector<std::vector<double>> extract_features(const Encoder& encoder,
                                                  const ChannelStats& standardization,
                                                  const LabeledDataset& dataset,
                                                  std::span<const std::size_t> indices) {
  std::vector<std::size_t> all;
  if (indices.empty()) {
    all.resize(dataset.size());
    std::iota(all.begin(), all.end(), 0);
    indices = all;
  }
  std::vector<std::vector<double>> features(indices.size());
  parallel_for(indices.size(), [&](std::size_t i) {
    features[i] = encoder.encode(standardize(to_tensor(dataset[indices[i]].image), standardization));
  });
  return features;
}

std::vector<int> predict(const Encoder& encoder, const ClassifierHead& head,
                         const ChannelStats& standardization, const LabeledDataset& dataset,
                         std::span<const std::size_t> indices) {
  if (head.linear.in_dim() != encoder.embedding_dim()) {
    throw std::invalid_argument("classifier expects d_emb " + std::to_string(head.linear.in_dim()) +
                                ", encoder produces " + std::to_string(encoder.embedding_dim()));
  }
  const auto features = extract_features(encoder, standardization, dataset, indices);
  std::vector<int> out(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto logits = class_logits(features[i], head);
    out[i] = static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
  }
  return out;
}

MetricsReport evaluate_model(const Encoder& encoder, const ClassifierHead& head,
                             const ChannelStats& standardization, const LabeledDataset& dataset,
                             std::span<const std::size_t> indices) {
  std::vector<std::size_t> all;
  if (indices.empty()) {
    if (dataset.empty()) throw DataError("evaluate_model: empty evaluation fold");
    all.resize(dataset.size());
    std::iota(all.begin(), all.end(), 0);
    indices = all;
  }
  const auto predictions = predict(encoder, head, standardization, dataset, indices);
  std::vector<int> labels;
  labels.reserve(indices.size());
  for (std::size_t i : indices) labels.push_back(dataset[i].label);
  return per_class_metrics(confusion_matrix(predictions, labels, head.num_classes()),
                           dataset.num_classes() == head.num_classes()
                               ? dataset.class_names()
                               : std::vector<std::string>{});
}

namespace {

nlohmann::json opt(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json opt_list(const std::vector<std::optional<double>>& v) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& x : v) a.push_back(opt(x));
  return a;
}

std::string cell(const std::optional<double>& v) {
  if (!v) return "     -";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%6.4f", *v);
  return buf;
}

}  // namespace

nlohmann::json metrics_to_json(const MetricsReport& r) {
  return {{"confusion", r.confusion},
          {"classes", r.classes},
          {"per_class",
           {{"precision", opt_list(r.precision)},
            {"recall", opt_list(r.recall)},
            {"f1", opt_list(r.f1)},
            {"support", r.support}}},
          {"macro", {{"precision", opt(r.macro_precision)}, {"recall", opt(r.macro_recall)}, {"f1", opt(r.macro_f1)}}},
          {"f1_of_means", opt(r.f1_of_means)},
          {"accuracy", r.accuracy},
          {"undefined_convention", kUndefinedMetricConvention}};
}

std::string metrics_to_text(const MetricsReport& r) {
  std::size_t width = 5;
  for (const auto& c : r.classes) width = std::max(width, c.size());
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-*s  %9s  %9s  %9s  %7s\n", static_cast<int>(width), "class",
                "precision", "recall", "f1", "support");
  out << line;
  for (std::size_t k = 0; k < r.classes.size(); ++k) {
    std::snprintf(line, sizeof line, "%-*s  %9s  %9s  %9s  %7zu\n", static_cast<int>(width),
                  r.classes[k].c_str(), cell(r.precision[k]).c_str(), cell(r.recall[k]).c_str(),
                  cell(r.f1[k]).c_str(), r.support[k]);
    out << line;
  }
  std::snprintf(line, sizeof line, "%-*s  %9s  %9s  %9s  %7zu\n", static_cast<int>(width), "macro",
                cell(r.macro_precision).c_str(), cell(r.macro_recall).c_str(), cell(r.macro_f1).c_str(),
                r.total);
  out << line;
  std::snprintf(line, sizeof line, "f1 of macro means: %s   accuracy: %6.4f\n",
                cell(r.f1_of_means).c_str(), r.accuracy);
  out << line << "note: " << kUndefinedMetricConvention << '\n';
  return out.str();
}

void export_embeddings(const Encoder& encoder, const ChannelStats& standardization,
                       const LabeledDataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write embeddings to " + path.string());
  out << "sample_id,label";
  for (std::size_t d = 1; d <= encoder.embedding_dim(); ++d) out << ",z_" << d;
  out << '\n';
  if (dataset.empty()) return;
  const auto features = extract_features(encoder, standardization, dataset);
  for (std::size_t i = 0; i < features.size(); ++i) {
    out << i << ',' << dataset[i].label;
    for (double v : features[i]) out << ',' << format_double(v);
    out << '\n';
  }
  if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace sslkit
