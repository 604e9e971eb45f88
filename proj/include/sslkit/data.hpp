#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "sslkit/image.hpp"
#include "sslkit/numeric.hpp"
#include "sslkit/random.hpp"

namespace sslkit {

inline constexpr int kUnlabeled = -1;

struct ImageSample {
  RgbImage image;
  int label = kUnlabeled;  // 0-based class index

  friend bool operator==(const ImageSample&, const ImageSample&) = default;
};

// Immutable labeled image collection. Class supports are recounted on
// construction and every label is checked against the class list.
class LabeledDataset {
 public:
  LabeledDataset() = default;
  LabeledDataset(std::vector<std::string> class_names, std::vector<ImageSample> samples);

  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  std::size_t num_classes() const { return class_names_.size(); }

  const ImageSample& operator[](std::size_t i) const { return samples_[i]; }
  const std::vector<ImageSample>& samples() const { return samples_; }
  const std::vector<std::string>& class_names() const { return class_names_; }
  const std::vector<std::size_t>& class_counts() const { return class_counts_; }
  std::vector<int> labels() const;

  // Per-class lists of sample indices, in dataset order.
  std::vector<std::vector<std::size_t>> indices_by_class() const;

  LabeledDataset subset(std::span<const std::size_t> indices) const;

  // Content hash over class names, labels and pixels (FNV-1a, hex).
  std::string fingerprint() const;

  friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;

 private:
  std::vector<std::string> class_names_;
  std::vector<ImageSample> samples_;
  std::vector<std::size_t> class_counts_;
};

// ---------------------------------------------------------------------------
// Ingestion and on-disk formats

// Reads `<dir>/manifest.csv` (header `path,label`). The class list comes from
// `<dir>/classes.txt` (one name per line) when present, otherwise from the
// labels in order of first appearance.
LabeledDataset ingest(const std::filesystem::path& dir);
LabeledDataset ingest(const std::filesystem::path& root, const std::filesystem::path& manifest,
                      std::optional<std::vector<std::string>> class_names);

// Loads a dataset directory or a packed `.imset` file.
LabeledDataset load_dataset(const std::filesystem::path& path);

RgbImage read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const RgbImage& image);

// Writes images/<class>/<index>.png, manifest.csv and classes.txt.
void write_dataset_dir(const std::filesystem::path& dir, const LabeledDataset& dataset);

// Packed layout, little-endian: "IMSET1", u32 num_classes, u32 num_samples,
// u32 height, u32 width, per class (u32 length, utf-8 name), per sample
// (i32 label), then num_samples * height * width * 3 raw RGB bytes.
// All samples share one size.
void write_packed(const std::filesystem::path& path, const LabeledDataset& dataset);
LabeledDataset read_packed(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Synthetic long-tail data

enum class Motif { kDisc = 0, kSquare, kRing, kCross, kDiamond, kBar };
inline constexpr int kMotifCount = 6;

struct SyntheticClass {
  std::string name;
  std::size_t count = 0;
  double hue = 0.0;    // motif hue in [0,1)
  Motif motif = Motif::kDisc;
};

struct SyntheticSpec {
  std::vector<SyntheticClass> classes;
  std::size_t height = 32;
  std::size_t width = 32;
  double noise = 0.08;        // background noise amplitude
  double signal = 1.0;        // motif opacity in (0,1]
  double hue_jitter = 0.02;   // per-image motif hue jitter
};

// Assigns evenly spaced hues and cycling motifs to the given (name, count) pairs.
SyntheticSpec make_synthetic_spec(const std::vector<std::pair<std::string, std::size_t>>& classes,
                                  std::size_t height = 32, std::size_t width = 32);

// Geometric long-tail profile over `num_classes` classes whose head:tail
// support ratio is `imbalance`, with supports summing to `total`.
SyntheticSpec longtail_spec(std::size_t num_classes, std::size_t total, double imbalance,
                            std::size_t height = 32, std::size_t width = 32);

// The 21 bone-marrow classes with supports scaled by 1/10 (rounded, floor 8).
SyntheticSpec marrow_longtail_spec(std::size_t height = 32, std::size_t width = 32);

// Raw (unscaled) marrow class supports in class-name order.
const std::vector<std::pair<std::string, std::size_t>>& marrow_class_supports();

SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j);
nlohmann::json synthetic_spec_to_json(const SyntheticSpec& spec);

LabeledDataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Splitting and sampling

struct FoldPlan {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> assignments;  // fold per sample

  std::vector<std::size_t> fold_indices(std::size_t fold) const;
  std::vector<std::size_t> train_indices(std::size_t fold) const;

  friend bool operator==(const FoldPlan&, const FoldPlan&) = default;
};

nlohmann::json fold_plan_to_json(const FoldPlan& plan);
FoldPlan fold_plan_from_json(const nlohmann::json& j);

// Shuffles each class with the seed and deals its samples round-robin over the
// folds, continuing the dealer position across classes.
FoldPlan stratified_kfold(const LabeledDataset& dataset, std::size_t k, std::uint64_t seed);

// Median class support, capped at the maximum support.
std::size_t default_samples_per_class(const LabeledDataset& dataset);

// C * samples_per_class indices, exactly samples_per_class per class.
std::vector<std::size_t> balanced_epoch(const LabeledDataset& dataset,
                                        std::size_t samples_per_class, std::uint64_t seed);

// Seeded permutation of all indices (natural class distribution).
std::vector<std::size_t> natural_epoch(const LabeledDataset& dataset, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Augmentation

struct Interval {
  double lo = 1.0;
  double hi = 1.0;
};

struct ChannelStats {
  std::array<double, 3> mean{0.0, 0.0, 0.0};
  std::array<double, 3> std{1.0, 1.0, 1.0};

  friend bool operator==(const ChannelStats&, const ChannelStats&) = default;
};

// Per-channel mean and standard deviation of [0,1] intensities over the
// selected samples (all samples when `indices` is empty).
ChannelStats compute_channel_stats(const LabeledDataset& dataset,
                                   std::span<const std::size_t> indices = {});

struct AugmentConfig {
  double flip_prob_h = 0.5;
  double flip_prob_v = 0.5;
  double hue_delta = 0.05;
  Interval sat_range{0.8, 1.2};
  Interval val_range{0.8, 1.2};
  ChannelStats standardize;

  // Throws ConfigError naming the offending field.
  void validate() const;
};

nlohmann::json augment_config_to_json(const AugmentConfig& c);
AugmentConfig augment_config_from_json(const nlohmann::json& j, AugmentConfig base = {});

// One draw of the random transform.
struct AugmentParams {
  bool flip_h = false;
  bool flip_v = false;
  double hue_shift = 0.0;
  double sat_factor = 1.0;
  double val_factor = 1.0;
};

AugmentParams draw_augment_params(const AugmentConfig& config, Rng& rng);

ImageTensor flip_horizontal(const ImageTensor& image);
ImageTensor flip_vertical(const ImageTensor& image);
ImageTensor jitter_hsv(const ImageTensor& image, double hue_shift, double sat_factor,
                       double val_factor);
ImageTensor standardize(const ImageTensor& image, const ChannelStats& stats);
ImageTensor destandardize(const ImageTensor& image, const ChannelStats& stats);

// flips, HSV jitter, then standardization.
ImageTensor apply_augment(const ImageTensor& image, const AugmentParams& params,
                          const ChannelStats& stats);
ImageTensor augment(const ImageTensor& image, const AugmentConfig& config, std::uint64_t seed);
ImageTensor augment(const RgbImage& image, const AugmentConfig& config, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Mixup

struct MixupBatch {
  std::vector<ImageTensor> images;
  Matrix targets;  // B x C, rows are distributions
  double lambda = 1.0;
  std::vector<std::size_t> partners;
};

Matrix one_hot(std::span<const int> labels, std::size_t num_classes);

// lambda * (x_i, y_i) + (1 - lambda) * (x_partner(i), y_partner(i)).
MixupBatch mixup_with(const std::vector<ImageTensor>& images, const Matrix& targets,
                      double lambda, std::vector<std::size_t> partners);

// Draws lambda ~ Beta(alpha, alpha) and a seeded partner permutation.
MixupBatch mixup(const std::vector<ImageTensor>& images, const Matrix& targets, double alpha,
                 std::uint64_t seed);

}  // namespace sslkit
