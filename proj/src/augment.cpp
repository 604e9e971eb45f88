#include <algorithm>
#include <cmath>
#include <numeric>

#include "sslkit/data.hpp"
#include "sslkit/errors.hpp"

namespace sslkit {

ChannelStats compute_channel_stats(const LabeledDataset& dataset,
                                   std::span<const std::size_t> indices) {
  std::vector<std::size_t> all;
  if (indices.empty()) {
    all.resize(dataset.size());
    std::iota(all.begin(), all.end(), 0);
    indices = all;
  }
  std::array<double, 3> sum{};
  std::array<double, 3> sum_sq{};
  double count = 0.0;
  for (std::size_t i : indices) {
    const auto& px = dataset[i].image.pixels;
    for (std::size_t p = 0; p < px.size(); p += kChannels) {
      for (std::size_t c = 0; c < kChannels; ++c) {
        const double v = px[p + c] / 255.0;
        sum[c] += v;
        sum_sq[c] += v * v;
      }
    }
    count += static_cast<double>(px.size() / kChannels);
  }
  ChannelStats stats;
  if (count == 0.0) return stats;
  for (std::size_t c = 0; c < kChannels; ++c) {
    stats.mean[c] = sum[c] / count;
    const double var = std::max(0.0, sum_sq[c] / count - stats.mean[c] * stats.mean[c]);
    stats.std[c] = std::max(std::sqrt(var), 1e-6);
  }
  return stats;
}

void AugmentConfig::validate() const {
  auto prob = [](double p, const char* field) {
    if (!(p >= 0.0 && p <= 1.0))
      throw ConfigError(std::string(field) + " must be in [0, 1], got " + std::to_string(p));
  };
  prob(flip_prob_h, "flip_prob_h");
  prob(flip_prob_v, "flip_prob_v");
  if (!(hue_delta >= 0.0 && hue_delta <= 0.5))
    throw ConfigError("hue_delta must be in [0, 0.5], got " + std::to_string(hue_delta));
  auto range = [](const Interval& r, const char* field) {
    if (!(r.lo > 0.0 && r.lo <= 1.0 && r.hi >= 1.0))
      throw ConfigError(std::string(field) + " must be a positive interval containing 1, got [" +
                        std::to_string(r.lo) + ", " + std::to_string(r.hi) + "]");
  };
  range(sat_range, "sat_range");
  range(val_range, "val_range");
  for (double s : standardize.std)
    if (!(s > 0.0)) throw ConfigError("standardize_std must be > 0 for every channel");
}

nlohmann::json augment_config_to_json(const AugmentConfig& c) {
  return {{"flip_prob_h", c.flip_prob_h},
          {"flip_prob_v", c.flip_prob_v},
          {"hue_delta", c.hue_delta},
          {"sat_range", {c.sat_range.lo, c.sat_range.hi}},
          {"val_range", {c.val_range.lo, c.val_range.hi}},
          {"standardize_mean", c.standardize.mean},
          {"standardize_std", c.standardize.std}};
}

AugmentConfig augment_config_from_json(const nlohmann::json& j, AugmentConfig base) {
  try {
    base.flip_prob_h = j.value("flip_prob_h", base.flip_prob_h);
    base.flip_prob_v = j.value("flip_prob_v", base.flip_prob_v);
    base.hue_delta = j.value("hue_delta", base.hue_delta);
    if (j.contains("sat_range")) base.sat_range = {j["sat_range"].at(0), j["sat_range"].at(1)};
    if (j.contains("val_range")) base.val_range = {j["val_range"].at(0), j["val_range"].at(1)};
    if (j.contains("standardize_mean")) base.standardize.mean = j["standardize_mean"].get<std::array<double, 3>>();
    if (j.contains("standardize_std")) base.standardize.std = j["standardize_std"].get<std::array<double, 3>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("augment: ") + e.what());
  }
  return base;
}

AugmentParams draw_augment_params(const AugmentConfig& config, Rng& rng) {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  AugmentParams p;
  p.flip_h = coin(rng) < config.flip_prob_h;
  p.flip_v = coin(rng) < config.flip_prob_v;
  p.hue_shift = uniform(rng, -config.hue_delta, config.hue_delta);
  p.sat_factor = uniform(rng, config.sat_range.lo, config.sat_range.hi);
  p.val_factor = uniform(rng, config.val_range.lo, config.val_range.hi);
  return p;
}

ImageTensor flip_horizontal(const ImageTensor& image) {
  ImageTensor out(image.height, image.width);
  for (std::size_t y = 0; y < image.height; ++y)
    for (std::size_t x = 0; x < image.width; ++x)
      for (std::size_t c = 0; c < kChannels; ++c)
        out.at(y, x, c) = image.at(y, image.width - 1 - x, c);
  return out;
}

ImageTensor flip_vertical(const ImageTensor& image) {
  ImageTensor out(image.height, image.width);
  for (std::size_t y = 0; y < image.height; ++y)
    for (std::size_t x = 0; x < image.width; ++x)
      for (std::size_t c = 0; c < kChannels; ++c)
        out.at(y, x, c) = image.at(image.height - 1 - y, x, c);
  return out;
}

ImageTensor jitter_hsv(const ImageTensor& image, double hue_shift, double sat_factor,
                       double val_factor) {
  if (hue_shift == 0.0 && sat_factor == 1.0 && val_factor == 1.0) return image;
  ImageTensor out(image.height, image.width);
  for (std::size_t p = 0; p < image.values.size(); p += kChannels) {
    Hsv hsv = rgb_to_hsv({image.values[p], image.values[p + 1], image.values[p + 2]});
    hsv[0] += hue_shift;
    hsv[0] -= std::floor(hsv[0]);
    hsv[1] = std::clamp(hsv[1] * sat_factor, 0.0, 1.0);
    hsv[2] = std::clamp(hsv[2] * val_factor, 0.0, 1.0);
    const Rgb rgb = hsv_to_rgb(hsv);
    std::copy(rgb.begin(), rgb.end(), out.values.begin() + static_cast<std::ptrdiff_t>(p));
  }
  return out;
}

ImageTensor standardize(const ImageTensor& image, const ChannelStats& stats) {
  for (double s : stats.std)
    if (!(s > 0.0)) throw std::invalid_argument("standardize: std of zero");
  ImageTensor out(image.height, image.width);
  for (std::size_t p = 0; p < image.values.size(); ++p) {
    const std::size_t c = p % kChannels;
    out.values[p] = (image.values[p] - stats.mean[c]) / stats.std[c];
  }
  return out;
}

ImageTensor destandardize(const ImageTensor& image, const ChannelStats& stats) {
  ImageTensor out(image.height, image.width);
  for (std::size_t p = 0; p < image.values.size(); ++p) {
    const std::size_t c = p % kChannels;
    out.values[p] = image.values[p] * stats.std[c] + stats.mean[c];
  }
  return out;
}

ImageTensor apply_augment(const ImageTensor& image, const AugmentParams& params,
                          const ChannelStats& stats) {
  ImageTensor x = params.flip_h ? flip_horizontal(image) : image;
  if (params.flip_v) x = flip_vertical(x);
  x = jitter_hsv(x, params.hue_shift, params.sat_factor, params.val_factor);
  return standardize(x, stats);
}

ImageTensor augment(const ImageTensor& image, const AugmentConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  return apply_augment(image, draw_augment_params(config, rng), config.standardize);
}

ImageTensor augment(const RgbImage& image, const AugmentConfig& config, std::uint64_t seed) {
  return augment(to_tensor(image), config, seed);
}

Matrix one_hot(std::span<const int> labels, std::size_t num_classes) {
  Matrix out(labels.size(), num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes)
      throw std::invalid_argument("one_hot: label " + std::to_string(labels[i]) + " out of range");
    out(i, static_cast<std::size_t>(labels[i])) = 1.0;
  }
  return out;
}

MixupBatch mixup_with(const std::vector<ImageTensor>& images, const Matrix& targets,
                      double lambda, std::vector<std::size_t> partners) {
  const std::size_t n = images.size();
  if (n < 2) throw std::invalid_argument("mixup: batch size must be >= 2");
  if (targets.rows() != n || partners.size() != n)
    throw std::invalid_argument("mixup: images, targets and partners disagree in length");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("mixup: lambda outside [0,1]");
  MixupBatch out;
  out.lambda = lambda;
  out.targets = Matrix(n, targets.cols());
  out.images.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = images[i];
    const auto& b = images[partners[i]];
    ImageTensor mixed(a.height, a.width);
    for (std::size_t p = 0; p < a.values.size(); ++p)
      mixed.values[p] = lambda * a.values[p] + (1.0 - lambda) * b.values[p];
    out.images.push_back(std::move(mixed));
    for (std::size_t c = 0; c < targets.cols(); ++c)
      out.targets(i, c) = lambda * targets(i, c) + (1.0 - lambda) * targets(partners[i], c);
  }
  out.partners = std::move(partners);
  return out;
}

MixupBatch mixup(const std::vector<ImageTensor>& images, const Matrix& targets, double alpha,
                 std::uint64_t seed) {
  if (!(alpha > 0.0)) throw std::invalid_argument("mixup: alpha must be > 0");
  Rng rng(seed);
  const double lambda = sample_beta(alpha, alpha, rng);
  std::vector<std::size_t> partners(images.size());
  std::iota(partners.begin(), partners.end(), 0);
  std::shuffle(partners.begin(), partners.end(), rng);
  return mixup_with(images, targets, lambda, std::move(partners));
}

}  // namespace sslkit
