#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace sslkit {

inline constexpr std::size_t kChannels = 3;

// 8-bit RGB image, interleaved HWC.
struct RgbImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> pixels;

  RgbImage() = default;
  RgbImage(std::size_t h, std::size_t w) : height(h), width(w), pixels(h * w * kChannels, 0) {}

  std::uint8_t& at(std::size_t y, std::size_t x, std::size_t c) {
    return pixels[(y * width + x) * kChannels + c];
  }
  std::uint8_t at(std::size_t y, std::size_t x, std::size_t c) const {
    return pixels[(y * width + x) * kChannels + c];
  }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

// Real-valued RGB image, interleaved HWC. Holds [0,1] intensities before
// standardization and standardized values after.
struct ImageTensor {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;

  ImageTensor() = default;
  ImageTensor(std::size_t h, std::size_t w, double fill = 0.0)
      : height(h), width(w), values(h * w * kChannels, fill) {}

  double& at(std::size_t y, std::size_t x, std::size_t c) {
    return values[(y * width + x) * kChannels + c];
  }
  double at(std::size_t y, std::size_t x, std::size_t c) const {
    return values[(y * width + x) * kChannels + c];
  }

  friend bool operator==(const ImageTensor&, const ImageTensor&) = default;
};

ImageTensor to_tensor(const RgbImage& image);

using Rgb = std::array<double, 3>;
using Hsv = std::array<double, 3>;

// Hue in [0,1), saturation and value in [0,1].
Hsv rgb_to_hsv(const Rgb& rgb);
Rgb hsv_to_rgb(const Hsv& hsv);

}  // namespace sslkit
