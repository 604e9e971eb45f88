#include "sslkit/image.hpp"

#include <algorithm>
#include <cmath>

namespace sslkit {

ImageTensor to_tensor(const RgbImage& image) {
  ImageTensor out(image.height, image.width);
  for (std::size_t i = 0; i < image.pixels.size(); ++i) out.values[i] = image.pixels[i] / 255.0;
  return out;
}

Hsv rgb_to_hsv(const Rgb& rgb) {
  const auto [r, g, b] = rgb;
  const double maxc = std::max({r, g, b});
  const double minc = std::min({r, g, b});
  const double delta = maxc - minc;
  const double v = maxc;
  const double s = maxc > 0.0 ? delta / maxc : 0.0;
  double h = 0.0;
  if (delta > 0.0) {
    if (maxc == r) {
      h = (g - b) / delta;
    } else if (maxc == g) {
      h = 2.0 + (b - r) / delta;
    } else {
      h = 4.0 + (r - g) / delta;
    }
    h /= 6.0;
    h -= std::floor(h);
  }
  return {h, s, v};
}

Rgb hsv_to_rgb(const Hsv& hsv) {
  double h = hsv[0] - std::floor(hsv[0]);
  const double s = hsv[1];
  const double v = hsv[2];
  if (s <= 0.0) return {v, v, v};
  const double h6 = h * 6.0;
  const int sector = std::min(5, static_cast<int>(h6));
  const double f = h6 - sector;
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - s * f);
  const double t = v * (1.0 - s * (1.0 - f));
  switch (sector) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

}  // namespace sslkit
