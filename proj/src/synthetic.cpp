#include <algorithm>
#include <cmath>

#include "sslkit/data.hpp"
#include "sslkit/errors.hpp"

namespace sslkit {

const std::vector<std::pair<std::string, std::size_t>>& marrow_class_supports() {
  static const std::vector<std::pair<std::string, std::size_t>> kSupports = {
      {"ABE", 8},     {"ART", 19630}, {"NGB", 9968},  {"BAS", 441},   {"BLA", 11973},
      {"EOS", 5883},  {"EBO", 27395}, {"FGC", 47},    {"HAC", 409},   {"LYI", 65},
      {"LYT", 26242}, {"MMZ", 3055},  {"MON", 4040},  {"MYB", 6557},  {"NIF", 3538},
      {"OTH", 294},   {"PLM", 7629},  {"PEB", 2740},  {"PMO", 11994}, {"NGS", 29424},
      {"KSC", 42},
  };
  return kSupports;
}

SyntheticSpec make_synthetic_spec(const std::vector<std::pair<std::string, std::size_t>>& classes,
                                  std::size_t height, std::size_t width) {
  SyntheticSpec spec;
  spec.height = height;
  spec.width = width;
  const std::size_t c = classes.size();
  // Hues are spread so that consecutive classes also differ in motif.
  for (std::size_t i = 0; i < c; ++i) {
    SyntheticClass cls;
    cls.name = classes[i].first;
    cls.count = classes[i].second;
    cls.hue = static_cast<double>(i) / static_cast<double>(c);
    cls.motif = static_cast<Motif>(i % kMotifCount);
    spec.classes.push_back(std::move(cls));
  }
  return spec;
}

SyntheticSpec longtail_spec(std::size_t num_classes, std::size_t total, double imbalance,
                            std::size_t height, std::size_t width) {
  if (num_classes < 2) throw ConfigError("longtail_spec: need at least 2 classes");
  if (!(imbalance >= 1.0)) throw ConfigError("longtail_spec: imbalance must be >= 1");
  std::vector<double> shares(num_classes);
  double sum = 0.0;
  for (std::size_t k = 0; k < num_classes; ++k) {
    shares[k] = std::pow(imbalance, -static_cast<double>(k) / static_cast<double>(num_classes - 1));
    sum += shares[k];
  }
  std::vector<std::pair<std::string, std::size_t>> classes;
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < num_classes; ++k) {
    auto n = static_cast<std::size_t>(std::llround(static_cast<double>(total) * shares[k] / sum));
    n = std::max<std::size_t>(n, 1);
    classes.emplace_back("class_" + std::to_string(k), n);
    assigned += n;
  }
  // Rounding slack goes to the head class.
  if (assigned != total) {
    auto& head = classes.front().second;
    head = static_cast<std::size_t>(static_cast<long long>(head) +
                                    static_cast<long long>(total) -
                                    static_cast<long long>(assigned));
  }
  return make_synthetic_spec(classes, height, width);
}

SyntheticSpec marrow_longtail_spec(std::size_t height, std::size_t width) {
  std::vector<std::pair<std::string, std::size_t>> scaled;
  for (const auto& [name, support] : marrow_class_supports()) {
    const auto n = static_cast<std::size_t>(std::llround(static_cast<double>(support) / 10.0));
    scaled.emplace_back(name, std::max<std::size_t>(n, 8));
  }
  return make_synthetic_spec(scaled, height, width);
}

SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j) {
  if (j.contains("longtail")) {
    // {"longtail": {"classes": C, "total": N, "imbalance": r}} expands to a
    // geometric profile; class-level overrides are not supported here.
    const auto& lt = j["longtail"];
    SyntheticSpec spec = longtail_spec(lt.at("classes").get<std::size_t>(), lt.at("total").get<std::size_t>(),
                                       lt.at("imbalance").get<double>(), j.value("height", std::size_t{32}),
                                       j.value("width", std::size_t{32}));
    spec.noise = j.value("noise", spec.noise);
    spec.signal = j.value("signal", spec.signal);
    spec.hue_jitter = j.value("hue_jitter", spec.hue_jitter);
    return spec;
  }
  std::vector<std::pair<std::string, std::size_t>> classes;
  if (!j.contains("classes") || !j["classes"].is_array())
    throw ConfigError("synthetic spec: 'classes' must be an array of {name, count}");
  for (const auto& c : j["classes"]) classes.emplace_back(c.at("name").get<std::string>(),
                                                          c.at("count").get<std::size_t>());
  SyntheticSpec spec = make_synthetic_spec(classes, j.value("height", std::size_t{32}),
                                           j.value("width", std::size_t{32}));
  spec.noise = j.value("noise", spec.noise);
  spec.signal = j.value("signal", spec.signal);
  spec.hue_jitter = j.value("hue_jitter", spec.hue_jitter);
  const auto& arr = j["classes"];
  for (std::size_t i = 0; i < spec.classes.size(); ++i) {
    if (arr[i].contains("hue")) spec.classes[i].hue = arr[i]["hue"].get<double>();
    if (arr[i].contains("motif")) {
      const int m = arr[i]["motif"].get<int>();
      if (m < 0 || m >= kMotifCount)
        throw ConfigError("synthetic spec: motif must be in [0, " + std::to_string(kMotifCount) + ")");
      spec.classes[i].motif = static_cast<Motif>(m);
    }
  }
  return spec;
}

nlohmann::json synthetic_spec_to_json(const SyntheticSpec& spec) {
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& c : spec.classes) {
    classes.push_back({{"name", c.name},
                       {"count", c.count},
                       {"hue", c.hue},
                       {"motif", static_cast<int>(c.motif)}});
  }
  return {{"height", spec.height}, {"width", spec.width}, {"noise", spec.noise},
          {"signal", spec.signal}, {"hue_jitter", spec.hue_jitter}, {"classes", classes}};
}

namespace {

bool inside_motif(Motif motif, double dy, double dx, double r) {
  const double ay = std::abs(dy);
  const double ax = std::abs(dx);
  const double d2 = dy * dy + dx * dx;
  switch (motif) {
    case Motif::kDisc: return d2 <= r * r;
    case Motif::kSquare: return std::max(ay, ax) <= 0.8 * r;
    case Motif::kRing: return d2 <= r * r && d2 >= 0.3 * r * r;
    case Motif::kCross: return (ay <= 0.3 * r && ax <= r) || (ax <= 0.3 * r && ay <= r);
    case Motif::kDiamond: return ax + ay <= r;
    case Motif::kBar: return ay <= 0.35 * r && ax <= r;
  }
  return false;
}

std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

RgbImage render(const SyntheticSpec& spec, const SyntheticClass& cls, Rng& rng) {
  const double h = static_cast<double>(spec.height);
  const double w = static_cast<double>(spec.width);
  const double base = uniform(rng, 0.40, 0.50);
  const double cy = h / 2.0 + uniform(rng, -h / 8.0, h / 8.0);
  const double cx = w / 2.0 + uniform(rng, -w / 8.0, w / 8.0);
  const double radius = uniform(rng, 0.22, 0.32) * std::min(h, w);
  const Rgb color = hsv_to_rgb(
      {cls.hue + uniform(rng, -spec.hue_jitter, spec.hue_jitter), uniform(rng, 0.75, 0.95),
       uniform(rng, 0.8, 0.95)});
  RgbImage img(spec.height, spec.width);
  for (std::size_t y = 0; y < spec.height; ++y) {
    for (std::size_t x = 0; x < spec.width; ++x) {
      const bool on = inside_motif(cls.motif, static_cast<double>(y) + 0.5 - cy,
                                   static_cast<double>(x) + 0.5 - cx, radius);
      const double alpha = on ? spec.signal : 0.0;
      for (std::size_t c = 0; c < kChannels; ++c) {
        const double bg = base + uniform(rng, -spec.noise, spec.noise);
        img.at(y, x, c) = quantize((1.0 - alpha) * bg + alpha * color[c]);
      }
    }
  }
  return img;
}

}  // namespace

LabeledDataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  if (spec.classes.size() < 2) throw std::invalid_argument("generate_synthetic: need >= 2 classes");
  if (spec.height == 0 || spec.width == 0) throw std::invalid_argument("generate_synthetic: empty image size");
  std::vector<std::string> names;
  std::vector<ImageSample> samples;
  for (std::size_t k = 0; k < spec.classes.size(); ++k) {
    const auto& cls = spec.classes[k];
    if (cls.count < 1) throw std::invalid_argument("generate_synthetic: class '" + cls.name + "' has count 0");
    names.push_back(cls.name);
    for (std::size_t i = 0; i < cls.count; ++i) {
      Rng rng = make_rng(seed, Stream::kSynthetic, {k, i});
      samples.push_back({render(spec, cls, rng), static_cast<int>(k)});
    }
  }
  return LabeledDataset(std::move(names), std::move(samples));
}

}  // namespace sslkit
