#include "sslkit/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sslkit/errors.hpp"

namespace sslkit {

namespace {

constexpr std::size_t kKernel = 3;
constexpr std::size_t kTaps = kKernel * kKernel;
constexpr std::size_t kStride = 2;

std::size_t conv_out(std::size_t n) { return (n - 1) / kStride + 1; }

void glorot(std::span<double> w, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (double& x : w) x = dist(rng);
}

// Gathers 3x3 stride-2 zero-padded patches: patches[p * taps * cin + t * cin + ci].
void im2col(std::span<const double> input, std::size_t h, std::size_t w, std::size_t cin,
            std::span<double> patches) {
  const std::size_t ho = conv_out(h);
  const std::size_t wo = conv_out(w);
  const std::size_t patch = kTaps * cin;
  std::fill(patches.begin(), patches.end(), 0.0);
  for (std::size_t oy = 0; oy < ho; ++oy) {
    for (std::size_t ox = 0; ox < wo; ++ox) {
      double* dst = patches.data() + (oy * wo + ox) * patch;
      for (std::size_t ky = 0; ky < kKernel; ++ky) {
        const long iy = static_cast<long>(oy * kStride + ky) - 1;
        if (iy < 0 || iy >= static_cast<long>(h)) continue;
        for (std::size_t kx = 0; kx < kKernel; ++kx) {
          const long ix = static_cast<long>(ox * kStride + kx) - 1;
          if (ix < 0 || ix >= static_cast<long>(w)) continue;
          const double* src = input.data() + (static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(ix)) * cin;
          std::copy(src, src + cin, dst + (ky * kKernel + kx) * cin);
        }
      }
    }
  }
}

// Scatter-add of patch gradients back onto the input grid.
void col2im(std::span<const double> grad_patches, std::size_t h, std::size_t w, std::size_t cin,
            std::span<double> grad_input) {
  const std::size_t ho = conv_out(h);
  const std::size_t wo = conv_out(w);
  const std::size_t patch = kTaps * cin;
  std::fill(grad_input.begin(), grad_input.end(), 0.0);
  for (std::size_t oy = 0; oy < ho; ++oy) {
    for (std::size_t ox = 0; ox < wo; ++ox) {
      const double* src = grad_patches.data() + (oy * wo + ox) * patch;
      for (std::size_t ky = 0; ky < kKernel; ++ky) {
        const long iy = static_cast<long>(oy * kStride + ky) - 1;
        if (iy < 0 || iy >= static_cast<long>(h)) continue;
        for (std::size_t kx = 0; kx < kKernel; ++kx) {
          const long ix = static_cast<long>(ox * kStride + kx) - 1;
          if (ix < 0 || ix >= static_cast<long>(w)) continue;
          double* dst = grad_input.data() + (static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(ix)) * cin;
          const double* s = src + (ky * kKernel + kx) * cin;
          for (std::size_t c = 0; c < cin; ++c) dst[c] += s[c];
        }
      }
    }
  }
}

// out[p * cout + co] = relu(b[co] + w[co] . patches[p])
void conv_relu(std::span<const double> patches, std::size_t positions, std::size_t patch,
               const double* weight, const double* bias, std::size_t cout, std::span<double> out) {
  for (std::size_t p = 0; p < positions; ++p) {
    const double* x = patches.data() + p * patch;
    for (std::size_t co = 0; co < cout; ++co) {
      const double* wr = weight + co * patch;
      double s = bias[co];
      for (std::size_t k = 0; k < patch; ++k) s += wr[k] * x[k];
      out[p * cout + co] = s > 0.0 ? s : 0.0;
    }
  }
}

}  // namespace

void ReferenceEncoderConfig::validate() const {
  auto positive = [](std::size_t v, const char* field) {
    if (v == 0) throw ConfigError(std::string("encoder.") + field + " must be >= 1");
  };
  positive(height, "height");
  positive(width, "width");
  positive(conv1_channels, "conv1_channels");
  positive(conv2_channels, "conv2_channels");
  positive(embedding_dim, "embedding_dim");
}

nlohmann::json encoder_config_to_json(const ReferenceEncoderConfig& c) {
  return {{"height", c.height},
          {"width", c.width},
          {"conv1_channels", c.conv1_channels},
          {"conv2_channels", c.conv2_channels},
          {"embedding_dim", c.embedding_dim}};
}

ReferenceEncoderConfig encoder_config_from_json(const nlohmann::json& j,
                                                ReferenceEncoderConfig base) {
  try {
    base.height = j.value("height", base.height);
    base.width = j.value("width", base.width);
    base.conv1_channels = j.value("conv1_channels", base.conv1_channels);
    base.conv2_channels = j.value("conv2_channels", base.conv2_channels);
    base.embedding_dim = j.value("embedding_dim", base.embedding_dim);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("encoder: ") + e.what());
  }
  return base;
}

struct ReferenceEncoder::Layout {
  std::size_t h0, w0, h1, w1, h2, w2;
  std::size_t c1, c2, emb;
  std::size_t patch1, patch2;
  std::size_t w1_off, b1_off, w2_off, b2_off, fc_w_off, fc_b_off, total;
};

ReferenceEncoder::Layout ReferenceEncoder::layout() const {
  Layout l{};
  l.h0 = config_.height;
  l.w0 = config_.width;
  l.h1 = conv_out(l.h0);
  l.w1 = conv_out(l.w0);
  l.h2 = conv_out(l.h1);
  l.w2 = conv_out(l.w1);
  l.c1 = config_.conv1_channels;
  l.c2 = config_.conv2_channels;
  l.emb = config_.embedding_dim;
  l.patch1 = kTaps * kChannels;
  l.patch2 = kTaps * l.c1;
  l.w1_off = 0;
  l.b1_off = l.w1_off + l.c1 * l.patch1;
  l.w2_off = l.b1_off + l.c1;
  l.b2_off = l.w2_off + l.c2 * l.patch2;
  l.fc_w_off = l.b2_off + l.c2;
  l.fc_b_off = l.fc_w_off + l.emb * l.c2;
  l.total = l.fc_b_off + l.emb;
  return l;
}

std::size_t ReferenceEncoder::parameter_count_for(const ReferenceEncoderConfig& c) {
  return c.conv1_channels * (kTaps * kChannels + 1) + c.conv2_channels * (kTaps * c.conv1_channels + 1) +
         c.embedding_dim * (c.conv2_channels + 1);
}

ReferenceEncoder::ReferenceEncoder(const ReferenceEncoderConfig& config) : config_(config) {
  config_.validate();
  params_.assign(layout().total, 0.0);
}

ReferenceEncoder::ReferenceEncoder(const ReferenceEncoderConfig& config, Rng& rng)
    : ReferenceEncoder(config) {
  const Layout l = layout();
  std::span<double> p(params_);
  glorot(p.subspan(l.w1_off, l.c1 * l.patch1), l.patch1, kTaps * l.c1, rng);
  glorot(p.subspan(l.w2_off, l.c2 * l.patch2), l.patch2, kTaps * l.c2, rng);
  glorot(p.subspan(l.fc_w_off, l.emb * l.c2), l.c2, l.emb, rng);
}

nlohmann::json ReferenceEncoder::architecture() const {
  auto j = encoder_config_to_json(config_);
  j["kind"] = kind();
  return j;
}

// Cache buffers: 0 patches1, 1 act1, 2 patches2, 3 act2, 4 pooled.
std::vector<double> ReferenceEncoder::forward(const ImageTensor& image, ActivationCache* cache) const {
  if (image.height != config_.height || image.width != config_.width ||
      image.values.size() != config_.height * config_.width * kChannels) {
    throw std::invalid_argument("encoder expects " + std::to_string(config_.height) + "x" +
                                std::to_string(config_.width) + "x3 input, got " +
                                std::to_string(image.height) + "x" + std::to_string(image.width) +
                                "x3");
  }
  const Layout l = layout();
  const std::size_t n1 = l.h1 * l.w1;
  const std::size_t n2 = l.h2 * l.w2;

  ActivationCache local;
  ActivationCache& c = cache ? *cache : local;
  c.buffers.resize(5);
  auto& patches1 = c.buffers[0];
  auto& act1 = c.buffers[1];
  auto& patches2 = c.buffers[2];
  auto& act2 = c.buffers[3];
  auto& pooled = c.buffers[4];
  patches1.resize(n1 * l.patch1);
  act1.resize(n1 * l.c1);
  patches2.resize(n2 * l.patch2);
  act2.resize(n2 * l.c2);
  pooled.assign(l.c2, 0.0);

  const double* p = params_.data();
  im2col(image.values, l.h0, l.w0, kChannels, patches1);
  conv_relu(patches1, n1, l.patch1, p + l.w1_off, p + l.b1_off, l.c1, act1);
  im2col(act1, l.h1, l.w1, l.c1, patches2);
  conv_relu(patches2, n2, l.patch2, p + l.w2_off, p + l.b2_off, l.c2, act2);
  for (std::size_t q = 0; q < n2; ++q)
    for (std::size_t ch = 0; ch < l.c2; ++ch) pooled[ch] += act2[q * l.c2 + ch];
  for (double& v : pooled) v /= static_cast<double>(n2);

  std::vector<double> z(l.emb);
  for (std::size_t o = 0; o < l.emb; ++o) {
    const double* wr = p + l.fc_w_off + o * l.c2;
    double s = p[l.fc_b_off + o];
    for (std::size_t ch = 0; ch < l.c2; ++ch) s += wr[ch] * pooled[ch];
    z[o] = s;
  }
  return z;
}

void ReferenceEncoder::backward(const ActivationCache& cache, std::span<const double> grad_z,
                                std::span<double> grad_params) const {
  const Layout l = layout();
  if (grad_z.size() != l.emb) throw std::invalid_argument("encoder backward: grad_z length mismatch");
  if (grad_params.size() != l.total) throw std::invalid_argument("encoder backward: grad buffer size mismatch");
  if (cache.buffers.size() != 5) throw std::invalid_argument("encoder backward: missing forward cache");
  const auto& patches1 = cache.buffers[0];
  const auto& act1 = cache.buffers[1];
  const auto& patches2 = cache.buffers[2];
  const auto& act2 = cache.buffers[3];
  const auto& pooled = cache.buffers[4];
  const std::size_t n1 = l.h1 * l.w1;
  const std::size_t n2 = l.h2 * l.w2;
  const double* p = params_.data();
  double* g = grad_params.data();

  std::vector<double> grad_pooled(l.c2, 0.0);
  for (std::size_t o = 0; o < l.emb; ++o) {
    const double go = grad_z[o];
    g[l.fc_b_off + o] += go;
    double* gw = g + l.fc_w_off + o * l.c2;
    const double* wr = p + l.fc_w_off + o * l.c2;
    for (std::size_t ch = 0; ch < l.c2; ++ch) {
      gw[ch] += go * pooled[ch];
      grad_pooled[ch] += go * wr[ch];
    }
  }

  // Average pool then ReLU mask of conv2.
  std::vector<double> grad_pre2(n2 * l.c2);
  const double inv_n2 = 1.0 / static_cast<double>(n2);
  for (std::size_t q = 0; q < n2; ++q)
    for (std::size_t ch = 0; ch < l.c2; ++ch)
      grad_pre2[q * l.c2 + ch] = act2[q * l.c2 + ch] > 0.0 ? grad_pooled[ch] * inv_n2 : 0.0;

  std::vector<double> grad_patches2(n2 * l.patch2, 0.0);
  for (std::size_t q = 0; q < n2; ++q) {
    const double* x = patches2.data() + q * l.patch2;
    double* gx = grad_patches2.data() + q * l.patch2;
    for (std::size_t co = 0; co < l.c2; ++co) {
      const double gp = grad_pre2[q * l.c2 + co];
      if (gp == 0.0) continue;
      g[l.b2_off + co] += gp;
      double* gw = g + l.w2_off + co * l.patch2;
      const double* wr = p + l.w2_off + co * l.patch2;
      for (std::size_t k = 0; k < l.patch2; ++k) {
        gw[k] += gp * x[k];
        gx[k] += gp * wr[k];
      }
    }
  }

  std::vector<double> grad_act1(n1 * l.c1);
  col2im(grad_patches2, l.h1, l.w1, l.c1, grad_act1);

  for (std::size_t q = 0; q < n1; ++q) {
    const double* x = patches1.data() + q * l.patch1;
    for (std::size_t co = 0; co < l.c1; ++co) {
      if (!(act1[q * l.c1 + co] > 0.0)) continue;
      const double gp = grad_act1[q * l.c1 + co];
      g[l.b1_off + co] += gp;
      double* gw = g + l.w1_off + co * l.patch1;
      for (std::size_t k = 0; k < l.patch1; ++k) gw[k] += gp * x[k];
    }
  }
}

// ---------------------------------------------------------------------------

LinearLayer::LinearLayer(std::size_t in_dim, std::size_t out_dim)
    : weight(in_dim, out_dim), bias(out_dim, 0.0) {}

LinearLayer::LinearLayer(std::size_t in_dim, std::size_t out_dim, Rng& rng)
    : LinearLayer(in_dim, out_dim) {
  glorot(weight.data(), in_dim, out_dim, rng);
}

std::vector<double> LinearLayer::forward(std::span<const double> z) const {
  if (z.size() != in_dim()) {
    throw std::invalid_argument("linear layer expects input of length " + std::to_string(in_dim()) +
                                ", got " + std::to_string(z.size()));
  }
  std::vector<double> out(bias);
  for (std::size_t i = 0; i < in_dim(); ++i) {
    const double zi = z[i];
    const auto w = weight.row(i);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += zi * w[j];
  }
  return out;
}

std::vector<double> LinearLayer::backward(std::span<const double> z, std::span<const double> grad_out,
                                          LinearLayer& grad) const {
  if (z.size() != in_dim() || grad_out.size() != out_dim())
    throw std::invalid_argument("linear layer backward: shape mismatch");
  std::vector<double> grad_z(in_dim(), 0.0);
  for (std::size_t j = 0; j < out_dim(); ++j) grad.bias[j] += grad_out[j];
  for (std::size_t i = 0; i < in_dim(); ++i) {
    const auto w = weight.row(i);
    auto gw = grad.weight.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < out_dim(); ++j) {
      gw[j] += z[i] * grad_out[j];
      s += w[j] * grad_out[j];
    }
    grad_z[i] = s;
  }
  return grad_z;
}

ClassifierHead make_classifier_head(std::size_t embedding_dim, std::size_t num_classes, Rng& rng) {
  return {LinearLayer(embedding_dim, num_classes, rng)};
}

ProjectionHead make_projection_head(std::size_t embedding_dim, std::size_t projection_dim,
                                    ProjectionKind kind, Rng& rng) {
  return {LinearLayer(embedding_dim, projection_dim, rng), kind};
}

std::vector<double> class_logits(std::span<const double> z, const ClassifierHead& head) {
  return head.linear.forward(z);
}

std::vector<double> classify(std::span<const double> z, const ClassifierHead& head) {
  return softmax(class_logits(z, head));
}

std::vector<double> project(std::span<const double> z, const ProjectionHead& head, bool normalize) {
  auto raw = head.linear.forward(z);
  if (!normalize) return raw;
  return l2_normalize(raw);
}

}  // namespace sslkit
