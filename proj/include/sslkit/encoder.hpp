#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "sslkit/image.hpp"
#include "sslkit/numeric.hpp"
#include "sslkit/random.hpp"

namespace sslkit {

// Intermediate activations recorded by a forward pass; the layout is private
// to the encoder that produced it.
struct ActivationCache {
  std::vector<std::vector<double>> buffers;
};

// Feature extractor z = f(x; theta). Parameters live in one flat buffer so the
// optimizer and checkpoint code can treat every backbone alike.
class Encoder {
 public:
  virtual ~Encoder() = default;

  virtual std::string kind() const = 0;
  virtual nlohmann::json architecture() const = 0;
  virtual std::size_t input_height() const = 0;
  virtual std::size_t input_width() const = 0;
  virtual std::size_t embedding_dim() const = 0;

  virtual std::span<double> parameters() = 0;
  virtual std::span<const double> parameters() const = 0;

  // Throws std::invalid_argument on input shape mismatch. `cache` may be null
  // when no backward pass follows.
  virtual std::vector<double> forward(const ImageTensor& image, ActivationCache* cache) const = 0;

  // Accumulates dL/dtheta into grad_params given dL/dz.
  virtual void backward(const ActivationCache& cache, std::span<const double> grad_z,
                        std::span<double> grad_params) const = 0;

  std::size_t parameter_count() const { return parameters().size(); }
  std::vector<double> encode(const ImageTensor& image) const { return forward(image, nullptr); }
};

struct ReferenceEncoderConfig {
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t conv1_channels = 16;
  std::size_t conv2_channels = 32;
  std::size_t embedding_dim = 64;

  // Embedding width of the full-scale ResNet-50 backbone.
  static constexpr std::size_t kResNetEmbeddingDim = 2048;

  void validate() const;
  friend bool operator==(const ReferenceEncoderConfig&, const ReferenceEncoderConfig&) = default;
};

nlohmann::json encoder_config_to_json(const ReferenceEncoderConfig& c);
ReferenceEncoderConfig encoder_config_from_json(const nlohmann::json& j,
                                                ReferenceEncoderConfig base = {});

// conv3x3/s2 + ReLU -> conv3x3/s2 + ReLU -> global average pool -> linear.
class ReferenceEncoder final : public Encoder {
 public:
  ReferenceEncoder() = default;
  // All parameters zero.
  explicit ReferenceEncoder(const ReferenceEncoderConfig& config);
  // Glorot-uniform weights, zero biases.
  ReferenceEncoder(const ReferenceEncoderConfig& config, Rng& rng);

  static std::size_t parameter_count_for(const ReferenceEncoderConfig& config);

  const ReferenceEncoderConfig& config() const { return config_; }

  std::string kind() const override { return "reference-conv2"; }
  nlohmann::json architecture() const override;
  std::size_t input_height() const override { return config_.height; }
  std::size_t input_width() const override { return config_.width; }
  std::size_t embedding_dim() const override { return config_.embedding_dim; }

  std::span<double> parameters() override { return params_; }
  std::span<const double> parameters() const override { return params_; }

  std::vector<double> forward(const ImageTensor& image, ActivationCache* cache) const override;
  void backward(const ActivationCache& cache, std::span<const double> grad_z,
                std::span<double> grad_params) const override;

  friend bool operator==(const ReferenceEncoder& a, const ReferenceEncoder& b) {
    return a.config_ == b.config_ && a.params_ == b.params_;
  }

 private:
  struct Layout;
  Layout layout() const;

  ReferenceEncoderConfig config_;
  std::vector<double> params_;
};

// Fully connected layer out = W^T z + b with W stored in_dim x out_dim, so
// column j is the weight vector of output j.
struct LinearLayer {
  Matrix weight;
  std::vector<double> bias;

  LinearLayer() = default;
  LinearLayer(std::size_t in_dim, std::size_t out_dim);
  LinearLayer(std::size_t in_dim, std::size_t out_dim, Rng& rng);

  std::size_t in_dim() const { return weight.rows(); }
  std::size_t out_dim() const { return weight.cols(); }

  std::vector<double> forward(std::span<const double> z) const;
  // Accumulates parameter gradients into `grad` and returns dL/dz.
  std::vector<double> backward(std::span<const double> z, std::span<const double> grad_out,
                               LinearLayer& grad) const;

  friend bool operator==(const LinearLayer&, const LinearLayer&) = default;
};

struct ClassifierHead {
  LinearLayer linear;

  std::size_t num_classes() const { return linear.out_dim(); }
  friend bool operator==(const ClassifierHead&, const ClassifierHead&) = default;
};

enum class ProjectionKind { kSwav, kSupcon };

struct ProjectionHead {
  LinearLayer linear;
  ProjectionKind kind = ProjectionKind::kSwav;

  std::size_t dim() const { return linear.out_dim(); }
  friend bool operator==(const ProjectionHead&, const ProjectionHead&) = default;
};

ClassifierHead make_classifier_head(std::size_t embedding_dim, std::size_t num_classes, Rng& rng);
ProjectionHead make_projection_head(std::size_t embedding_dim, std::size_t projection_dim,
                                    ProjectionKind kind, Rng& rng);

std::vector<double> class_logits(std::span<const double> z, const ClassifierHead& head);
// softmax(W^T z + b).
std::vector<double> classify(std::span<const double> z, const ClassifierHead& head);

// g(z; omega), optionally L2-normalized. Throws NumericalError when the raw
// projection is degenerate and normalization is requested.
std::vector<double> project(std::span<const double> z, const ProjectionHead& head, bool normalize);

}  // namespace sslkit
