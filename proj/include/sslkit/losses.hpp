#pragma once

#include <cstddef>
#include <deque>
#include <span>
#include <vector>

#include "sslkit/numeric.hpp"
#include "sslkit/random.hpp"

namespace sslkit {

inline constexpr double kLogFloor = 1e-12;

struct LossOutput {
  double value = 0.0;
  Matrix grad;
  // Number of log arguments raised to kLogFloor.
  std::size_t clamped = 0;
};

// ---------------------------------------------------------------------------
// Weighted cross-entropy

// Inverse class frequency normalized to mean 1 over classes with support.
// Classes without support get weight 0.
std::vector<double> inverse_frequency_weights(std::span<const std::size_t> counts);

// L = -(1/N) sum_i w(y_i) sum_j y_ij ln p_ij, where w(y_i) = sum_j y_ij w_j /
// sum_j y_ij supports soft (mixup) targets. The gradient is taken w.r.t. the logits that
// produced `probs`: w(y_i) (p_i - y_i) / N.
LossOutput cross_entropy(const Matrix& probs, const Matrix& targets,
                         std::span<const double> class_weights);

// ---------------------------------------------------------------------------
// Prototypes and codes

// K unit-norm prototype vectors, one per row.
class PrototypeBank {
 public:
  PrototypeBank() = default;
  // Rows must be non-degenerate; they are normalized on construction.
  explicit PrototypeBank(Matrix vectors, bool frozen = false);
  // Uniform draws on the unit sphere.
  static PrototypeBank random(std::size_t count, std::size_t dim, Rng& rng);

  std::size_t size() const { return vectors_.rows(); }
  std::size_t dim() const { return vectors_.cols(); }
  const Matrix& vectors() const { return vectors_; }
  Matrix& mutable_vectors() { return vectors_; }

  bool frozen() const { return frozen_; }
  void set_frozen(bool frozen) { frozen_ = frozen; }

  // Re-projects every prototype onto the unit sphere.
  void renormalize();

  friend bool operator==(const PrototypeBank&, const PrototypeBank&) = default;

 private:
  Matrix vectors_;
  bool frozen_ = false;
};

// Dot-product similarities u * V^T (rows of u are unit vectors).
Matrix prototype_scores(const Matrix& u, const PrototypeBank& bank);

// Per view: softmax(u V^T / temperature) row-wise.
std::vector<Matrix> swav_codes(const std::vector<Matrix>& views, const PrototypeBank& bank,
                               double temperature);

// Log-domain Sinkhorn-Knopp on exp(scores / epsilon). Each iteration rescales
// columns to sum B/K and then rows to sum 1; the output rows are distributions.
Matrix sinkhorn_assign(const Matrix& scores, double epsilon, std::size_t iterations);

struct SwavLossOutput {
  double value = 0.0;
  // dL/d(similarity) per view, B x K. Targets are constants.
  std::vector<Matrix> grad_scores;
  std::size_t clamped = 0;
};

// Swapped prediction: L = -1/(N M (M-1)) sum_i sum_{m1} sum_{m2 != m1} sum_j
// o^(m1)_ij ln c^(m2)_ij. `temperature` is the code temperature that turned
// similarities into `codes`, needed for the gradient w.r.t. similarities.
SwavLossOutput swav_loss(const std::vector<Matrix>& codes, const std::vector<Matrix>& targets,
                         double temperature);

// ---------------------------------------------------------------------------
// Assignment queue

// FIFO store of recent projected vectors. Queue rows enlarge the Sinkhorn
// problem only; they carry no loss and receive no gradient.
class AssignmentQueue {
 public:
  explicit AssignmentQueue(std::size_t capacity = 1280) : capacity_(capacity) {}

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return rows_.size(); }
  bool empty() const { return rows_.empty(); }
  const std::deque<std::vector<double>>& rows() const { return rows_; }

  // Appends every row of `batch`, evicting the oldest beyond capacity.
  void push(const Matrix& batch);
  Matrix as_matrix(std::size_t dim) const;
  void clear() { rows_.clear(); }

 private:
  std::size_t capacity_;
  std::deque<std::vector<double>> rows_;
};

struct AssignmentResult {
  std::vector<Matrix> codes;    // M x (B x K)
  std::vector<Matrix> targets;  // M x (B x K)
  double epsilon = 0.0;
  std::size_t iterations = 0;
  std::size_t queue_rows = 0;   // queue rows appended to each Sinkhorn problem
};

// Codes and Sinkhorn targets for every view. When `queue` is non-null and
// non-empty, queue scores are stacked under the batch scores before Sinkhorn
// and only the batch rows are kept.
AssignmentResult assign_prototypes(const std::vector<Matrix>& views, const PrototypeBank& bank,
                                   const AssignmentQueue* queue, double code_temperature,
                                   double epsilon, std::size_t iterations);

// ---------------------------------------------------------------------------
// Supervised contrastive

// Rows of `u` are unit vectors, one per view; `labels[i]` is the label of the
// image that produced row i. P(i) holds every other row with the same label.
// L = -(1/B) sum_i (1/|P(i)|) sum_{j in P(i)} ln( exp(u_i.u_j/tau) /
// sum_{k != i} exp(u_i.u_k/tau) ). Gradient w.r.t. u.
LossOutput supcon_loss(const Matrix& u, std::span<const int> labels, double temperature);

}  // namespace sslkit
