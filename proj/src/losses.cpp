#include "sslkit/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "sslkit/errors.hpp"

namespace sslkit {

namespace {

double safe_log(double x, std::size_t& clamped) {
  if (x < kLogFloor) {
    ++clamped;
    return std::log(kLogFloor);
  }
  return std::log(x);
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch " + std::to_string(a.rows()) +
                                "x" + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                                "x" + std::to_string(b.cols()));
  }
}

}  // namespace

std::vector<double> inverse_frequency_weights(std::span<const std::size_t> counts) {
  std::vector<double> w(counts.size(), 0.0);
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) continue;
    w[c] = 1.0 / static_cast<double>(counts[c]);
    sum += w[c];
    ++present;
  }
  if (present == 0) return w;
  const double mean = sum / static_cast<double>(present);
  for (double& x : w) x /= mean;
  return w;
}

LossOutput cross_entropy(const Matrix& probs, const Matrix& targets,
                         std::span<const double> class_weights) {
  require_same_shape(probs, targets, "cross_entropy");
  if (class_weights.size() != probs.cols())
    throw std::invalid_argument("cross_entropy: class_weights length mismatch");
  const std::size_t n = probs.rows();
  LossOutput out;
  out.grad = Matrix(n, probs.cols());
  if (n == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = probs.row(i);
    const auto y = targets.row(i);
    double row_weight = 0.0;
    double target_mass = 0.0;
    for (std::size_t j = 0; j < y.size(); ++j) {
      row_weight += y[j] * class_weights[j];
      target_mass += y[j];
    }
    // Dividing by the target mass makes unit weights give exactly 1.
    if (target_mass > 0.0) row_weight /= target_mass;
    double li = 0.0;
    for (std::size_t j = 0; j < y.size(); ++j)
      if (y[j] != 0.0) li -= y[j] * safe_log(p[j], out.clamped);
    out.value += row_weight * li * inv_n;
    auto g = out.grad.row(i);
    for (std::size_t j = 0; j < y.size(); ++j) g[j] = row_weight * (p[j] * target_mass - y[j]) * inv_n;
  }
  if (!std::isfinite(out.value)) throw NumericalError("cross_entropy: non-finite loss");
  return out;
}

// ---------------------------------------------------------------------------

PrototypeBank::PrototypeBank(Matrix vectors, bool frozen) : vectors_(std::move(vectors)), frozen_(frozen) {
  renormalize();
}

PrototypeBank PrototypeBank::random(std::size_t count, std::size_t dim, Rng& rng) {
  if (count == 0 || dim == 0) throw std::invalid_argument("PrototypeBank: empty bank");
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix v(count, dim);
  for (double& x : v.data()) x = gauss(rng);
  return PrototypeBank(std::move(v));
}

void PrototypeBank::renormalize() { l2_normalize_rows(vectors_); }

Matrix prototype_scores(const Matrix& u, const PrototypeBank& bank) {
  if (u.cols() != bank.dim()) {
    throw std::invalid_argument("prototype_scores: vectors have dim " + std::to_string(u.cols()) +
                                ", prototypes have dim " + std::to_string(bank.dim()));
  }
  return matmul_transposed(u, bank.vectors());
}

std::vector<Matrix> swav_codes(const std::vector<Matrix>& views, const PrototypeBank& bank,
                               double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("swav_codes: temperature must be > 0");
  std::vector<Matrix> codes;
  codes.reserve(views.size());
  for (const auto& u : views) codes.push_back(softmax_rows(prototype_scores(u, bank), temperature));
  return codes;
}

Matrix sinkhorn_assign(const Matrix& scores, double epsilon, std::size_t iterations) {
  if (scores.rows() == 0 || scores.cols() == 0) throw std::invalid_argument("sinkhorn_assign: empty scores");
  if (!(epsilon > 0.0)) throw std::invalid_argument("sinkhorn_assign: epsilon must be > 0");
  if (!scores.all_finite()) throw NumericalError("sinkhorn_assign: non-finite scores");
  const std::size_t b = scores.rows();
  const std::size_t k = scores.cols();
  const double log_col_mass = std::log(static_cast<double>(b) / static_cast<double>(k));

  Matrix log_q(b, k);
  for (std::size_t i = 0; i < scores.size(); ++i) log_q.data()[i] = scores.data()[i] / epsilon;

  std::vector<double> column(b);
  auto normalize_rows = [&] {
    for (std::size_t i = 0; i < b; ++i) {
      auto r = log_q.row(i);
      const double lse = log_sum_exp(r);
      for (double& x : r) x -= lse;
    }
  };
  // Rows start normalized, which makes the result invariant to per-row score
  // offsets at any iteration count.
  normalize_rows();
  for (std::size_t it = 0; it < iterations; ++it) {
    for (std::size_t j = 0; j < k; ++j) {
      for (std::size_t i = 0; i < b; ++i) column[i] = log_q(i, j);
      const double shift = log_col_mass - log_sum_exp(column);
      for (std::size_t i = 0; i < b; ++i) log_q(i, j) += shift;
    }
    normalize_rows();
  }

  Matrix q(b, k);
  for (std::size_t i = 0; i < b; ++i) {
    auto r = log_q.row(i);
    auto out = q.row(i);
    // Shifting by the row max maps equal entries to exactly 1/K.
    const double top = *std::max_element(r.begin(), r.end());
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      out[j] = std::exp(r[j] - top);
      s += out[j];
    }
    for (double& x : out) x /= s;
  }
  return q;
}

SwavLossOutput swav_loss(const std::vector<Matrix>& codes, const std::vector<Matrix>& targets,
                         double temperature) {
  const std::size_t m = codes.size();
  if (m < 2) throw std::invalid_argument("swav_loss: need at least 2 views, got " + std::to_string(m));
  if (targets.size() != m) throw std::invalid_argument("swav_loss: codes and targets differ in view count");
  if (!(temperature > 0.0)) throw std::invalid_argument("swav_loss: temperature must be > 0");
  for (std::size_t v = 0; v < m; ++v) {
    require_same_shape(codes[v], codes[0], "swav_loss");
    require_same_shape(targets[v], codes[0], "swav_loss");
  }
  const std::size_t n = codes[0].rows();
  const std::size_t k = codes[0].cols();
  SwavLossOutput out;
  out.grad_scores.assign(m, Matrix(n, k));
  if (n == 0) return out;
  const double scale = 1.0 / (static_cast<double>(n) * static_cast<double>(m) * static_cast<double>(m - 1));

  std::vector<double> target_sum(k);
  for (std::size_t v = 0; v < m; ++v) {
    // View v's code is supervised by every other view's target.
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = codes[v].row(i);
      auto g = out.grad_scores[v].row(i);
      double mass = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        target_sum[j] = 0.0;
        for (std::size_t t = 0; t < m; ++t)
          if (t != v) target_sum[j] += targets[t](i, j);
        mass += target_sum[j];
        if (target_sum[j] != 0.0) out.value -= scale * target_sum[j] * safe_log(c[j], out.clamped);
      }
      for (std::size_t j = 0; j < k; ++j) g[j] = scale * (mass * c[j] - target_sum[j]) / temperature;
    }
  }
  if (!std::isfinite(out.value)) throw NumericalError("swav_loss: non-finite loss");
  return out;
}

// ---------------------------------------------------------------------------

void AssignmentQueue::push(const Matrix& batch) {
  if (capacity_ == 0) return;
  for (std::size_t i = 0; i < batch.rows(); ++i) {
    const auto r = batch.row(i);
    rows_.emplace_back(r.begin(), r.end());
    if (rows_.size() > capacity_) rows_.pop_front();
  }
}

Matrix AssignmentQueue::as_matrix(std::size_t dim) const {
  Matrix out(rows_.size(), dim);
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    if (rows_[i].size() != dim) throw std::invalid_argument("AssignmentQueue: row dimension mismatch");
    std::copy(rows_[i].begin(), rows_[i].end(), out.row(i).begin());
  }
  return out;
}

AssignmentResult assign_prototypes(const std::vector<Matrix>& views, const PrototypeBank& bank,
                                   const AssignmentQueue* queue, double code_temperature,
                                   double epsilon, std::size_t iterations) {
  AssignmentResult result;
  result.epsilon = epsilon;
  result.iterations = iterations;
  result.codes = swav_codes(views, bank, code_temperature);
  Matrix queue_scores;
  if (queue && !queue->empty()) {
    queue_scores = prototype_scores(queue->as_matrix(bank.dim()), bank);
    result.queue_rows = queue_scores.rows();
  }
  for (const auto& u : views) {
    const Matrix batch_scores = prototype_scores(u, bank);
    const Matrix all = sinkhorn_assign(vstack(batch_scores, queue_scores), epsilon, iterations);
    Matrix top(batch_scores.rows(), batch_scores.cols());
    std::copy(all.data().begin(), all.data().begin() + static_cast<std::ptrdiff_t>(top.size()),
              top.data().begin());
    result.targets.push_back(std::move(top));
  }
  return result;
}

// ---------------------------------------------------------------------------

LossOutput supcon_loss(const Matrix& u, std::span<const int> labels, double temperature) {
  const std::size_t n = u.rows();
  if (labels.size() != n) throw std::invalid_argument("supcon_loss: one label per row required");
  if (!(temperature > 0.0)) throw std::invalid_argument("supcon_loss: temperature must be > 0");
  if (n < 2) throw std::invalid_argument("supcon_loss: need at least 2 rows");
  LossOutput out;
  out.grad = Matrix(n, u.cols());
  const Matrix sim = matmul_transposed(u, u);
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> logits(n);
  std::vector<double> coef(n);

  for (std::size_t i = 0; i < n; ++i) {
    std::size_t positives = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i && labels[j] == labels[i]) ++positives;
    if (positives == 0) {
      throw std::invalid_argument("supcon_loss: anchor " + std::to_string(i) + " has an empty positive set");
    }
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) {
      logits[k] = sim(i, k) / temperature;
      if (k != i) m = std::max(m, logits[k]);
    }
    double z = 0.0;
    for (std::size_t k = 0; k < n; ++k)
      if (k != i) z += std::exp(logits[k] - m);
    const double lse = m + std::log(z);
    const double inv_p = 1.0 / static_cast<double>(positives);

    double li = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == i) {
        coef[k] = 0.0;
        continue;
      }
      const bool positive = labels[k] == labels[i];
      if (positive) li -= inv_p * (logits[k] - lse);
      coef[k] = (std::exp(logits[k] - lse) - (positive ? inv_p : 0.0)) * inv_n / temperature;
    }
    out.value += li * inv_n;

    // d s_ik / d u_i = u_k and d s_ik / d u_k = u_i.
    auto gi = out.grad.row(i);
    const auto ui = u.row(i);
    for (std::size_t k = 0; k < n; ++k) {
      if (coef[k] == 0.0) continue;
      const auto uk = u.row(k);
      auto gk = out.grad.row(k);
      for (std::size_t d = 0; d < u.cols(); ++d) {
        gi[d] += coef[k] * uk[d];
        gk[d] += coef[k] * ui[d];
      }
    }
  }
  if (!std::isfinite(out.value)) throw NumericalError("supcon_loss: non-finite loss");
  return out;
}

}  // namespace sslkit
