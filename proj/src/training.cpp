#include "sslkit/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "sslkit/errors.hpp"
#include "sslkit/parallel.hpp"

namespace sslkit {

std::vector<double> TrainHistory::losses() const {
  std::vector<double> out;
  out.reserve(epochs.size());
  for (const auto& e : epochs) out.push_back(e.loss);
  return out;
}

std::string TrainHistory::to_csv(bool include_timing) const {
  std::ostringstream out;
  out << "epoch,loss,metric,batches,skipped_batches,queue_rows,prototype_updates,clamped_logs";
  if (include_timing) out << ",seconds";
  out << '\n';
  for (const auto& e : epochs) {
    out << e.epoch << ',' << format_double(e.loss) << ',' << (e.metric ? format_double(*e.metric) : "")
        << ',' << e.batches << ',' << e.skipped_batches << ',' << e.queue_rows << ','
        << e.prototype_updates << ',' << e.clamped_logs;
    if (include_timing) out << ',' << format_double(e.seconds);
    out << '\n';
  }
  return out.str();
}

void sgd_step(std::span<double> params, std::span<const double> grads, std::span<double> velocity,
              const SgdConfig& config) {
  if (params.size() != grads.size() || params.size() != velocity.size()) {
    throw std::invalid_argument("sgd_step: shape mismatch (params " + std::to_string(params.size()) +
                                ", grads " + std::to_string(grads.size()) + ", velocity " +
                                std::to_string(velocity.size()) + ")");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    velocity[i] = config.momentum * velocity[i] + grads[i] + config.weight_decay * params[i];
    params[i] -= config.learning_rate * velocity[i];
  }
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

SgdConfig sgd_of(const TrainConfig& c) { return {c.learning_rate, c.momentum, c.weight_decay}; }

ChannelStats resolve_stats(const TrainConfig& config, const LabeledDataset& train) {
  return config.auto_standardize ? compute_channel_stats(train) : config.augment.standardize;
}

void check_input_shape(const TrainConfig& config, const LabeledDataset& data) {
  if (data.empty()) return;
  const auto& img = data[0].image;
  if (img.height != config.encoder.height || img.width != config.encoder.width) {
    throw ConfigError("encoder expects " + std::to_string(config.encoder.height) + "x" +
                      std::to_string(config.encoder.width) + " images, dataset has " +
                      std::to_string(img.height) + "x" + std::to_string(img.width));
  }
}

ImageTensor make_view(const RgbImage& image, const TrainConfig& config, const ChannelStats& stats,
                      std::size_t epoch, std::size_t position, std::size_t view) {
  Rng rng = make_rng(config.seed, Stream::kAugment, {epoch, position, view});
  return apply_augment(to_tensor(image), draw_augment_params(config.augment, rng), stats);
}

void require_finite(double loss, std::size_t epoch, std::size_t batch) {
  if (!std::isfinite(loss)) {
    throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                         std::to_string(batch));
  }
}

// Per-sample parameter gradients, reduced in sample order so the result does
// not depend on the number of workers.
struct SampleGrad {
  std::vector<double> encoder;
  LinearLayer head;
};

void reduce_grads(const std::vector<SampleGrad>& parts, std::vector<double>& encoder, LinearLayer& head) {
  std::fill(encoder.begin(), encoder.end(), 0.0);
  std::fill(head.weight.data().begin(), head.weight.data().end(), 0.0);
  std::fill(head.bias.begin(), head.bias.end(), 0.0);
  for (const auto& p : parts) {
    for (std::size_t i = 0; i < encoder.size(); ++i) encoder[i] += p.encoder[i];
    auto hw = head.weight.data();
    auto pw = p.head.weight.data();
    for (std::size_t i = 0; i < hw.size(); ++i) hw[i] += pw[i];
    for (std::size_t i = 0; i < head.bias.size(); ++i) head.bias[i] += p.head.bias[i];
  }
}

// Optimizer state for encoder + one linear head.
struct Velocity {
  std::vector<double> encoder;
  std::vector<double> head_w;
  std::vector<double> head_b;

  Velocity(const ReferenceEncoder& enc, const LinearLayer& head)
      : encoder(enc.parameter_count(), 0.0),
        head_w(head.weight.size(), 0.0),
        head_b(head.bias.size(), 0.0) {}
};

void apply_step(ReferenceEncoder& encoder, LinearLayer& head, const std::vector<double>& grad_encoder,
                const LinearLayer& grad_head, Velocity& v, const SgdConfig& sgd) {
  sgd_step(encoder.parameters(), grad_encoder, v.encoder, sgd);
  sgd_step(head.weight.data(), grad_head.weight.data(), v.head_w, sgd);
  sgd_step(head.bias, grad_head.bias, v.head_b, sgd);
}

std::vector<double> class_weights_for(ClassWeighting weighting, const std::vector<std::size_t>& counts) {
  if (weighting == ClassWeighting::kUniform) return std::vector<double>(counts.size(), 1.0);
  return inverse_frequency_weights(counts);
}

std::vector<std::size_t> count_draws(const LabeledDataset& data, std::span<const std::size_t> order) {
  std::vector<std::size_t> draws(data.num_classes(), 0);
  for (std::size_t i : order) ++draws[static_cast<std::size_t>(data[i].label)];
  return draws;
}

std::vector<std::size_t> epoch_order(const TrainConfig& config, const LabeledDataset& data,
                                     std::size_t samples_per_class, std::size_t epoch) {
  const auto seed = derive_seed(config.seed, Stream::kEpochOrder, {epoch});
  if (config.sampling == Sampling::kBalanced) return balanced_epoch(data, samples_per_class, seed);
  return natural_epoch(data, seed);
}

void check_balanced_draws(const std::vector<std::size_t>& draws, std::size_t samples_per_class) {
  for (std::size_t k = 0; k < draws.size(); ++k) {
    if (draws[k] != samples_per_class) {
      throw std::logic_error("balanced epoch drew class " + std::to_string(k) + " " +
                             std::to_string(draws[k]) + " times, expected " +
                             std::to_string(samples_per_class));
    }
  }
}

// Forward state of one view through encoder and projection head.
struct ProjectedView {
  ActivationCache cache;
  std::vector<double> z;
  std::vector<double> unit;
  double raw_norm = 0.0;
};

ProjectedView project_view(const ReferenceEncoder& encoder, const ProjectionHead& head,
                           const ImageTensor& x) {
  ProjectedView pv;
  pv.z = encoder.forward(x, &pv.cache);
  const auto r = head.linear.forward(pv.z);
  pv.raw_norm = l2_norm(r);
  pv.unit = l2_normalize(r);
  return pv;
}

// Backpropagates dL/du of one view into a fresh per-sample gradient.
void backward_view(const ReferenceEncoder& encoder, const ProjectionHead& head,
                   const ProjectedView& pv, std::span<const double> grad_unit, SampleGrad& out) {
  const auto grad_r = l2_normalize_backward(pv.unit, pv.raw_norm, grad_unit);
  const auto grad_z = head.linear.backward(pv.z, grad_r, out.head);
  encoder.backward(pv.cache, grad_z, out.encoder);
}

std::vector<SampleGrad> fresh_grads(std::size_t n, const ReferenceEncoder& encoder, const LinearLayer& head) {
  return std::vector<SampleGrad>(n, SampleGrad{std::vector<double>(encoder.parameter_count(), 0.0),
                                               LinearLayer(head.in_dim(), head.out_dim())});
}

// Mixup partners and lambda for one batch; an identity pairing when mixup is off.
MixupBatch mix_batch(const TrainConfig& config, const std::vector<ImageTensor>& images,
                     const Matrix& targets, std::size_t epoch, std::size_t batch) {
  if (!config.mixup || images.size() < 2) return {images, targets, 1.0, {}};
  const auto seed = derive_seed(config.seed, Stream::kMixup, {epoch, batch});
  if (!config.mixup_lambda) return mixup(images, targets, config.mixup_alpha, seed);
  Rng rng(seed);
  std::vector<std::size_t> partners(images.size());
  std::iota(partners.begin(), partners.end(), 0);
  std::shuffle(partners.begin(), partners.end(), rng);
  return mixup_with(images, targets, *config.mixup_lambda, std::move(partners));
}

}  // namespace

TrainResult train_supervised(const TrainConfig& config, const LabeledDataset& train,
                             const LabeledDataset& validation, const EpochCallback& on_epoch) {
  config.validate();
  if (train.empty()) throw DataError("train_supervised: empty training fold");
  check_input_shape(config, train);
  const std::size_t num_classes = train.num_classes();

  TrainedModel model;
  model.regime = Regime::kSupervised;
  model.class_names = train.class_names();
  model.standardization = resolve_stats(config, train);
  {
    Rng rng = make_rng(config.seed, Stream::kInit, {0});
    model.encoder = ReferenceEncoder(config.encoder, rng);
  }
  {
    Rng rng = make_rng(config.seed, Stream::kInit, {1});
    model.classifier = make_classifier_head(config.encoder.embedding_dim, num_classes, rng);
  }
  ReferenceEncoder& encoder = model.encoder;
  LinearLayer& head = model.classifier->linear;

  const std::size_t samples_per_class =
      config.samples_per_class ? config.samples_per_class : default_samples_per_class(train);
  Velocity velocity(encoder, head);
  std::vector<double> grad_encoder(encoder.parameter_count());
  LinearLayer grad_head(head.in_dim(), head.out_dim());
  const SgdConfig sgd = sgd_of(config);

  TrainHistory history;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t0 = Clock::now();
    EpochRecord rec;
    rec.epoch = epoch;
    const auto order = epoch_order(config, train, samples_per_class, epoch);
    rec.class_draws = count_draws(train, order);
    if (config.sampling == Sampling::kBalanced) check_balanced_draws(rec.class_draws, samples_per_class);
    // Weighted cross-entropy corrects the class frequencies the loss actually
    // sees, i.e. those of the epoch's draws.
    const auto weights = class_weights_for(config.class_weighting, rec.class_draws);

    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0, b = 0; start < order.size(); start += config.batch_size, ++b) {
      const std::size_t n = std::min(config.batch_size, order.size() - start);
      std::vector<ImageTensor> images(n);
      std::vector<int> labels(n);
      parallel_for(n, [&](std::size_t i) {
        images[i] = make_view(train[order[start + i]].image, config, model.standardization, epoch, start + i, 0);
      });
      for (std::size_t i = 0; i < n; ++i) labels[i] = train[order[start + i]].label;
      const MixupBatch batch = mix_batch(config, images, one_hot(labels, num_classes), epoch, b);

      std::vector<ActivationCache> caches(n);
      std::vector<std::vector<double>> z(n);
      Matrix probs(n, num_classes);
      parallel_for(n, [&](std::size_t i) {
        z[i] = encoder.forward(batch.images[i], &caches[i]);
        const auto p = softmax(head.forward(z[i]));
        std::copy(p.begin(), p.end(), probs.row(i).begin());
      });
      const LossOutput loss = cross_entropy(probs, batch.targets, weights);
      require_finite(loss.value, epoch, b);
      rec.clamped_logs += loss.clamped;

      auto parts = fresh_grads(n, encoder, head);
      parallel_for(n, [&](std::size_t i) {
        const auto grad_z = head.backward(z[i], loss.grad.row(i), parts[i].head);
        encoder.backward(caches[i], grad_z, parts[i].encoder);
      });
      reduce_grads(parts, grad_encoder, grad_head);
      apply_step(encoder, head, grad_encoder, grad_head, velocity, sgd);

      loss_sum += loss.value * static_cast<double>(n);
      seen += n;
      ++rec.batches;
    }
    rec.loss = loss_sum / static_cast<double>(seen);
    if (!validation.empty()) {
      rec.metric = evaluate_model(encoder, *model.classifier, model.standardization, validation).macro_f1;
    }
    rec.seconds = seconds_since(t0);
    history.epochs.push_back(rec);
    if (on_epoch) on_epoch(history.epochs.back(), model);
  }
  return {std::move(model), std::move(history)};
}

TrainResult train_supervised(const TrainConfig& config, const LabeledDataset& dataset,
                             const FoldPlan& plan, std::size_t fold_index, const EpochCallback& on_epoch) {
  if (plan.assignments.size() != dataset.size()) {
    throw DataError("fold plan covers " + std::to_string(plan.assignments.size()) +
                    " samples, dataset has " + std::to_string(dataset.size()));
  }
  if (fold_index >= plan.k) {
    throw ConfigError("fold index " + std::to_string(fold_index) + " outside [0, " + std::to_string(plan.k) + ")");
  }
  const auto train_idx = plan.train_indices(fold_index);
  const auto val_idx = plan.fold_indices(fold_index);
  return train_supervised(config, dataset.subset(train_idx), dataset.subset(val_idx), on_epoch);
}

TrainResult train_swav(const TrainConfig& config, const LabeledDataset& dataset, const EpochCallback& on_epoch) {
  config.validate();
  if (config.regime != Regime::kSwav) throw ConfigError("regime must be swav for train_swav");
  if (dataset.size() < 2) throw DataError("train_swav: need at least 2 images");
  check_input_shape(config, dataset);

  TrainedModel model;
  model.regime = Regime::kSwav;
  model.class_names = dataset.class_names();
  model.standardization = resolve_stats(config, dataset);
  {
    Rng rng = make_rng(config.seed, Stream::kInit, {0});
    model.encoder = ReferenceEncoder(config.encoder, rng);
  }
  {
    Rng rng = make_rng(config.seed, Stream::kInit, {2});
    model.projection = make_projection_head(config.encoder.embedding_dim, config.projection_dim,
                                            ProjectionKind::kSwav, rng);
  }
  {
    Rng rng = make_rng(config.seed, Stream::kPrototypes);
    model.prototypes = PrototypeBank::random(config.prototypes, config.projection_dim, rng);
  }
  ReferenceEncoder& encoder = model.encoder;
  ProjectionHead& proj = *model.projection;
  PrototypeBank& bank = *model.prototypes;

  Velocity velocity(encoder, proj.linear);
  std::vector<double> proto_velocity(bank.vectors().size(), 0.0);
  std::vector<double> grad_encoder(encoder.parameter_count());
  LinearLayer grad_head(proj.linear.in_dim(), proj.linear.out_dim());
  const SgdConfig sgd = sgd_of(config);
  // Prototypes live on the sphere; decay would only fight the re-projection.
  const SgdConfig proto_sgd{config.learning_rate, config.momentum, 0.0};
  AssignmentQueue queue(config.queue_capacity);
  const std::size_t views = config.views;

  TrainHistory history;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t0 = Clock::now();
    EpochRecord rec;
    rec.epoch = epoch;
    const bool frozen = epoch <= config.prototype_freeze_epochs;
    const bool use_queue = config.queue_capacity > 0 && epoch >= config.queue_start_epoch;
    bank.set_frozen(frozen);
    // Labels are never read: the order is a plain permutation of all images.
    const auto order = natural_epoch(dataset, derive_seed(config.seed, Stream::kEpochOrder, {epoch}));

    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0, b = 0; start < order.size(); start += config.batch_size, ++b) {
      const std::size_t n = std::min(config.batch_size, order.size() - start);
      if (n < 2) {
        std::fprintf(stderr, "warning: epoch %zu skips a batch of %zu image (Sinkhorn needs >= 2)\n", epoch, n);
        ++rec.skipped_batches;
        continue;
      }
      // Row v * n + i holds view v of batch image i.
      std::vector<ProjectedView> pv(views * n);
      parallel_for(views * n, [&](std::size_t r) {
        const std::size_t v = r / n, i = r % n;
        pv[r] = project_view(encoder, proj,
                             make_view(dataset[order[start + i]].image, config, model.standardization,
                                       epoch, start + i, v));
      });
      std::vector<Matrix> units(views, Matrix(n, config.projection_dim));
      for (std::size_t r = 0; r < views * n; ++r)
        std::copy(pv[r].unit.begin(), pv[r].unit.end(), units[r / n].row(r % n).begin());

      const AssignmentResult assigned =
          assign_prototypes(units, bank, use_queue ? &queue : nullptr, config.code_temperature,
                            config.sinkhorn_epsilon, config.sinkhorn_iterations);
      rec.queue_rows += assigned.queue_rows;
      const SwavLossOutput loss = swav_loss(assigned.codes, assigned.targets, config.code_temperature);
      require_finite(loss.value, epoch, b);
      rec.clamped_logs += loss.clamped;

      // scores = U V^T, so dL/dU = G V and dL/dV = G^T U.
      std::vector<Matrix> grad_units(views);
      Matrix grad_protos(bank.size(), bank.dim());
      for (std::size_t v = 0; v < views; ++v) {
        grad_units[v] = matmul(loss.grad_scores[v], bank.vectors());
        if (!frozen) {
          const Matrix gv = matmul(transpose(loss.grad_scores[v]), units[v]);
          auto dst = grad_protos.data();
          auto src = gv.data();
          for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
        }
      }

      auto parts = fresh_grads(views * n, encoder, proj.linear);
      parallel_for(views * n, [&](std::size_t r) {
        backward_view(encoder, proj, pv[r], grad_units[r / n].row(r % n), parts[r]);
      });
      reduce_grads(parts, grad_encoder, grad_head);
      apply_step(encoder, proj.linear, grad_encoder, grad_head, velocity, sgd);
      if (!frozen) {
        sgd_step(bank.mutable_vectors().data(), grad_protos.data(), proto_velocity, proto_sgd);
        bank.renormalize();
        ++rec.prototype_updates;
      }
      if (use_queue) {
        for (const auto& u : units) queue.push(u);
      }

      loss_sum += loss.value * static_cast<double>(n);
      seen += n;
      ++rec.batches;
    }
    rec.loss = seen ? loss_sum / static_cast<double>(seen) : 0.0;
    rec.seconds = seconds_since(t0);
    history.epochs.push_back(rec);
    if (on_epoch) on_epoch(history.epochs.back(), model);
  }
  bank.set_frozen(false);
  return {std::move(model), std::move(history)};
}

TrainResult train_supcon(const TrainConfig& config, const LabeledDataset& dataset, const EpochCallback& on_epoch) {
  config.validate();
  if (config.regime != Regime::kSupcon) throw ConfigError("regime must be supcon for train_supcon");
  if (dataset.size() < 2) throw DataError("train_supcon: need at least 2 images");
  check_input_shape(config, dataset);

  TrainedModel model;
  model.regime = Regime::kSupcon;
  model.class_names = dataset.class_names();
  model.standardization = resolve_stats(config, dataset);
  {
    Rng rng = make_rng(config.seed, Stream::kInit, {0});
    model.encoder = ReferenceEncoder(config.encoder, rng);
  }
  ProjectionHead proj;
  {
    Rng rng = make_rng(config.seed, Stream::kInit, {2});
    proj = make_projection_head(config.encoder.embedding_dim, config.projection_dim, ProjectionKind::kSupcon, rng);
  }
  ReferenceEncoder& encoder = model.encoder;

  const std::size_t samples_per_class =
      config.samples_per_class ? config.samples_per_class : default_samples_per_class(dataset);
  Velocity velocity(encoder, proj.linear);
  std::vector<double> grad_encoder(encoder.parameter_count());
  LinearLayer grad_head(proj.linear.in_dim(), proj.linear.out_dim());
  const SgdConfig sgd = sgd_of(config);
  const std::size_t views = config.views;

  TrainHistory history;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t0 = Clock::now();
    EpochRecord rec;
    rec.epoch = epoch;
    const auto order = epoch_order(config, dataset, samples_per_class, epoch);
    rec.class_draws = count_draws(dataset, order);
    if (config.sampling == Sampling::kBalanced) check_balanced_draws(rec.class_draws, samples_per_class);

    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0, b = 0; start < order.size(); start += config.batch_size, ++b) {
      const std::size_t n = std::min(config.batch_size, order.size() - start);
      if (n < 2) {
        std::fprintf(stderr, "warning: epoch %zu skips a batch with a single image\n", epoch);
        ++rec.skipped_batches;
        continue;
      }
      std::vector<ProjectedView> pv(views * n);
      parallel_for(views * n, [&](std::size_t r) {
        const std::size_t v = r / n, i = r % n;
        pv[r] = project_view(encoder, proj,
                             make_view(dataset[order[start + i]].image, config, model.standardization,
                                       epoch, start + i, v));
      });
      Matrix u(views * n, config.projection_dim);
      std::vector<int> labels(views * n);
      for (std::size_t r = 0; r < views * n; ++r) {
        std::copy(pv[r].unit.begin(), pv[r].unit.end(), u.row(r).begin());
        labels[r] = dataset[order[start + r % n]].label;
      }
      const LossOutput loss = supcon_loss(u, labels, config.supcon_temperature);
      require_finite(loss.value, epoch, b);

      auto parts = fresh_grads(views * n, encoder, proj.linear);
      parallel_for(views * n, [&](std::size_t r) { backward_view(encoder, proj, pv[r], loss.grad.row(r), parts[r]); });
      reduce_grads(parts, grad_encoder, grad_head);
      apply_step(encoder, proj.linear, grad_encoder, grad_head, velocity, sgd);

      loss_sum += loss.value * static_cast<double>(n);
      seen += n;
      ++rec.batches;
    }
    rec.loss = seen ? loss_sum / static_cast<double>(seen) : 0.0;
    rec.seconds = seconds_since(t0);
    history.epochs.push_back(rec);
    if (on_epoch) on_epoch(history.epochs.back(), model);
  }
  // The head only shapes the contrastive space; downstream use reads z.
  return {std::move(model), std::move(history)};
}

TrainResult train(const TrainConfig& config, const LabeledDataset& train_set,
                  const LabeledDataset& validation, const EpochCallback& on_epoch) {
  switch (config.regime) {
    case Regime::kSupervised: return train_supervised(config, train_set, validation, on_epoch);
    case Regime::kSwav: return train_swav(config, train_set, on_epoch);
    case Regime::kSupcon: return train_supcon(config, train_set, on_epoch);
  }
  throw ConfigError("regime: unknown value");
}

ProbeResult linear_probe(const Encoder& frozen_encoder, const ChannelStats& standardization,
                         const LabeledDataset& train, const LabeledDataset& eval, const ProbeConfig& config,
                         std::uint64_t seed) {
  if (train.empty()) throw DataError("linear_probe: empty training set");
  if (eval.empty()) throw DataError("linear_probe: empty evaluation set");
  if (config.epochs == 0 || config.batch_size == 0) throw ConfigError("probe epochs and batch_size must be >= 1");
  const std::size_t d = frozen_encoder.embedding_dim();
  const std::size_t num_classes = train.num_classes();

  const auto raw = extract_features(frozen_encoder, standardization, train);
  // Features are whitened per dimension for conditioning; the scaling is
  // folded back into W and b so the head consumes raw z.
  std::vector<double> mean(d, 0.0), scale(d, 0.0);
  for (const auto& f : raw)
    for (std::size_t k = 0; k < d; ++k) mean[k] += f[k];
  for (auto& m : mean) m /= static_cast<double>(raw.size());
  for (const auto& f : raw)
    for (std::size_t k = 0; k < d; ++k) scale[k] += (f[k] - mean[k]) * (f[k] - mean[k]);
  for (auto& s : scale) {
    s = std::sqrt(s / static_cast<double>(raw.size()));
    if (s < 1e-8) s = 1.0;
  }
  std::vector<std::vector<double>> features(raw.size(), std::vector<double>(d));
  for (std::size_t i = 0; i < raw.size(); ++i)
    for (std::size_t k = 0; k < d; ++k) features[i][k] = (raw[i][k] - mean[k]) / scale[k];

  const auto weights = class_weights_for(config.class_weighting, train.class_counts());
  LinearLayer head(d, num_classes);
  LinearLayer grad(d, num_classes);
  std::vector<double> vw(head.weight.size(), 0.0), vb(num_classes, 0.0);
  const SgdConfig sgd{config.learning_rate, config.momentum, config.weight_decay};

  ProbeResult result;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto order = natural_epoch(train, derive_seed(seed, Stream::kProbe, {epoch}));
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t n = std::min(config.batch_size, order.size() - start);
      Matrix probs(n, num_classes);
      std::vector<int> labels(n);
      for (std::size_t i = 0; i < n; ++i) {
        const auto p = softmax(head.forward(features[order[start + i]]));
        std::copy(p.begin(), p.end(), probs.row(i).begin());
        labels[i] = train[order[start + i]].label;
      }
      const LossOutput loss = cross_entropy(probs, one_hot(labels, num_classes), weights);
      require_finite(loss.value, epoch, start / config.batch_size);
      std::fill(grad.weight.data().begin(), grad.weight.data().end(), 0.0);
      std::fill(grad.bias.begin(), grad.bias.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i) head.backward(features[order[start + i]], loss.grad.row(i), grad);
      sgd_step(head.weight.data(), grad.weight.data(), vw, sgd);
      sgd_step(head.bias, grad.bias, vb, sgd);
      loss_sum += loss.value * static_cast<double>(n);
    }
    result.losses.push_back(loss_sum / static_cast<double>(order.size()));
  }

  result.head.linear = LinearLayer(d, num_classes);
  for (std::size_t j = 0; j < num_classes; ++j) {
    double b = head.bias[j];
    for (std::size_t k = 0; k < d; ++k) {
      const double w = head.weight(k, j) / scale[k];
      result.head.linear.weight(k, j) = w;
      b -= w * mean[k];
    }
    result.head.linear.bias[j] = b;
  }
  result.report = evaluate_model(frozen_encoder, result.head, standardization, eval);
  return result;
}

}  // namespace sslkit
