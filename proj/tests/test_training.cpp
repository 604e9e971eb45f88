#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "sslkit/checkpoint.hpp"
#include "sslkit/errors.hpp"
#include "sslkit/training.hpp"
#include "test_util.hpp"

using namespace sslkit;

namespace {

constexpr std::size_t kSize = 12;

TrainConfig small_config(Regime regime) {
  TrainConfig c;
  c.regime = regime;
  c.epochs = 4;
  c.batch_size = 16;
  c.learning_rate = 0.05;
  c.encoder.height = c.encoder.width = kSize;
  c.encoder.conv1_channels = 6;
  c.encoder.conv2_channels = 12;
  c.encoder.embedding_dim = 16;
  c.projection_dim = 16;
  c.prototypes = 8;
  c.queue_capacity = 32;
  c.probe.epochs = 100;
  return c;
}

LabeledDataset four_classes(std::size_t per_class, std::uint64_t seed) {
  return testutil::tiny_dataset({{"a", per_class}, {"b", per_class}, {"c", per_class}, {"d", per_class}}, seed, kSize);
}

double mean_cosine(const std::vector<std::vector<double>>& z, const LabeledDataset& d, bool same) {
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < z.size(); ++i)
    for (std::size_t j = i + 1; j < z.size(); ++j) {
      if ((d[i].label == d[j].label) != same) continue;
      s += dot(z[i], z[j]) / (l2_norm(z[i]) * l2_norm(z[j]));
      ++n;
    }
  return s / static_cast<double>(n);
}

// Mean of the last `w` losses.
double tail_average(const std::vector<double>& losses, std::size_t w) {
  return std::accumulate(losses.end() - static_cast<std::ptrdiff_t>(w), losses.end(), 0.0) / static_cast<double>(w);
}

}  // namespace

// ---------------------------------------------------------------------------
// Optimizer

TEST(Sgd, ZeroGradientLeavesParameters) {
  std::vector<double> x{1.0, -2.0}, v(2, 0.0);
  sgd_step(x, std::vector<double>{0, 0}, v, {0.1, 0.0, 0.0});
  EXPECT_EQ(x, (std::vector<double>{1.0, -2.0}));
}

TEST(Sgd, QuadraticStepAndConvergence) {
  std::vector<double> x{1.0}, v{0.0};
  sgd_step(x, std::vector<double>{x[0]}, v, {0.1, 0.0, 0.0});
  EXPECT_DOUBLE_EQ(x[0], 0.9);
  for (int i = 1; i < 200; ++i) sgd_step(x, std::vector<double>{x[0]}, v, {0.1, 0.0, 0.0});
  EXPECT_LT(std::abs(x[0]), 1e-9);
  EXPECT_NEAR(x[0], std::pow(0.9, 200), 1e-12 * std::pow(0.9, 200) * 200);
}

TEST(Sgd, MomentumAndDecayFormula) {
  std::vector<double> x{2.0}, v{0.5};
  sgd_step(x, std::vector<double>{1.0}, v, {0.1, 0.9, 0.01});
  const double vel = 0.9 * 0.5 + 1.0 + 0.01 * 2.0;
  EXPECT_DOUBLE_EQ(v[0], vel);
  EXPECT_DOUBLE_EQ(x[0], 2.0 - 0.1 * vel);
  EXPECT_THROW(sgd_step(x, std::vector<double>{1.0, 2.0}, v, {}), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Config

TEST(Config, JsonRoundTrip) {
  TrainConfig c = small_config(Regime::kSwav);
  c.mixup = true;
  c.mixup_lambda = 0.3;
  c.sampling = Sampling::kNatural;
  c.class_weighting = ClassWeighting::kUniform;
  c.augment.hue_delta = 0.1;
  c.probe.learning_rate = 0.7;
  c.seed = 99;
  const auto j = train_config_to_json(c);
  EXPECT_EQ(train_config_to_json(train_config_from_json(j)), j);
}

TEST(Config, UnknownAndInvalidFieldsAreNamed) {
  try {
    train_config_from_json({{"epochz", 3}});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("epochz"), std::string::npos);
  }
  try {
    train_config_from_json({{"regime", "byol"}});
    FAIL();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    for (const char* r : {"supervised", "swav", "supcon"}) EXPECT_NE(msg.find(r), std::string::npos);
  }
  TrainConfig c;
  c.batch_size = 1;
  try {
    c.validate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("batch_size"), std::string::npos);
  }
  c = TrainConfig{};
  c.regime = Regime::kSupcon;
  c.views = 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.mixup_lambda = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Config, Presets) {
  EXPECT_EQ(preset_config("paper-short").epochs, 20u);
  EXPECT_EQ(preset_config("paper-full").epochs, 100u);
  const TrainConfig s = preset_config("paper-swav");
  EXPECT_EQ(s.regime, Regime::kSwav);
  EXPECT_EQ(s.sinkhorn_epsilon, 0.03);
  EXPECT_EQ(s.sinkhorn_iterations, 3u);
  EXPECT_EQ(s.prototypes, 1000u);
  EXPECT_EQ(s.queue_capacity, 1280u);
  EXPECT_EQ(s.queue_start_epoch, 15u);
  EXPECT_EQ(s.prototype_freeze_epochs, 2u);
  EXPECT_EQ(s.batch_size, 256u);
  EXPECT_EQ(s.projection_dim, 128u);
  const TrainConfig c = preset_config("paper-supcon");
  EXPECT_EQ(c.supcon_temperature, 0.2);
  EXPECT_EQ(c.projection_dim, 128u);
  EXPECT_THROW(preset_config("nope"), ConfigError);
  for (const auto& name : preset_names()) EXPECT_NO_THROW(preset_config(name).validate());
}

// ---------------------------------------------------------------------------
// Supervised

TEST(Supervised, SeparableTwoClassReachesPerfectF1) {
  const auto d = testutil::tiny_dataset({{"a", 30}, {"b", 30}}, 1, kSize);
  // Separability oracle: nearest class centroid on raw pixels is perfect.
  std::vector<std::vector<double>> centroid(2, std::vector<double>(kSize * kSize * 3, 0.0));
  for (const auto& s : d.samples())
    for (std::size_t p = 0; p < s.image.pixels.size(); ++p) centroid[s.label][p] += s.image.pixels[p] / 30.0;
  for (const auto& s : d.samples()) {
    double dist[2] = {0, 0};
    for (int k = 0; k < 2; ++k)
      for (std::size_t p = 0; p < s.image.pixels.size(); ++p) dist[k] += std::pow(s.image.pixels[p] - centroid[k][p], 2);
    ASSERT_EQ(dist[0] < dist[1] ? 0 : 1, s.label);
  }
  TrainConfig c = small_config(Regime::kSupervised);
  c.epochs = 20;
  const auto plan = stratified_kfold(d, 5, 0);
  const auto r = train_supervised(c, d, plan, 0);
  ASSERT_EQ(r.history.epochs.size(), 20u);
  EXPECT_EQ(*r.history.epochs.back().metric, 1.0);
}

TEST(Supervised, BitIdenticalAcrossRuns) {
  const auto d = four_classes(10, 2);
  const TrainConfig c = small_config(Regime::kSupervised);
  const auto a = train(c, d, LabeledDataset(d.class_names(), {}));
  const auto b = train(c, d, LabeledDataset(d.class_names(), {}));
  EXPECT_EQ(serialize_checkpoint({a.model, {}, 4, {}}), serialize_checkpoint({b.model, {}, 4, {}}));
  EXPECT_EQ(a.history.to_csv(false), b.history.to_csv(false));
}

TEST(Supervised, MixupLambdaOneEqualsNoMixup) {
  const auto d = four_classes(8, 3);
  TrainConfig plain = small_config(Regime::kSupervised);
  plain.epochs = 3;
  TrainConfig mixed = plain;
  mixed.mixup = true;
  mixed.mixup_lambda = 1.0;
  const LabeledDataset none(d.class_names(), {});
  const auto a = train(plain, d, none);
  const auto b = train(mixed, d, none);
  EXPECT_EQ(a.model.encoder, b.model.encoder);
  EXPECT_EQ(a.model.classifier, b.model.classifier);
  // A mixing lambda does change training.
  mixed.mixup_lambda = 0.6;
  EXPECT_NE(train(mixed, d, none).model.encoder, a.model.encoder);
}

TEST(Supervised, BalancedDrawsPerClass) {
  const auto d = testutil::tiny_dataset({{"a", 20}, {"b", 5}, {"c", 2}}, 4, kSize);
  TrainConfig c = small_config(Regime::kSupervised);
  c.epochs = 2;
  c.samples_per_class = 7;
  const auto r = train(c, d, LabeledDataset(d.class_names(), {}));
  for (const auto& e : r.history.epochs) EXPECT_EQ(e.class_draws, (std::vector<std::size_t>{7, 7, 7}));
}

TEST(Supervised, Errors) {
  const auto d = four_classes(4, 5);
  TrainConfig c = small_config(Regime::kSupervised);
  EXPECT_THROW(train_supervised(c, LabeledDataset(d.class_names(), {}), d), DataError);
  c.encoder.height = 16;
  EXPECT_THROW(train_supervised(c, d, d), ConfigError);
  const auto plan = stratified_kfold(d, 2, 0);
  EXPECT_THROW(train_supervised(small_config(Regime::kSupervised), d, plan, 2), ConfigError);
}

// ---------------------------------------------------------------------------
// SwAV

TEST(Swav, FreezeAndQueueSchedule) {
  const auto d = four_classes(10, 6);
  TrainConfig c = small_config(Regime::kSwav);
  c.epochs = 5;
  c.prototype_freeze_epochs = 2;
  c.queue_start_epoch = 4;
  Rng rng = make_rng(c.seed, Stream::kPrototypes);
  const PrototypeBank initial = PrototypeBank::random(c.prototypes, c.projection_dim, rng);
  std::vector<Matrix> snapshots;
  const auto r = train_swav(c, d, [&](const EpochRecord&, const TrainedModel& m) {
    snapshots.push_back(m.prototypes->vectors());
  });
  ASSERT_EQ(snapshots.size(), 5u);
  EXPECT_EQ(snapshots[0], initial.vectors());
  EXPECT_EQ(snapshots[1], initial.vectors());
  EXPECT_NE(snapshots[2], initial.vectors());
  const auto& h = r.history.epochs;
  const std::size_t batches = (d.size() + c.batch_size - 1) / c.batch_size;
  for (std::size_t e = 0; e < 5; ++e) {
    EXPECT_EQ(h[e].prototype_updates, e < 2 ? 0u : batches);
    if (e < 3) {
      EXPECT_EQ(h[e].queue_rows, 0u);
    }
  }
  EXPECT_GT(h[3].queue_rows, 0u);
  EXPECT_GT(h[4].queue_rows, 0u);
  for (const auto& row : snapshots.back().data()) EXPECT_TRUE(std::isfinite(row));
  for (std::size_t k = 0; k < c.prototypes; ++k) EXPECT_NEAR(l2_norm(snapshots.back().row(k)), 1.0, 1e-12);
}

TEST(Swav, QueueNeverConsultedBeforeStart) {
  const auto d = four_classes(6, 7);
  TrainConfig c = small_config(Regime::kSwav);
  c.epochs = 3;
  c.queue_start_epoch = 15;
  const auto with_queue = train_swav(c, d);
  c.queue_capacity = 0;
  const auto without = train_swav(c, d);
  EXPECT_EQ(with_queue.model, without.model);
  for (const auto& e : with_queue.history.epochs) EXPECT_EQ(e.queue_rows, 0u);
}

TEST(Swav, SkipsSingletonBatch) {
  const auto d = testutil::tiny_dataset({{"a", 9}, {"b", 8}}, 8, kSize);
  TrainConfig c = small_config(Regime::kSwav);
  c.epochs = 1;
  const auto r = train_swav(c, d);
  EXPECT_EQ(r.history.epochs[0].skipped_batches, 1u);
  EXPECT_EQ(r.history.epochs[0].batches, 1u);
}

TEST(Swav, LearnsClassStructureAndLossFalls) {
  const auto d = four_classes(16, 9);
  TrainConfig c = small_config(Regime::kSwav);
  c.epochs = 12;
  c.queue_start_epoch = 6;
  const auto r = train_swav(c, d);
  ASSERT_TRUE(r.model.projection && r.model.prototypes);
  EXPECT_FALSE(r.model.classifier);
  const auto z = extract_features(r.model.encoder, r.model.standardization, d);
  EXPECT_GT(mean_cosine(z, d, true), mean_cosine(z, d, false));
  const auto losses = r.history.losses();
  EXPECT_LT(tail_average(losses, 10), losses.front());
}

// ---------------------------------------------------------------------------
// SupCon

TEST(Supcon, DeterministicHistoryAndHeadDiscarded) {
  const auto d = four_classes(8, 10);
  TrainConfig c = small_config(Regime::kSupcon);
  c.epochs = 3;
  const auto a = train_supcon(c, d);
  const auto b = train_supcon(c, d);
  EXPECT_EQ(a.history.to_csv(false), b.history.to_csv(false));
  EXPECT_EQ(a.model, b.model);
  EXPECT_FALSE(a.model.projection);
  EXPECT_FALSE(a.model.classifier);
}

TEST(Supcon, LearnsClassStructureAndLossFalls) {
  const auto d = four_classes(16, 11);
  TrainConfig c = small_config(Regime::kSupcon);
  c.epochs = 12;
  const auto r = train_supcon(c, d);
  const auto z = extract_features(r.model.encoder, r.model.standardization, d);
  EXPECT_GT(mean_cosine(z, d, true), mean_cosine(z, d, false));
  const auto losses = r.history.losses();
  EXPECT_LT(tail_average(losses, 10), losses.front());
}

TEST(Supervised, LossFalls) {
  const auto d = four_classes(16, 12);
  TrainConfig c = small_config(Regime::kSupervised);
  c.epochs = 12;
  const auto losses = train(c, d, LabeledDataset(d.class_names(), {})).history.losses();
  EXPECT_LT(tail_average(losses, 10), losses.front());
}

// ---------------------------------------------------------------------------
// Linear probe

TEST(Probe, EncoderUntouchedAndSeparable) {
  const auto d = four_classes(20, 13);
  TrainConfig c = small_config(Regime::kSupervised);
  Rng rng(13);
  const ReferenceEncoder enc(c.encoder, rng);
  const std::string before = encoder_fingerprint(enc);
  const std::vector<double> params(enc.parameters().begin(), enc.parameters().end());
  const auto stats = compute_channel_stats(d);
  const auto plan = stratified_kfold(d, 5, 1);
  const auto r = linear_probe(enc, stats, d.subset(plan.train_indices(0)), d.subset(plan.fold_indices(0)), c.probe, 1);
  EXPECT_EQ(encoder_fingerprint(enc), before);
  EXPECT_TRUE(std::equal(params.begin(), params.end(), enc.parameters().begin()));
  // Hue-coded classes are linearly separable even through random features.
  EXPECT_GE(*r.report.macro_f1, 0.9);
  EXPECT_LT(r.losses.back(), r.losses.front());
}

TEST(Probe, ShuffledLabelsGiveChance) {
  const std::size_t classes = 4;
  auto d = four_classes(100, 14);
  std::vector<ImageSample> samples = d.samples();
  std::vector<int> labels;
  for (const auto& s : samples) labels.push_back(s.label);
  std::mt19937_64 shuffler(14);
  std::shuffle(labels.begin(), labels.end(), shuffler);
  for (std::size_t i = 0; i < samples.size(); ++i) samples[i].label = labels[i];
  const LabeledDataset shuffled(d.class_names(), samples);
  TrainConfig c = small_config(Regime::kSupervised);
  Rng rng(14);
  const ReferenceEncoder enc(c.encoder, rng);
  const auto plan = stratified_kfold(shuffled, 2, 0);
  ProbeConfig pc = c.probe;
  pc.epochs = 30;
  const auto r = linear_probe(enc, compute_channel_stats(shuffled), shuffled.subset(plan.train_indices(0)),
                              shuffled.subset(plan.fold_indices(0)), pc, 2);
  EXPECT_NEAR(*r.report.macro_f1, 1.0 / classes, 0.1);
}

TEST(Probe, Errors) {
  const auto d = four_classes(4, 15);
  Rng rng(15);
  TrainConfig c = small_config(Regime::kSupervised);
  const ReferenceEncoder enc(c.encoder, rng);
  const LabeledDataset empty(d.class_names(), {});
  EXPECT_THROW(linear_probe(enc, {}, empty, d, c.probe, 0), DataError);
  EXPECT_THROW(linear_probe(enc, {}, d, empty, c.probe, 0), DataError);
}
