#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "sslkit/eval.hpp"
#include "test_util.hpp"

using namespace sslkit;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST(Confusion, DiagonalWhenPerfect) {
  const std::vector<int> y{0, 1, 1, 2, 2, 2};
  const auto m = confusion_matrix(y, y, 3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(m[i][j], i == j ? i + 1 : 0u);
  const auto r = per_class_metrics(m);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(*r.precision[k], 1.0);
    EXPECT_EQ(*r.recall[k], 1.0);
    EXPECT_EQ(*r.f1[k], 1.0);
  }
  EXPECT_EQ(*r.macro_f1, 1.0);
  EXPECT_EQ(r.accuracy, 1.0);
}

TEST(Confusion, SinglePredictedColumn) {
  const std::vector<int> y{0, 1, 2, 2};
  const std::vector<int> p(4, 1);
  const auto m = confusion_matrix(p, y, 3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      if (j != 1) {
        EXPECT_EQ(m[i][j], 0u);
      }
  EXPECT_EQ(m[2][1], 2u);
}

TEST(Confusion, RowSumsEqualLabelHistogram) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> cls(0, 4);
  std::vector<int> y(100), p(100);
  for (int i = 0; i < 100; ++i) {
    y[i] = cls(rng);
    p[i] = cls(rng);
  }
  const auto m = confusion_matrix(p, y, 5);
  std::vector<std::size_t> hist(5, 0), phist(5, 0);
  for (int i = 0; i < 100; ++i) {
    ++hist[y[i]];
    ++phist[p[i]];
  }
  std::size_t total = 0;
  for (std::size_t i = 0; i < 5; ++i) {
    std::size_t row = 0, col = 0;
    for (std::size_t j = 0; j < 5; ++j) {
      row += m[i][j];
      col += m[j][i];
    }
    EXPECT_EQ(row, hist[i]);
    EXPECT_EQ(col, phist[i]);
    total += row;
  }
  EXPECT_EQ(total, 100u);
}

TEST(Confusion, Errors) {
  EXPECT_THROW(confusion_matrix(std::vector<int>{0}, std::vector<int>{0, 1}, 2), std::invalid_argument);
  EXPECT_THROW(confusion_matrix(std::vector<int>{2}, std::vector<int>{0}, 2), std::invalid_argument);
  EXPECT_THROW(confusion_matrix(std::vector<int>{0}, std::vector<int>{-1}, 2), std::invalid_argument);
}

TEST(Metrics, HarmonicMeanFromPrecisionRecallPair) {
  EXPECT_NEAR(*harmonic_f1(0.9158, 0.8871), 0.9012, 5e-4);
  EXPECT_NEAR(*harmonic_f1(0.51, 0.69), 0.5865, 5e-5);
  EXPECT_FALSE(harmonic_f1(0.0, 0.0).has_value());
  // Counts chosen so that P = 0.9158 and R = 0.8871 exactly.
  const std::size_t tp = 81240618, fp = 7469382, fn = 10339382;
  const ConfusionMatrix m{{tp, fn}, {fp, 1000}};
  const auto r = per_class_metrics(m);
  EXPECT_NEAR(*r.precision[0], 0.9158, 1e-12);
  EXPECT_NEAR(*r.recall[0], 0.8871, 1e-12);
  EXPECT_NEAR(*r.f1[0], 0.9012, 5e-4);
  EXPECT_NEAR(*r.f1[0], *harmonic_f1(0.9158, 0.8871), 1e-12);
}

TEST(Metrics, MatchesPerSampleCounting) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> cls(0, 5);
  for (int t = 0; t < 20; ++t) {
    std::vector<int> y(200), p(200);
    for (int i = 0; i < 200; ++i) {
      y[i] = cls(rng);
      p[i] = rng() % 3 ? y[i] : cls(rng);
    }
    const auto r = per_class_metrics(confusion_matrix(p, y, 6));
    double f1_sum = 0.0;
    int defined = 0;
    for (int k = 0; k < 6; ++k) {
      int tp = 0, fp = 0, fn = 0;
      for (int i = 0; i < 200; ++i) {
        tp += p[i] == k && y[i] == k;
        fp += p[i] == k && y[i] != k;
        fn += p[i] != k && y[i] == k;
      }
      if (tp + fp > 0) {
        EXPECT_NEAR(*r.precision[k], double(tp) / (tp + fp), 1e-12);
      }
      if (tp + fn > 0) {
        EXPECT_NEAR(*r.recall[k], double(tp) / (tp + fn), 1e-12);
      }
      if (tp + fp > 0 && tp + fn > 0 && tp > 0) {
        const double pr = double(tp) / (tp + fp), rc = double(tp) / (tp + fn);
        EXPECT_NEAR(*r.f1[k], 2 * pr * rc / (pr + rc), 1e-12);
      }
      if (2 * tp + fp + fn > 0) {
        f1_sum += 2.0 * tp / (2 * tp + fp + fn);
        ++defined;
      }
    }
    EXPECT_NEAR(*r.macro_f1, f1_sum / defined, 1e-12);
  }
}

TEST(Metrics, AbsentClassIsUndefinedAndExcluded) {
  // Class 2 never appears in labels or predictions.
  const std::vector<int> y{0, 0, 1, 1};
  const std::vector<int> p{0, 1, 1, 1};
  const auto r = per_class_metrics(confusion_matrix(p, y, 3));
  EXPECT_FALSE(r.precision[2].has_value());
  EXPECT_FALSE(r.recall[2].has_value());
  EXPECT_FALSE(r.f1[2].has_value());
  const auto two = per_class_metrics(confusion_matrix(p, y, 2));
  EXPECT_EQ(*r.macro_f1, *two.macro_f1);
  EXPECT_EQ(*r.macro_precision, *two.macro_precision);
  // Predicted but never present: precision 0, recall undefined.
  const auto q = per_class_metrics(confusion_matrix(std::vector<int>{2, 0}, std::vector<int>{0, 0}, 3));
  EXPECT_EQ(*q.precision[2], 0.0);
  EXPECT_FALSE(q.recall[2].has_value());
  EXPECT_EQ(*q.f1[2], 0.0);
}

TEST(Metrics, JsonSchema) {
  const std::vector<int> y{0, 1, 1, 2};
  const std::vector<int> p{0, 1, 0, 0};
  const auto r = per_class_metrics(confusion_matrix(p, y, 3), {"a", "b", "c"});
  const auto j = metrics_to_json(r);
  EXPECT_EQ(j["classes"], (nlohmann::json{"a", "b", "c"}));
  EXPECT_EQ(j["confusion"][0][0], 1);
  EXPECT_EQ(j["per_class"]["support"], (nlohmann::json{1, 2, 1}));
  EXPECT_TRUE(j["per_class"]["precision"][2].is_null());
  EXPECT_EQ(j["per_class"]["recall"][2], 0.0);
  EXPECT_DOUBLE_EQ(j["macro"]["f1"].get<double>(), *r.macro_f1);
  EXPECT_DOUBLE_EQ(j["accuracy"].get<double>(), 0.5);
  EXPECT_TRUE(j.contains("undefined_convention"));
  const std::string text = metrics_to_text(r);
  EXPECT_NE(text.find("macro"), std::string::npos);
  EXPECT_NE(text.find("     -"), std::string::npos);
}

TEST(Evaluate, DeterministicAndShapes) {
  const auto d = testutil::tiny_dataset({{"a", 6}, {"b", 4}}, 3, 12);
  ReferenceEncoderConfig cfg;
  cfg.height = cfg.width = 12;
  cfg.conv1_channels = 4;
  cfg.conv2_channels = 4;
  cfg.embedding_dim = 8;
  Rng rng(3);
  const ReferenceEncoder enc(cfg, rng);
  const ClassifierHead head = make_classifier_head(8, 2, rng);
  const ChannelStats stats = compute_channel_stats(d);
  const auto a = evaluate_model(enc, head, stats, d);
  const auto b = evaluate_model(enc, head, stats, d);
  EXPECT_EQ(metrics_to_json(a), metrics_to_json(b));
  EXPECT_EQ(a.total, 10u);
  const std::vector<std::size_t> pick{0, 7};
  EXPECT_EQ(evaluate_model(enc, head, stats, d, pick).total, 2u);
  EXPECT_EQ(predict(enc, head, stats, d).size(), 10u);
  const ClassifierHead wrong = make_classifier_head(5, 2, rng);
  EXPECT_THROW(predict(enc, wrong, stats, d), std::invalid_argument);
}

TEST(Export, ShapeAndByteIdenticalRerun) {
  const auto dir = testutil::temp_dir("export");
  const auto d = testutil::tiny_dataset({{"a", 6}, {"b", 4}}, 4, 12);
  ReferenceEncoderConfig cfg;
  cfg.height = cfg.width = 12;
  Rng rng(4);
  const ReferenceEncoder enc(cfg, rng);
  const ChannelStats stats = compute_channel_stats(d);
  export_embeddings(enc, stats, d, dir / "a.csv");
  export_embeddings(enc, stats, d, dir / "b.csv");
  const std::string text = slurp(dir / "a.csv");
  EXPECT_EQ(text, slurp(dir / "b.csv"));
  const auto lines = lines_of(text);
  ASSERT_EQ(lines.size(), 11u);
  for (const auto& line : lines) EXPECT_EQ(std::count(line.begin(), line.end(), ','), 65);
  EXPECT_EQ(lines[0].substr(0, 20), "sample_id,label,z_1,");
  // Values round-trip through the shortest decimal form.
  const auto feats = extract_features(enc, stats, d);
  std::istringstream row(lines[3]);
  std::string cell;
  std::getline(row, cell, ',');
  EXPECT_EQ(cell, "2");
  std::getline(row, cell, ',');
  std::getline(row, cell, ',');
  EXPECT_EQ(std::stod(cell), feats[2][0]);

  const LabeledDataset empty({"a", "b"}, {});
  export_embeddings(enc, stats, empty, dir / "empty.csv");
  EXPECT_EQ(lines_of(slurp(dir / "empty.csv")).size(), 1u);
}

TEST(Export, FormatDoubleRoundTrips) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> d(-1e3, 1e3);
  for (int i = 0; i < 1000; ++i) {
    const double v = d(rng);
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
}
