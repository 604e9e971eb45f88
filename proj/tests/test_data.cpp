#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "sslkit/data.hpp"
#include "sslkit/errors.hpp"
#include "test_util.hpp"

using namespace sslkit;
namespace fs = std::filesystem;

namespace {

RgbImage solid(std::size_t h, std::size_t w, std::uint8_t v) {
  RgbImage img(h, w);
  std::fill(img.pixels.begin(), img.pixels.end(), v);
  return img;
}

LabeledDataset counted(const std::vector<std::size_t>& counts) {
  std::vector<std::string> names;
  std::vector<ImageSample> samples;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    names.push_back("c" + std::to_string(k));
    for (std::size_t i = 0; i < counts[k]; ++i) samples.push_back({solid(2, 2, static_cast<std::uint8_t>(i)), static_cast<int>(k)});
  }
  return LabeledDataset(names, samples);
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

}  // namespace

TEST(Dataset, RecountsSupportsAndRejectsBadLabels) {
  const LabeledDataset d = counted({3, 1, 0});
  EXPECT_EQ(d.class_counts(), (std::vector<std::size_t>{3, 1, 0}));
  EXPECT_EQ(d.size(), 4u);
  EXPECT_THROW(LabeledDataset({"a"}, {{solid(1, 1, 0), 1}}), std::invalid_argument);
  EXPECT_THROW(LabeledDataset({"a"}, {{solid(1, 1, 0), -2}}), std::invalid_argument);
  EXPECT_EQ(LabeledDataset({"a"}, {{solid(1, 1, 0), kUnlabeled}}).class_counts(), (std::vector<std::size_t>{0}));
  const auto by = d.indices_by_class();
  EXPECT_EQ(by[0], (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(by[1], (std::vector<std::size_t>{3}));
  const std::vector<std::size_t> pick{3, 0};
  const LabeledDataset s = d.subset(pick);
  EXPECT_EQ(s.class_counts(), (std::vector<std::size_t>{1, 1, 0}));
  EXPECT_EQ(s[0].label, 1);
}

TEST(Dataset, FingerprintTracksContent) {
  const LabeledDataset a = counted({2, 2});
  EXPECT_EQ(a.fingerprint(), counted({2, 2}).fingerprint());
  EXPECT_NE(a.fingerprint(), counted({2, 3}).fingerprint());
}

TEST(Png, RoundTrip) {
  const auto dir = testutil::temp_dir("png");
  RgbImage img(3, 5);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = static_cast<std::uint8_t>(i * 7);
  write_png(dir / "a.png", img);
  EXPECT_EQ(read_png(dir / "a.png"), img);
}

TEST(Ingest, EmptyManifestKeepsClassList) {
  const auto dir = testutil::temp_dir("ingest_empty");
  write_file(dir / "manifest.csv", "path,label\n");
  write_file(dir / "classes.txt", "x\ny\nz\n");
  const LabeledDataset d = ingest(dir);
  EXPECT_TRUE(d.empty());
  EXPECT_EQ(d.num_classes(), 3u);
}

TEST(Ingest, CountsObservedLabels) {
  const auto dir = testutil::temp_dir("ingest_three");
  fs::create_directories(dir / "img");
  for (int i = 0; i < 3; ++i) write_png(dir / "img" / (std::to_string(i) + ".png"), solid(4, 4, 10));
  write_file(dir / "manifest.csv", "path,label\nimg/0.png,a\nimg/1.png,b\nimg/2.png,a\n");
  const LabeledDataset d = ingest(dir);
  EXPECT_EQ(d.class_names(), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(d.class_counts(), (std::vector<std::size_t>{2, 1}));
}

TEST(Ingest, Errors) {
  const auto dir = testutil::temp_dir("ingest_err");
  write_png(dir / "ok.png", solid(2, 2, 0));
  write_file(dir / "classes.txt", "a\n");
  write_file(dir / "manifest.csv", "path,label\nok.png,b\n");
  try {
    ingest(dir);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("'b'"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("ok.png"), std::string::npos);
  }
  write_file(dir / "manifest.csv", "path,label\nmissing.png,a\n");
  try {
    ingest(dir);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("missing.png"), std::string::npos);
  }
  write_file(dir / "junk.png", "not a png");
  write_file(dir / "manifest.csv", "path,label\njunk.png,a\n");
  try {
    ingest(dir);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("junk.png"), std::string::npos);
  }
  write_file(dir / "manifest.csv", "file,class\n");
  EXPECT_THROW(ingest(dir), DataError);
}

TEST(Ingest, PathsWithCommasSplitOnLastComma) {
  const auto dir = testutil::temp_dir("ingest_comma");
  write_png(dir / "a,b.png", solid(2, 2, 1));
  write_file(dir / "manifest.csv", "path,label\na,b.png,cls\n");
  const LabeledDataset d = ingest(dir);
  EXPECT_EQ(d.class_names(), (std::vector<std::string>{"cls"}));
}

TEST(DatasetFiles, DirectoryAndPackedRoundTrip) {
  const LabeledDataset d = testutil::tiny_dataset({{"a", 3}, {"b", 2}}, 5, 8);
  const auto dir = testutil::temp_dir("roundtrip");
  write_dataset_dir(dir / "tree", d);
  EXPECT_EQ(load_dataset(dir / "tree"), d);
  write_packed(dir / "d.imset", d);
  EXPECT_EQ(load_dataset(dir / "d.imset"), d);
  std::ifstream in(dir / "d.imset", std::ios::binary);
  char magic[6];
  in.read(magic, 6);
  EXPECT_EQ(std::string(magic, 6), "IMSET1");
  write_file(dir / "bad.imset", "IMSET2");
  EXPECT_THROW(read_packed(dir / "bad.imset"), DataError);
  EXPECT_THROW(load_dataset(dir / "nothing"), DataError);
}

TEST(Synthetic, CountsAndDeterminism) {
  const auto spec = make_synthetic_spec({{"A", 5}, {"B", 5}});
  const LabeledDataset a = generate_synthetic(spec, 0);
  EXPECT_EQ(a.size(), 10u);
  EXPECT_EQ(a.class_counts(), (std::vector<std::size_t>{5, 5}));
  EXPECT_EQ(a, generate_synthetic(spec, 0));
  EXPECT_NE(a, generate_synthetic(spec, 1));
  EXPECT_THROW(generate_synthetic(make_synthetic_spec({{"A", 5}}), 0), std::invalid_argument);
}

TEST(Synthetic, MarrowPresetScalesTableSupports) {
  const auto& raw = marrow_class_supports();
  ASSERT_EQ(raw.size(), 21u);
  std::size_t mx = 0, mn = SIZE_MAX;
  for (const auto& [name, n] : raw) {
    mx = std::max(mx, n);
    mn = std::min(mn, n);
  }
  EXPECT_EQ(mx, 29424u);
  EXPECT_EQ(mn, 8u);
  const SyntheticSpec spec = marrow_longtail_spec();
  ASSERT_EQ(spec.classes.size(), 21u);
  for (std::size_t k = 0; k < 21; ++k) {
    const std::size_t want = std::max<std::size_t>(static_cast<std::size_t>(std::llround(raw[k].second / 10.0)), 8);
    EXPECT_EQ(spec.classes[k].count, want) << raw[k].first;
  }
  std::size_t head = 0, tail = SIZE_MAX;
  for (const auto& c : spec.classes) {
    head = std::max(head, c.count);
    tail = std::min(tail, c.count);
  }
  EXPECT_EQ(head, 2942u);
  EXPECT_EQ(tail, 8u);
}

TEST(Synthetic, LongtailSpec) {
  const SyntheticSpec s = longtail_spec(8, 2000, 100.0);
  std::size_t total = 0;
  for (const auto& c : s.classes) total += c.count;
  EXPECT_EQ(total, 2000u);
  const double ratio = static_cast<double>(s.classes.front().count) / static_cast<double>(s.classes.back().count);
  EXPECT_NEAR(ratio, 100.0, 10.0);
  for (std::size_t k = 1; k < s.classes.size(); ++k) EXPECT_LT(s.classes[k].count, s.classes[k - 1].count);
  const SyntheticSpec j = synthetic_spec_from_json({{"longtail", {{"classes", 8}, {"total", 2000}, {"imbalance", 100}}}});
  EXPECT_EQ(j.classes.size(), 8u);
  EXPECT_EQ(j.classes.back().count, s.classes.back().count);
}

TEST(Synthetic, SpecJsonRoundTrip) {
  SyntheticSpec s = make_synthetic_spec({{"p", 2}, {"q", 3}});
  s.noise = 0.2;
  const SyntheticSpec t = synthetic_spec_from_json(synthetic_spec_to_json(s));
  EXPECT_EQ(generate_synthetic(s, 4), generate_synthetic(t, 4));
  EXPECT_THROW(synthetic_spec_from_json({{"nope", 1}}), ConfigError);
}

// ---------------------------------------------------------------------------

TEST(KFold, SingleClassTenSamples) {
  const FoldPlan plan = stratified_kfold(counted({10}), 5, 1);
  for (std::size_t f = 0; f < 5; ++f) EXPECT_EQ(plan.fold_indices(f).size(), 2u);
}

TEST(KFold, EightSamplesPigeonhole) {
  const FoldPlan plan = stratified_kfold(counted({8}), 5, 1);
  std::vector<std::size_t> sizes;
  for (std::size_t f = 0; f < 5; ++f) sizes.push_back(plan.fold_indices(f).size());
  std::sort(sizes.rbegin(), sizes.rend());
  EXPECT_EQ(sizes, (std::vector<std::size_t>{2, 2, 2, 1, 1}));
}

TEST(KFold, InvariantsOnTableShapedData) {
  const SyntheticSpec spec = marrow_longtail_spec(4, 4);
  std::vector<std::size_t> counts;
  for (const auto& c : spec.classes) counts.push_back(c.count);
  const LabeledDataset d = counted(counts);
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    const FoldPlan plan = stratified_kfold(d, 5, seed);
    ASSERT_EQ(plan.assignments.size(), d.size());
    // Recount oracle per class and fold.
    std::vector<std::vector<std::size_t>> per(d.num_classes(), std::vector<std::size_t>(5, 0));
    for (std::size_t i = 0; i < d.size(); ++i) ++per[static_cast<std::size_t>(d[i].label)][plan.assignments[i]];
    for (const auto& row : per) {
      EXPECT_LE(*std::max_element(row.begin(), row.end()) - *std::min_element(row.begin(), row.end()), 1u);
    }
    std::set<std::size_t> all;
    for (std::size_t f = 0; f < 5; ++f) {
      const auto idx = plan.fold_indices(f);
      const auto train = plan.train_indices(f);
      EXPECT_EQ(idx.size() + train.size(), d.size());
      for (std::size_t i : idx) EXPECT_TRUE(all.insert(i).second);
    }
    EXPECT_EQ(all.size(), d.size());
  }
  EXPECT_THROW(stratified_kfold(d, 1, 0), std::invalid_argument);
}

TEST(KFold, DeterministicAndJsonRoundTrip) {
  const LabeledDataset d = counted({7, 4, 2});
  const FoldPlan a = stratified_kfold(d, 2, 9);
  EXPECT_EQ(a, stratified_kfold(d, 2, 9));
  EXPECT_EQ(fold_plan_from_json(fold_plan_to_json(a)), a);
  const auto j = fold_plan_to_json(a);
  EXPECT_TRUE(j.contains("k") && j.contains("seed") && j.contains("assignments"));
  EXPECT_THROW(fold_plan_from_json({{"k", 2}, {"seed", 0}, {"assignments", {0, 5}}}), DataError);
}

TEST(BalancedEpoch, Examples) {
  const LabeledDataset d = counted({3, 3});
  auto e = balanced_epoch(d, 3, 1);
  ASSERT_EQ(e.size(), 6u);
  std::sort(e.begin(), e.end());
  EXPECT_EQ(e, (std::vector<std::size_t>{0, 1, 2, 3, 4, 5}));

  const LabeledDataset one = counted({5, 1});
  const auto f = balanced_epoch(one, 4, 2);
  EXPECT_EQ(std::count(f.begin(), f.end(), 5u), 4);

  EXPECT_THROW(balanced_epoch(counted({2, 0}), 1, 0), DataError);
}

TEST(BalancedEpoch, HistogramExactlyUniform) {
  const SyntheticSpec spec = marrow_longtail_spec(4, 4);
  std::vector<std::size_t> counts;
  for (const auto& c : spec.classes) counts.push_back(c.count);
  const LabeledDataset d = counted(counts);
  for (std::size_t nc : {1u, 7u, 100u}) {
    for (std::uint64_t seed : {0u, 11u}) {
      const auto e = balanced_epoch(d, nc, seed);
      ASSERT_EQ(e.size(), d.num_classes() * nc);
      std::vector<std::size_t> hist(d.num_classes(), 0);
      std::map<std::size_t, int> uses;
      for (std::size_t i : e) {
        ++hist[static_cast<std::size_t>(d[i].label)];
        ++uses[i];
      }
      const auto by_class = d.indices_by_class();
      for (std::size_t k = 0; k < hist.size(); ++k) {
        EXPECT_EQ(hist[k], nc);
        // Classes with enough support are drawn without replacement.
        if (d.class_counts()[k] >= nc) {
          for (std::size_t i : by_class[k])
            if (uses.count(i)) {
              EXPECT_EQ(uses[i], 1);
            }
        }
      }
    }
  }
}

TEST(Sampling, NaturalEpochIsPermutationAndMedianDefault) {
  const LabeledDataset d = counted({9, 4, 1});
  auto e = natural_epoch(d, 3);
  EXPECT_EQ(e, natural_epoch(d, 3));
  std::sort(e.begin(), e.end());
  for (std::size_t i = 0; i < e.size(); ++i) EXPECT_EQ(e[i], i);
  EXPECT_EQ(default_samples_per_class(d), 4u);
}
