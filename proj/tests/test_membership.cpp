#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "cmi/core/errors.hpp"
#include "cmi/data/synth.hpp"
#include "cmi/membership/features.hpp"

using namespace cmi;
using namespace cmi::membership;
namespace fs = std::filesystem;

namespace {

// Returns a fixed cycle of vectors in call order, ignoring image content.
class SequenceEncoder : public encoder::BlackBoxEncoder {
 public:
  explicit SequenceEncoder(std::vector<std::vector<float>> cycle)
      : cycle_(std::move(cycle)) {}

  int dim() const override { return static_cast<int>(cycle_[0].size()); }
  int input_resolution() const override { return 32; }
  std::string digest() const override { return "sequence-stub"; }

  std::vector<std::vector<float>> embed_batch(
      const std::vector<Image>& images) override {
    std::vector<std::vector<float>> out;
    for (std::size_t i = 0; i < images.size(); ++i) {
      out.push_back(cycle_[counter_ % cycle_.size()]);
      ++counter_;
    }
    return out;
  }

 private:
  std::vector<std::vector<float>> cycle_;
  std::size_t counter_ = 0;
};

// Deterministic function of the image content (channel means, expanded).
class ContentEncoder : public encoder::BlackBoxEncoder {
 public:
  explicit ContentEncoder(int d = 8) : d_(d) {}
  int dim() const override { return d_; }
  int input_resolution() const override { return 32; }
  std::string digest() const override { return "content-stub"; }

  std::vector<std::vector<float>> embed_batch(
      const std::vector<Image>& images) override {
    std::vector<std::vector<float>> out;
    for (const Image& img : images) {
      std::vector<float> f(static_cast<std::size_t>(d_));
      double m0 = 0, m1 = 0, m2 = 0;
      for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
          m0 += img.at(y, x, 0);
          m1 += img.at(y, x, 1);
          m2 += img.at(y, x, 2);
        }
      const double scale = 1.0 / (img.height * img.width);
      for (int k = 0; k < d_; ++k)
        f[static_cast<std::size_t>(k)] = static_cast<float>(
            std::sin(1.0 + k + m0 * scale) + std::cos(2.0 + k + m1 * scale) +
            0.5 * std::sin(3.0 + k + m2 * scale));
      out.push_back(std::move(f));
    }
    return out;
  }

 private:
  int d_;
};

Image test_image(std::uint64_t seed = 3) {
  data::SynthConfig cfg;
  cfg.count = 1;
  cfg.seed = seed;
  return data::make_synthetic_dataset(cfg).images[0];
}

}  // namespace

TEST_CASE("similarity: worked examples") {
  const std::vector<float> e1 = {1.0f, 0.0f};
  CHECK(similarity(SimilarityMetric::Cosine, e1, e1) == doctest::Approx(1.0));

  const std::vector<float> origin = {0.0f, 0.0f};
  const std::vector<float> p34 = {3.0f, 4.0f};
  CHECK(similarity(SimilarityMetric::NegativeEuclidean, origin, p34) ==
        doctest::Approx(-5.0));

  const std::vector<float> a = {1.0f, 2.0f, 3.0f};
  const std::vector<float> b = {2.0f, 4.0f, 6.0f};
  CHECK(similarity(SimilarityMetric::PearsonCorrelation, a, b) ==
        doctest::Approx(1.0));
}

TEST_CASE("similarity: degenerate inputs raise") {
  const std::vector<float> zero = {0.0f, 0.0f};
  const std::vector<float> ok = {1.0f, 2.0f};
  const std::vector<float> constant = {5.0f, 5.0f};
  CHECK_THROWS_AS(similarity(SimilarityMetric::Cosine, zero, ok), Error);
  CHECK_THROWS_AS(similarity(SimilarityMetric::PearsonCorrelation, constant, ok), Error);
  CHECK_NOTHROW(similarity(SimilarityMetric::NegativeEuclidean, zero, constant));
  const std::vector<float> three = {1.0f, 2.0f, 3.0f};
  CHECK_THROWS_AS(similarity(SimilarityMetric::Cosine, ok, three), Error);
  try {
    similarity(SimilarityMetric::Cosine, zero, ok);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DegenerateFeature);
  }
}

TEST_CASE("similarity: symmetry over 10000 random pairs, all metrics") {
  Rng rng(17);
  for (int trial = 0; trial < 10000; ++trial) {
    const int d = 2 + static_cast<int>(trial % 7);
    std::vector<float> a(static_cast<std::size_t>(d)), b(static_cast<std::size_t>(d));
    for (float& v : a) v = static_cast<float>(rng.normal());
    for (float& v : b) v = static_cast<float>(rng.normal());
    for (SimilarityMetric m : {SimilarityMetric::Cosine,
                               SimilarityMetric::PearsonCorrelation,
                               SimilarityMetric::NegativeEuclidean}) {
      const double ab = similarity(m, a, b);
      const double ba = similarity(m, b, a);
      REQUIRE(ab == doctest::Approx(ba).epsilon(1e-12));
    }
  }
}

TEST_CASE("similarity: scale behavior and bounds") {
  Rng rng(18);
  std::vector<float> a(5), b(5);
  for (float& v : a) v = static_cast<float>(rng.normal());
  for (float& v : b) v = static_cast<float>(rng.normal());
  std::vector<float> a3 = a, b7 = b;
  for (float& v : a3) v *= 3.0f;
  for (float& v : b7) v *= 7.0f;

  CHECK(similarity(SimilarityMetric::Cosine, a3, b) ==
        doctest::Approx(similarity(SimilarityMetric::Cosine, a, b)));
  CHECK(similarity(SimilarityMetric::Cosine, a, b7) ==
        doctest::Approx(similarity(SimilarityMetric::Cosine, a, b)));
  CHECK(similarity(SimilarityMetric::NegativeEuclidean, a3, b) !=
        doctest::Approx(similarity(SimilarityMetric::NegativeEuclidean, a, b)));

  for (int trial = 0; trial < 100; ++trial) {
    for (float& v : a) v = static_cast<float>(rng.normal());
    for (float& v : b) v = static_cast<float>(rng.normal());
    CHECK(std::abs(similarity(SimilarityMetric::Cosine, a, b)) <= 1.0 + 1e-12);
    CHECK(std::abs(similarity(SimilarityMetric::PearsonCorrelation, a, b)) <=
          1.0 + 1e-12);
    CHECK(similarity(SimilarityMetric::NegativeEuclidean, a, b) <= 0.0);
  }
  CHECK(similarity(SimilarityMetric::NegativeEuclidean, a, a) == 0.0);
}

TEST_CASE("pair-count law: |scores| = n(n-1)/2 for n in 2..30") {
  const Image img = test_image();
  for (int n = 2; n <= 30; ++n) {
    ContentEncoder enc;
    Rng rng(100 + static_cast<std::uint64_t>(n));
    const FeatureSet set = extract_membership_features(
        img, enc, data::AugmentationPipeline::standard(), n,
        SimilarityMetric::Cosine, rng);
    CHECK(set.scores.size() == static_cast<std::size_t>(n) * (n - 1) / 2);
  }
  // n = 10 is the default: 45 scores.
  ContentEncoder enc;
  Rng rng(55);
  const FeatureSet set = extract_membership_features(
      img, enc, data::AugmentationPipeline::standard(), 10,
      SimilarityMetric::Cosine, rng);
  CHECK(set.scores.size() == 45);

  Rng rng2(56);
  CHECK_THROWS_AS(static_cast<void>(extract_membership_features(
                      img, enc, data::AugmentationPipeline::standard(), 1,
                      SimilarityMetric::Cosine, rng2)),
                  Error);
}

TEST_CASE("constant encoder gives all-ones cosine scores") {
  SequenceEncoder enc({{0.5f, 0.5f, 0.5f}});
  Rng rng(7);
  const FeatureSet set = extract_membership_features(
      test_image(), enc, data::AugmentationPipeline::standard(), 10,
      SimilarityMetric::Cosine, rng);
  for (double s : set.scores) CHECK(s == doctest::Approx(1.0));
}

TEST_CASE("n=3 stub example: scores {0, sqrt2/2, sqrt2/2}") {
  const float r = static_cast<float>(1.0 / std::sqrt(2.0));
  SequenceEncoder enc({{1.0f, 0.0f}, {0.0f, 1.0f}, {r, r}});
  Rng rng(8);
  FeatureSet set = extract_membership_features(
      test_image(), enc, data::AugmentationPipeline::standard(), 3,
      SimilarityMetric::Cosine, rng);
  std::sort(set.scores.begin(), set.scores.end());
  REQUIRE(set.scores.size() == 3);
  CHECK(set.scores[0] == doctest::Approx(0.0));
  CHECK(set.scores[1] == doctest::Approx(std::sqrt(2.0) / 2.0));
  CHECK(set.scores[2] == doctest::Approx(std::sqrt(2.0) / 2.0));
}

TEST_CASE("view-order invariance: shuffled views give the same multiset") {
  std::vector<std::vector<float>> vectors = {
      {1.0f, 0.2f}, {0.3f, 1.0f}, {-0.5f, 0.8f}, {0.9f, -0.1f}, {0.4f, 0.4f}};
  std::vector<std::vector<float>> shuffled = {vectors[3], vectors[0], vectors[4],
                                              vectors[2], vectors[1]};
  SequenceEncoder enc_a(vectors);
  SequenceEncoder enc_b(shuffled);
  Rng rng_a(9), rng_b(9);
  FeatureSet a = extract_membership_features(
      test_image(), enc_a, data::AugmentationPipeline::standard(), 5,
      SimilarityMetric::Cosine, rng_a);
  FeatureSet b = extract_membership_features(
      test_image(), enc_b, data::AugmentationPipeline::standard(), 5,
      SimilarityMetric::Cosine, rng_b);
  std::sort(a.scores.begin(), a.scores.end());
  std::sort(b.scores.begin(), b.scores.end());
  REQUIRE(a.scores.size() == b.scores.size());
  for (std::size_t i = 0; i < a.scores.size(); ++i)
    CHECK(a.scores[i] == doctest::Approx(b.scores[i]).epsilon(1e-12));
}

TEST_CASE("batch extraction equals per-image extraction") {
  data::SynthConfig cfg;
  cfg.count = 6;
  cfg.seed = 31;
  const data::Dataset ds = data::make_synthetic_dataset(cfg);
  ContentEncoder enc;
  const auto pipeline = data::AugmentationPipeline::standard();
  const Rng base(1234);

  const auto batch = extract_features_batch(ds.images, enc, pipeline, 4,
                                            SimilarityMetric::Cosine, base);
  REQUIRE(batch.size() == 6);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    Rng rng = base.derive("views", i);
    ContentEncoder solo;
    const FeatureSet one = extract_membership_features(
        ds.images[i], solo, pipeline, 4, SimilarityMetric::Cosine, rng);
    REQUIRE(one.scores.size() == batch[i].scores.size());
    for (std::size_t s = 0; s < one.scores.size(); ++s)
      CHECK(one.scores[s] == doctest::Approx(batch[i].scores[s]).epsilon(1e-12));
  }
}

TEST_CASE("build_inference_training_set: labels, sizes, overlap error") {
  data::SynthConfig cfg;
  cfg.count = 20;
  cfg.seed = 32;
  const data::Dataset ds = data::make_synthetic_dataset(cfg);
  const auto splits = data::make_splits(
      20, {{data::SplitRole::ShadowMember, 6}, {data::SplitRole::ShadowNonmember, 4}},
      5);
  const auto& member = find_split(splits, data::SplitRole::ShadowMember);
  const auto& nonmember = find_split(splits, data::SplitRole::ShadowNonmember);

  ContentEncoder enc;
  const auto records = build_inference_training_set(
      enc, ds, member, nonmember, data::AugmentationPipeline::standard(), 4,
      SimilarityMetric::Cosine, 99);
  REQUIRE(records.size() == 10);
  std::size_t members = 0;
  for (const auto& r : records) members += static_cast<std::size_t>(r.label);
  CHECK(members == 6);
  std::set<std::size_t> member_ids(member.indices.begin(), member.indices.end());
  for (const auto& r : records)
    CHECK(static_cast<bool>(r.label) ==
          static_cast<bool>(member_ids.count(r.source_id)));

  data::DatasetSplit empty_nm = nonmember;
  empty_nm.indices.clear();
  const auto all_members = build_inference_training_set(
      enc, ds, member, empty_nm, data::AugmentationPipeline::standard(), 4,
      SimilarityMetric::Cosine, 99);
  CHECK(all_members.size() == 6);
  for (const auto& r : all_members) CHECK(r.label == 1);

  data::DatasetSplit overlapping = nonmember;
  overlapping.indices.push_back(member.indices[0]);
  CHECK_THROWS_AS(static_cast<void>(build_inference_training_set(
                      enc, ds, member, overlapping,
                      data::AugmentationPipeline::standard(), 4,
                      SimilarityMetric::Cosine, 99)),
                  Error);
}

TEST_CASE("feature cache: roundtrip and insert-if-absent") {
  const fs::path dir = fs::temp_directory_path() / "cmi_feature_cache";
  fs::remove_all(dir);
  FeatureCache cache(dir);

  CacheKey key;
  key.tag = "eval-member";
  key.encoder_digest = "abc";
  key.pipeline_digest = "def";
  key.n = 4;
  key.metric = SimilarityMetric::Cosine;
  key.seed = 7;
  CHECK_FALSE(cache.load(key).has_value());

  std::vector<FeatureSet> sets(3);
  for (int i = 0; i < 3; ++i) {
    sets[static_cast<std::size_t>(i)].n_views = 4;
    sets[static_cast<std::size_t>(i)].metric = SimilarityMetric::Cosine;
    for (int s = 0; s < 6; ++s)
      sets[static_cast<std::size_t>(i)].scores.push_back(0.1 * i + 0.01 * s);
  }
  cache.store(key, sets);
  const auto loaded = cache.load(key);
  REQUIRE(loaded.has_value());
  REQUIRE(loaded->size() == 3);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(loaded->at(i).scores == sets[i].scores);

  CacheKey other = key;
  other.seed = 8;
  CHECK_FALSE(cache.load(other).has_value());

  CHECK_NOTHROW(cache.store(key, sets));
}

TEST_CASE("feature set helpers") {
  FeatureSet set;
  set.n_views = 3;
  set.scores = {0.5, 0.9, 0.1};
  CHECK(set.average() == doctest::Approx(0.5));
  CHECK(set.sorted_descending() == std::vector<double>({0.9, 0.5, 0.1}));
}
