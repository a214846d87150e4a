#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <set>

#include "cmi/core/errors.hpp"
#include "cmi/data/augment.hpp"
#include "cmi/data/dataset.hpp"
#include "cmi/data/splits.hpp"
#include "cmi/data/synth.hpp"

using namespace cmi;
using namespace cmi::data;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* tag) {
  const fs::path dir = fs::temp_directory_path() / (std::string("cmi_test_") + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Dataset small_synth(std::size_t count, const char* family = "geometric") {
  SynthConfig cfg;
  cfg.count = count;
  cfg.seed = 99;
  cfg.family = family;
  return make_synthetic_dataset(cfg);
}

}  // namespace

TEST_CASE("make_splits: disjointness, sizes, determinism") {
  std::map<SplitRole, std::size_t> sizes = {
      {SplitRole::PretrainMember, 40}, {SplitRole::ShadowMember, 25},
      {SplitRole::ShadowNonmember, 25}, {SplitRole::EvalMember, 10},
      {SplitRole::EvalNonmember, 15},  {SplitRole::DownstreamTrain, 20},
      {SplitRole::DownstreamTest, 10},
  };
  const auto splits = make_splits(200, sizes, 7);
  for (const auto& s : splits) CHECK(s.size() == sizes.at(s.role));

  // Pairwise disjoint except the deliberate eval-member ⊆ pretrain-member.
  for (std::size_t i = 0; i < splits.size(); ++i)
    for (std::size_t j = i + 1; j < splits.size(); ++j) {
      const auto& a = splits[i];
      const auto& b = splits[j];
      const bool containment_pair =
          (a.role == SplitRole::PretrainMember && b.role == SplitRole::EvalMember) ||
          (b.role == SplitRole::PretrainMember && a.role == SplitRole::EvalMember);
      if (containment_pair) continue;
      std::set<std::size_t> seen(a.indices.begin(), a.indices.end());
      for (auto id : b.indices) CHECK(seen.count(id) == 0);
    }

  // eval-member ⊆ pretrain-member, eval-nonmember ∩ pretrain-member = ∅.
  const auto& pretrain = find_split(splits, SplitRole::PretrainMember);
  const std::set<std::size_t> members(pretrain.indices.begin(), pretrain.indices.end());
  for (auto id : find_split(splits, SplitRole::EvalMember).indices)
    CHECK(members.count(id) == 1);
  for (auto id : find_split(splits, SplitRole::EvalNonmember).indices)
    CHECK(members.count(id) == 0);

  const auto again = make_splits(200, sizes, 7);
  for (std::size_t i = 0; i < splits.size(); ++i)
    CHECK(splits[i].indices == again[i].indices);
  const auto other_seed = make_splits(200, sizes, 8);
  CHECK(other_seed[0].indices != splits[0].indices);
}

TEST_CASE("make_splits: empty request and failure modes") {
  const auto empty = make_splits(10, {{SplitRole::PretrainMember, 0}}, 1);
  CHECK(empty.size() == 1);
  CHECK(empty[0].size() == 0);

  CHECK_THROWS_WITH_AS(
      static_cast<void>(make_splits(10, {{SplitRole::PretrainMember, 11}}, 1)),
      doctest::Contains("requested"), Error);
  try {
    static_cast<void>(make_splits(10, {{SplitRole::PretrainMember, 11}}, 1));
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InsufficientData);
  }
  CHECK_THROWS_AS(static_cast<void>(parse_role("no-such-role")), Error);
}

TEST_CASE("split manifests roundtrip through json") {
  const auto dir = temp_dir("splits");
  const auto splits =
      make_splits(50, {{SplitRole::PretrainMember, 20}, {SplitRole::EvalNonmember, 10}}, 3);
  save_splits(splits, 3, dir / "splits.json");
  const auto [loaded, seed] = load_splits(dir / "splits.json");
  CHECK(seed == 3);
  REQUIRE(loaded.size() == splits.size());
  for (const auto& s : loaded)
    CHECK(find_split(splits, s.role).indices == s.indices);
}

TEST_CASE("augment: empty pipeline is the identity") {
  Dataset ds = small_synth(1);
  Rng rng(1);
  const Image out = augment(ds.images[0], AugmentationPipeline{}, rng);
  CHECK(out.pixels == ds.images[0].pixels);
}

TEST_CASE("augment: flip with p=1 twice recovers the original") {
  Dataset ds = small_synth(1);
  AugmentationPipeline flip({AugmentationOp::random_horizontal_flip(1.0)});
  Rng rng(2);
  const Image once = augment(ds.images[0], flip, rng);
  const Image twice = augment(once, flip, rng);
  CHECK(twice.pixels == ds.images[0].pixels);
  CHECK(once.pixels != ds.images[0].pixels);
}

TEST_CASE("augment: crop keeps dimensions and bounds over many draws") {
  Dataset ds = small_synth(4);
  AugmentationPipeline crop({AugmentationOp::random_resized_crop(0.2, 1.0)});
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const Image& src = ds.images[static_cast<std::size_t>(i) % ds.size()];
    const Image out = augment(src, crop, rng);
    REQUIRE(out.height == src.height);
    REQUIRE(out.width == src.width);
    for (float v : out.pixels) {
      REQUIRE(v >= 0.0f);
      REQUIRE(v <= 1.0f);
    }
  }
}

TEST_CASE("augment: purity — same rng state, same output") {
  Dataset ds = small_synth(2);
  const auto pipeline = AugmentationPipeline::standard();
  Rng rng = Rng(77).derive("aug");
  Rng saved = rng;  // value copy freezes the state
  const Image a = augment(ds.images[0], pipeline, rng);
  const Image b = augment(ds.images[0], pipeline, saved);
  CHECK(a.pixels == b.pixels);
}

TEST_CASE("augment: shape preservation on full pipeline") {
  Dataset geo = small_synth(8);
  Dataset blotch = small_synth(8, "blotch");
  const auto pipeline = AugmentationPipeline::standard();
  Rng rng(4);
  for (int i = 0; i < 10000; ++i) {
    const Dataset& ds = (i % 2 == 0) ? geo : blotch;
    const Image& src = ds.images[static_cast<std::size_t>(i / 2) % ds.size()];
    const Image out = augment(src, pipeline, rng);
    REQUIRE(out.height == src.height);
    REQUIRE(out.width == src.width);
    REQUIRE(out.channels == src.channels);
  }
}

TEST_CASE("augmentation pipeline json roundtrip and validation") {
  const auto p = AugmentationPipeline::standard();
  const auto q = AugmentationPipeline::from_json(p.to_json());
  CHECK(p.digest() == q.digest());
  CHECK(p.digest() != AugmentationPipeline::crop_only().digest());

  AugmentationOp bad = AugmentationOp::random_grayscale(1.5);
  CHECK_THROWS_AS(AugmentationPipeline({bad}), Error);
  AugmentationOp bad_crop = AugmentationOp::random_resized_crop(0.9, 0.3);
  CHECK_THROWS_AS(AugmentationPipeline({bad_crop}), Error);
}

TEST_CASE("concat non-members: pairing, determinism, odd pool") {
  Dataset ds = small_synth(8);
  const auto out = make_concat_nonmembers(ds.images, 5);
  CHECK(out.size() == 4);
  for (const auto& img : out) {
    CHECK(img.width == 2 * ds.images[0].width);
    CHECK_NOTHROW(validate_image(img));
  }
  const auto again = make_concat_nonmembers(ds.images, 5);
  for (std::size_t i = 0; i < out.size(); ++i)
    CHECK(out[i].pixels == again[i].pixels);

  std::vector<Image> two = {ds.images[0], ds.images[0]};
  const auto sym = make_concat_nonmembers(two, 1);
  REQUIRE(sym.size() == 1);
  const Image& joined = sym[0];
  for (int y = 0; y < joined.height; ++y)
    for (int x = 0; x < joined.width / 2; ++x)
      for (int c = 0; c < 3; ++c)
        CHECK(joined.at(y, x, c) ==
              doctest::Approx(joined.at(y, x + joined.width / 2, c)));

  std::vector<Image> odd = {ds.images[0], ds.images[1], ds.images[2]};
  CHECK_THROWS_AS(static_cast<void>(make_concat_nonmembers(odd, 1)), Error);
}

TEST_CASE("cifar layout roundtrips through writer and loader") {
  const auto dir = temp_dir("cifar");
  Dataset ds = small_synth(60);
  write_cifar10_layout(ds, dir);
  const Dataset back = load_cifar10(dir);
  REQUIRE(back.size() == 60);
  CHECK(back.labeled());
  CHECK(back.labels == ds.labels);
  // 8-bit quantization is the only loss.
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (std::size_t p = 0; p < ds.images[i].pixels.size(); ++p)
      CHECK(std::abs(back.images[i].pixels[p] - ds.images[i].pixels[p]) < 0.5f / 255.0f + 1e-6f);
}

TEST_CASE("stl10 layout roundtrips and resizes") {
  const auto dir = temp_dir("stl10");
  SynthConfig cfg;
  cfg.count = 6;
  cfg.seed = 5;
  cfg.height = cfg.width = 96;
  cfg.family = "blotch";
  Dataset ds = make_synthetic_dataset(cfg);
  write_stl10_unlabeled(ds, dir);
  const Dataset back = load_stl10(dir);
  REQUIRE(back.size() == 6);
  CHECK_FALSE(back.labeled());
  CHECK(back.images[0].height == 96);
  for (std::size_t p = 0; p < ds.images[0].pixels.size(); ++p)
    CHECK(std::abs(back.images[0].pixels[p] - ds.images[0].pixels[p]) < 0.5f / 255.0f + 1e-6f);

  const Dataset resized = load_stl10(dir, 32);
  CHECK(resized.images[0].height == 32);
  CHECK(resized.images[0].width == 32);
}

TEST_CASE("image-dir loader reads what the writer wrote") {
  const auto dir = temp_dir("imgdir");
  Dataset ds = small_synth(5);
  write_image_dir(ds, dir, "png");
  const Dataset back = load_image_dir(dir);
  REQUIRE(back.size() == 5);
  CHECK(back.images[0].pixels.size() == ds.images[0].pixels.size());

  const auto jdir = temp_dir("imgdir_jpg");
  write_image_dir(ds, jdir, "jpeg");
  const Dataset jback = load_image_dir(jdir, 16);
  REQUIRE(jback.size() == 5);
  CHECK(jback.images[0].height == 16);
}

TEST_CASE("tiny-imagenet layout loader") {
  const auto dir = temp_dir("tin");
  Dataset ds = small_synth(6);
  // Two classes, three jpegs each.
  for (int w = 0; w < 2; ++w) {
    const fs::path images = dir / "train" / ("n0000000" + std::to_string(w)) / "images";
    fs::create_directories(images);
    Dataset cls;
    for (int i = 0; i < 3; ++i)
      cls.images.push_back(ds.images[static_cast<std::size_t>(w * 3 + i)]);
    write_image_dir(cls, images, "jpeg");
  }
  const Dataset back = load_tiny_imagenet(dir, 32);
  REQUIRE(back.size() == 6);
  CHECK(back.labels == std::vector<int>({0, 0, 0, 1, 1, 1}));
  CHECK(back.images[0].height == 32);
}

TEST_CASE("synthetic dataset is deterministic and in-bounds") {
  Dataset a = small_synth(10);
  Dataset b = small_synth(10);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.images[i].pixels == b.images[i].pixels);
    CHECK_NOTHROW(validate_image(a.images[i]));
  }
  CHECK(a.labels[3] == 3);
  Dataset c = small_synth(10, "blotch");
  CHECK_FALSE(c.labeled());
  CHECK(c.images[0].pixels != a.images[0].pixels);
}
