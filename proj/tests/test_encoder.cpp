#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "cmi/core/errors.hpp"
#include "cmi/data/synth.hpp"
#include "cmi/encoder/local.hpp"
#include "cmi/encoder/mock_server.hpp"
#include "cmi/encoder/remote.hpp"

using namespace cmi;
using namespace cmi::encoder;
namespace fs = std::filesystem;

namespace {

fs::path make_checkpoint(const char* tag) {
  const fs::path dir = fs::temp_directory_path() / (std::string("cmi_enc_") + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  Rng rng(9);
  nn::EncoderArch arch;
  arch.widths = {4, 6, 8};
  arch.feature_dim = 12;
  nn::Network net = nn::build_encoder(arch, rng);
  const fs::path file = dir / "enc.ckpt";
  contrastive::save_encoder_checkpoint(net, arch, 7, "cfg", file);
  return file;
}

std::vector<Image> byte_valued_images(std::size_t count) {
  data::SynthConfig cfg;
  cfg.count = count;
  cfg.seed = 21;
  data::Dataset ds = data::make_synthetic_dataset(cfg);
  // Snap to the 8-bit grid so the PNG wire format is lossless.
  for (Image& img : ds.images) {
    const auto bytes = to_bytes(img);
    img = from_bytes(bytes.data(), img.height, img.width, img.channels);
  }
  return ds.images;
}

}  // namespace

TEST_CASE("local encoder: shape contract, determinism, empty batch") {
  const auto ckpt = make_checkpoint("local");
  auto enc = load_local(ckpt);
  CHECK(enc->dim() == 12);
  CHECK(enc->input_resolution() == 32);

  CHECK(embed_batch(*enc, {}).empty());

  const auto images = byte_valued_images(10);
  const auto feats = embed_batch(*enc, images);
  REQUIRE(feats.size() == 10);
  for (const auto& f : feats) {
    CHECK(f.size() == 12);
    for (float v : f) CHECK(std::isfinite(v));
  }

  // Same image twice → identical vectors.
  const auto once = embed_batch(*enc, {images[0]});
  const auto twice = embed_batch(*enc, {images[0]});
  CHECK(once[0] == twice[0]);

  // Wrong resolution is the caller's bug.
  const Image small = resize_bilinear(images[0], 16, 16);
  CHECK_THROWS_AS(embed_batch(*enc, {small}), Error);
}

TEST_CASE("load_local rejects corrupt checkpoints") {
  const fs::path dir = fs::temp_directory_path() / "cmi_enc_bad";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ofstream(dir / "bad.ckpt") << "garbage";
  CHECK_THROWS_AS(static_cast<void>(load_local(dir / "bad.ckpt")), Error);
}

TEST_CASE("remote adapter round-trips through the mock server") {
  const auto ckpt = make_checkpoint("remote");
  auto local = load_local(ckpt);
  MockEncoderServer server(*local);

  RemoteConfig cfg;
  cfg.host = "127.0.0.1";
  cfg.port = server.port();
  cfg.dim = 12;
  cfg.input_resolution = 32;
  cfg.max_batch = 4;  // forces chunking for 10 images
  cfg.backoff_ms = 1;
  auto remote = connect_remote(cfg);

  const auto images = byte_valued_images(10);
  const auto local_feats = embed_batch(*local, images);
  const auto remote_feats = embed_batch(*remote, images);
  REQUIRE(remote_feats.size() == local_feats.size());
  // Interchangeability: local and remote agree to 1e-5 on byte-valued inputs.
  for (std::size_t i = 0; i < local_feats.size(); ++i)
    for (std::size_t f = 0; f < local_feats[i].size(); ++f)
      CHECK(remote_feats[i][f] ==
            doctest::Approx(local_feats[i][f]).epsilon(1e-5));
}

TEST_CASE("remote adapter retries transient failures, then succeeds") {
  const auto ckpt = make_checkpoint("retry");
  auto local = load_local(ckpt);
  MockEncoderServer server(*local);
  server.fail_next(2);  // two 500s, then healthy

  RemoteConfig cfg;
  cfg.host = "127.0.0.1";
  cfg.port = server.port();
  cfg.dim = 12;
  cfg.input_resolution = 32;
  cfg.backoff_ms = 1;
  auto remote = connect_remote(cfg);
  const auto images = byte_valued_images(2);
  CHECK(embed_batch(*remote, images).size() == 2);
}

TEST_CASE("remote adapter reports transport errors with the attempt count") {
  RemoteConfig cfg;
  cfg.host = "127.0.0.1";
  cfg.port = 1;  // nothing listens here
  cfg.dim = 4;
  cfg.input_resolution = 32;
  cfg.retries = 2;
  cfg.backoff_ms = 1;
  cfg.timeout_s = 1;
  auto remote = connect_remote(cfg);
  const auto images = byte_valued_images(1);
  try {
    embed_batch(*remote, images);
    FAIL("expected transport error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Transport);
    CHECK(std::string(e.what()).find("3 attempts") != std::string::npos);
  }
}

TEST_CASE("remote adapter flags wrong vector counts as protocol violations") {
  const auto ckpt = make_checkpoint("proto");
  auto local = load_local(ckpt);
  MockEncoderServer server(*local);
  server.set_drop_one(true);

  RemoteConfig cfg;
  cfg.host = "127.0.0.1";
  cfg.port = server.port();
  cfg.dim = 12;
  cfg.input_resolution = 32;
  cfg.backoff_ms = 1;
  auto remote = connect_remote(cfg);
  const auto images = byte_valued_images(3);
  try {
    embed_batch(*remote, images);
    FAIL("expected protocol violation");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ProtocolViolation);
  }
}

TEST_CASE("bearer token is enforced by the mock server") {
  const auto ckpt = make_checkpoint("auth");
  auto local = load_local(ckpt);
  MockEncoderServer server(*local, std::string("secret"));

  RemoteConfig cfg;
  cfg.host = "127.0.0.1";
  cfg.port = server.port();
  cfg.dim = 12;
  cfg.input_resolution = 32;
  cfg.backoff_ms = 1;
  const auto images = byte_valued_images(1);

  auto unauthorized = connect_remote(cfg);
  CHECK_THROWS_AS(embed_batch(*unauthorized, images), Error);

  cfg.auth_token = "secret";
  auto authorized = connect_remote(cfg);
  CHECK(embed_batch(*authorized, images).size() == 1);
}
