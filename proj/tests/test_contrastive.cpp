#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "cmi/contrastive/train.hpp"
#include "cmi/core/errors.hpp"
#include "cmi/data/synth.hpp"
#include "cmi/nn/optim.hpp"

using namespace cmi;
using namespace cmi::contrastive;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Independent direct-summation oracles. These deliberately re-derive the loss
// definitions from scratch (plain loops, explicit cosine) and share no code
// with the implementation they check.
namespace oracle {

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

double moco(const std::vector<double>& q, const std::vector<double>& k,
            const std::vector<std::vector<double>>& queue, double tau) {
  const double pos = std::exp(cosine(q, k) / tau);
  double denom = pos;
  for (const auto& z : queue) denom += std::exp(cosine(q, z) / tau);
  return -std::log(pos / denom);
}

// Mean over the 2N ordered positive pairs of projected views.
double simclr(const std::vector<std::vector<double>>& projected, double tau) {
  const int n = static_cast<int>(projected.size());
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const int j = (i % 2 == 0) ? i + 1 : i - 1;
    const double num = std::exp(cosine(projected[i], projected[j]) / tau);
    double denom = 0.0;
    for (int k = 0; k < n; ++k)
      if (k != i) denom += std::exp(cosine(projected[i], projected[k]) / tau);
    total += -std::log(num / denom);
  }
  return total / n;
}

}  // namespace oracle

namespace {

std::vector<float> to_f(const std::vector<double>& v) {
  return std::vector<float>(v.begin(), v.end());
}

std::vector<double> random_vec(Rng& rng, int d) {
  std::vector<double> v(static_cast<std::size_t>(d));
  for (double& x : v) x = rng.normal();
  return v;
}

fs::path temp_dir(const char* tag) {
  const fs::path dir = fs::temp_directory_path() / (std::string("cmi_ct_") + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

nn::Network identity_projection(int d) {
  Rng rng(0);
  nn::Network g = nn::build_mlp("id", {d, d}, rng);
  auto params = g.params();
  std::fill(params[0]->value.begin(), params[0]->value.end(), 0.0f);
  for (int i = 0; i < d; ++i)
    params[0]->value[static_cast<std::size_t>(i) * d + i] = 1.0f;
  std::fill(params[1]->value.begin(), params[1]->value.end(), 0.0f);
  return g;
}

}  // namespace

TEST_CASE("moco_loss: empty queue gives exactly zero") {
  const std::vector<float> q = {0.3f, -0.7f, 2.0f};
  const std::vector<float> k = {1.0f, 0.2f, -0.5f};
  CHECK(moco_loss(q, k, {}, 0.07) == 0.0);
}

TEST_CASE("moco_loss: worked 2-d example") {
  const std::vector<float> q = {1.0f, 0.0f};
  const std::vector<float> k = {1.0f, 0.0f};
  const std::vector<std::vector<float>> queue = {{0.0f, 1.0f}};
  const double loss = moco_loss(q, k, queue, 1.0);
  CHECK(loss == doctest::Approx(-std::log(std::exp(1.0) / (std::exp(1.0) + 1.0)))
                    .epsilon(1e-12));
  CHECK(loss == doctest::Approx(0.31326168751).epsilon(1e-9));
}

TEST_CASE("moco_loss matches the direct-summation oracle on 100 instances") {
  Rng rng(42);
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 8;
    const int queue_len = static_cast<int>(rng.uniform_int(0, 16));
    const double tau = rng.uniform(0.05, 1.0);
    const auto q = random_vec(rng, d);
    const auto k = random_vec(rng, d);
    std::vector<std::vector<double>> queue_d;
    std::vector<std::vector<float>> queue_f;
    for (int j = 0; j < queue_len; ++j) {
      queue_d.push_back(random_vec(rng, d));
      queue_f.push_back(to_f(queue_d.back()));
    }
    const double expected = oracle::moco(q, k, queue_d, tau);
    const double got = moco_loss(to_f(q), to_f(k), queue_f, tau);
    CHECK(got == doctest::Approx(expected).epsilon(1e-6));
    CHECK(got >= 0.0);
    CHECK(std::isfinite(got));
  }
}

TEST_CASE("moco_loss gradient matches central finite differences") {
  Rng rng(43);
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 8;
    const double tau = rng.uniform(0.05, 1.0);
    std::vector<float> q = to_f(random_vec(rng, d));
    const auto k = to_f(random_vec(rng, d));
    std::vector<std::vector<float>> queue;
    const int queue_len = static_cast<int>(rng.uniform_int(1, 12));
    for (int j = 0; j < queue_len; ++j) queue.push_back(to_f(random_vec(rng, d)));

    std::vector<float> grad(static_cast<std::size_t>(d));
    moco_loss(q, k, queue, tau, grad);

    const double eps = 1e-5;
    for (int i = 0; i < d; ++i) {
      const float saved = q[static_cast<std::size_t>(i)];
      const float hi = static_cast<float>(saved + eps);
      const float lo = static_cast<float>(saved - eps);
      q[static_cast<std::size_t>(i)] = hi;
      const double up = moco_loss(q, k, queue, tau);
      q[static_cast<std::size_t>(i)] = lo;
      const double dn = moco_loss(q, k, queue, tau);
      q[static_cast<std::size_t>(i)] = saved;
      // Divide by the float-quantized step actually taken, not the nominal one.
      const double fd = (up - dn) / (static_cast<double>(hi) - static_cast<double>(lo));
      const double denom = std::max({std::abs(fd), std::abs(static_cast<double>(grad[static_cast<std::size_t>(i)])), 1e-6});
      CHECK(std::abs(grad[static_cast<std::size_t>(i)] - fd) / denom < 1e-4);
    }
  }
}

TEST_CASE("moco_loss rejects degenerate inputs") {
  const std::vector<float> zero = {0.0f, 0.0f};
  const std::vector<float> ok = {1.0f, 0.0f};
  CHECK_THROWS_AS(moco_loss(zero, ok, {}, 1.0), Error);
  CHECK_THROWS_AS(moco_loss(ok, zero, {}, 1.0), Error);
  CHECK_THROWS_AS(moco_loss(ok, ok, {{0.0f, 0.0f}}, 1.0), Error);
  try {
    moco_loss(zero, ok, {}, 1.0);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ZeroNormVector);
  }
}

TEST_CASE("simclr_loss: single pair is exactly zero") {
  nn::Tensor feats = nn::Tensor::flat(2, 4);
  Rng rng(3);
  for (float& v : feats.v) v = static_cast<float>(rng.normal());
  nn::Network g = identity_projection(4);
  CHECK(simclr_loss(feats, g, 0.5) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("simclr_loss: N=2 matches the explicit 4-term oracle") {
  const std::vector<std::vector<double>> views = {
      {1.0, 0.0}, {0.8, 0.6}, {0.0, 1.0}, {-0.6, 0.8}};
  nn::Tensor feats = nn::Tensor::flat(4, 2);
  for (int i = 0; i < 4; ++i)
    for (int f = 0; f < 2; ++f)
      feats.image(i)[f] = static_cast<float>(views[static_cast<std::size_t>(i)][static_cast<std::size_t>(f)]);
  nn::Network g = identity_projection(2);
  const double got = simclr_loss(feats, g, 0.5);
  CHECK(got == doctest::Approx(oracle::simclr(views, 0.5)).epsilon(1e-6));
}

TEST_CASE("simclr_loss matches oracle through a random projection head") {
  Rng rng(44);
  for (int trial = 0; trial < 100; ++trial) {
    const int n_inputs = static_cast<int>(rng.uniform_int(1, 4));
    const int count = 2 * n_inputs;
    const int d = 8;
    const double tau = rng.uniform(0.05, 1.0);
    nn::Tensor feats = nn::Tensor::flat(count, d);
    for (float& v : feats.v) v = static_cast<float>(rng.normal());
    Rng grng = rng.derive("g", static_cast<std::uint64_t>(trial));
    nn::Network g = nn::build_mlp("g", {d, 6, 4}, grng);

    nn::Tensor z = g.forward(feats, false);
    std::vector<std::vector<double>> projected;
    for (int i = 0; i < count; ++i)
      projected.emplace_back(z.image(i), z.image(i) + 4);

    const double got = simclr_loss(feats, g, tau);
    CHECK(got == doctest::Approx(oracle::simclr(projected, tau)).epsilon(1e-6));
    CHECK(got >= 0.0);
    CHECK(std::isfinite(got));
  }
}

TEST_CASE("simclr_loss is invariant to which pair is listed first") {
  Rng rng(45);
  nn::Tensor feats = nn::Tensor::flat(6, 5);
  for (float& v : feats.v) v = static_cast<float>(rng.normal());
  nn::Network g = nn::build_mlp("g", {5, 4}, rng);
  const double base = simclr_loss(feats, g, 0.3);

  nn::Tensor swapped = feats;
  for (int f = 0; f < 5; ++f) {
    std::swap(swapped.image(0)[f], swapped.image(4)[f]);
    std::swap(swapped.image(1)[f], swapped.image(5)[f]);
  }
  CHECK(simclr_loss(swapped, g, 0.3) == doctest::Approx(base).epsilon(1e-9));
}

TEST_CASE("simclr_loss gradient matches finite differences (identity head)") {
  // With an identity projection the float path is exact, so the loss math
  // itself is held to the strict 1e-4 bound.
  Rng rng(46);
  for (int trial = 0; trial < 100; ++trial) {
    const int count = 2 * static_cast<int>(rng.uniform_int(1, 4));
    const int d = 8;
    const double tau = rng.uniform(0.05, 1.0);
    nn::Tensor feats = nn::Tensor::flat(count, d);
    for (float& v : feats.v) v = static_cast<float>(rng.normal());
    nn::Network g = identity_projection(d);

    g.zero_grad();
    nn::Tensor grad;
    simclr_loss(feats, g, tau, &grad);

    const double eps = 1e-5;
    for (std::size_t idx = 0; idx < feats.size(); idx += 5) {
      const float saved = feats.v[idx];
      const float hi = static_cast<float>(saved + eps);
      const float lo = static_cast<float>(saved - eps);
      feats.v[idx] = hi;
      const double up = simclr_loss(feats, g, tau);
      feats.v[idx] = lo;
      const double dn = simclr_loss(feats, g, tau);
      feats.v[idx] = saved;
      const double fd = (up - dn) / (static_cast<double>(hi) - static_cast<double>(lo));
      const double denom = std::max({std::abs(fd), std::abs(static_cast<double>(grad.v[idx])), 1e-6});
      CHECK(std::abs(grad.v[idx] - fd) / denom < 1e-4);
    }
  }
}

TEST_CASE("simclr_loss gradient through a real head (directional check)") {
  Rng rng(47);
  for (int trial = 0; trial < 20; ++trial) {
    const int count = 4;
    const int d = 8;
    const double tau = rng.uniform(0.1, 1.0);
    nn::Tensor feats = nn::Tensor::flat(count, d);
    for (float& v : feats.v) v = static_cast<float>(rng.normal());
    Rng grng = rng.derive("g", static_cast<std::uint64_t>(trial));
    nn::Network g = nn::build_mlp("g", {d, 6, 4}, grng);

    g.zero_grad();
    nn::Tensor grad;
    simclr_loss(feats, g, tau, &grad);

    Rng drng = rng.derive("dir", static_cast<std::uint64_t>(trial));
    std::vector<float> dir(feats.size());
    double analytic = 0.0;
    for (std::size_t j = 0; j < dir.size(); ++j) {
      dir[j] = static_cast<float>(drng.normal());
      analytic += static_cast<double>(grad.v[j]) * dir[j];
    }
    const double eps = 1e-3;
    const std::vector<float> saved = feats.v;
    for (std::size_t j = 0; j < dir.size(); ++j)
      feats.v[j] = saved[j] + static_cast<float>(eps) * dir[j];
    const double up = simclr_loss(feats, g, tau);
    for (std::size_t j = 0; j < dir.size(); ++j)
      feats.v[j] = saved[j] - static_cast<float>(eps) * dir[j];
    const double dn = simclr_loss(feats, g, tau);
    feats.v = saved;
    const double fd = (up - dn) / (2 * eps);
    const double denom = std::max({std::abs(fd), std::abs(analytic), 1e-3});
    CHECK(std::abs(analytic - fd) / denom < 3e-2);
  }
}

TEST_CASE("momentum_update arithmetic and errors") {
  Rng rng(5);
  nn::Network a = nn::build_mlp("a", {3, 4}, rng);
  nn::Network b = nn::build_mlp("b", {3, 4}, rng);

  for (nn::ParamTensor* p : a.params()) std::fill(p->value.begin(), p->value.end(), 1.0f);
  for (nn::ParamTensor* p : b.params()) std::fill(p->value.begin(), p->value.end(), 0.0f);
  momentum_update(a, b, 0.999);
  for (nn::ParamTensor* p : b.params())
    for (float v : p->value) CHECK(v == doctest::Approx(0.001f));

  momentum_update(a, b, 1.0);
  for (nn::ParamTensor* p : b.params())
    for (float v : p->value) CHECK(v == doctest::Approx(0.001f));

  momentum_update(a, b, 0.0);
  for (nn::ParamTensor* p : b.params())
    for (float v : p->value) CHECK(v == 1.0f);

  nn::Network c = nn::build_mlp("c", {3, 5}, rng);
  CHECK_THROWS_AS(momentum_update(a, c, 0.5), Error);
}

TEST_CASE("key queue is FIFO with capacity") {
  KeyQueue q(8, 2);
  auto keys = [](std::initializer_list<float> firsts) {
    std::vector<std::vector<float>> out;
    for (float f : firsts) out.push_back({f, 0.0f});
    return out;
  };

  q.push(keys({0, 1, 2, 3}));
  CHECK(q.size() == 4);
  q.push(keys({4, 5, 6, 7}));
  CHECK(q.size() == 8);
  q.push(keys({8, 9, 10, 11}));
  CHECK(q.size() == 8);
  CHECK(q.entries().front()[0] == 4.0f);
  CHECK(q.entries().back()[0] == 11.0f);

  q.push(keys({20, 21, 22, 23, 24, 25, 26, 27}));
  CHECK(q.size() == 8);
  CHECK(q.entries().front()[0] == 20.0f);

  CHECK_THROWS_AS(q.push({{1.0f, 2.0f, 3.0f}}), Error);
}

TEST_CASE("momentum + queue preserve moco state invariants over 3 steps") {
  Rng rng(6);
  nn::Network enc = nn::build_mlp("e", {4, 4}, rng);
  nn::Network key = nn::build_mlp("k", {4, 4}, rng);
  key.copy_state_from(enc);
  KeyQueue queue(6, 4);

  const double m = 0.9;
  for (int step = 0; step < 3; ++step) {
    for (nn::ParamTensor* p : enc.params())
      for (float& v : p->value) v += 0.1f;

    std::vector<float> expected;
    {
      auto ep = enc.params();
      auto kp = key.params();
      for (std::size_t i = 0; i < ep.size(); ++i)
        for (std::size_t j = 0; j < ep[i]->value.size(); ++j)
          expected.push_back(static_cast<float>(m * kp[i]->value[j] +
                                                (1 - m) * ep[i]->value[j]));
    }
    momentum_update(enc, key, m);
    std::size_t idx = 0;
    for (nn::ParamTensor* p : key.params())
      for (float v : p->value) CHECK(v == doctest::Approx(expected[idx++]));

    queue.push({{1.0f, 0, 0, 0}, {0, 1.0f, 0, 0}, {0, 0, 1.0f, 0}});
    CHECK(queue.size() <= queue.capacity());
  }
  CHECK(queue.size() == 6);
}

TEST_CASE("pretrain_encoder: checkpoint counting, determinism, errors") {
  data::SynthConfig scfg;
  scfg.count = 24;
  scfg.seed = 10;
  const data::Dataset ds = data::make_synthetic_dataset(scfg);
  data::DatasetSplit split;
  split.name = "pretrain-member";
  split.role = data::SplitRole::PretrainMember;
  for (std::size_t i = 0; i < ds.size(); ++i) split.indices.push_back(i);

  PretrainConfig cfg;
  cfg.algo = kAlgoMoco;
  cfg.arch.widths = {4, 6, 8};
  cfg.arch.feature_dim = 16;
  cfg.epochs = 4;
  cfg.checkpoint_every = 2;
  cfg.batch_size = 8;
  cfg.queue_capacity = 16;

  const auto dir1 = temp_dir("pre1");
  const auto run1 = pretrain_encoder(ds, split, cfg, 77, dir1);
  CHECK(run1.checkpoints.size() == 2);  // epochs 2 and 4
  CHECK(run1.checkpoints.back().epoch == 4);
  CHECK(run1.loss_log.size() == 4);
  CHECK(fs::exists(dir1 / "train_log.csv"));
  for (const auto& [epoch, loss] : run1.loss_log) CHECK(std::isfinite(loss));

  const auto dir2 = temp_dir("pre2");
  const auto run2 = pretrain_encoder(ds, split, cfg, 77, dir2);
  for (std::size_t i = 0; i < run1.loss_log.size(); ++i)
    CHECK(run1.loss_log[i].second == run2.loss_log[i].second);

  LoadedEncoder e1 = load_encoder_checkpoint(run1.checkpoints.back().file);
  LoadedEncoder e2 = load_encoder_checkpoint(run2.checkpoints.back().file);
  CHECK(e1.epoch == 4);
  const nn::Tensor probe = nn::batch_from_images(
      std::vector<Image>(ds.images.begin(), ds.images.begin() + 3));
  nn::Tensor y1 = e1.net.forward(probe, false);
  nn::Tensor y2 = e2.net.forward(probe, false);
  CHECK(y1.v == y2.v);
  for (float v : y1.v) CHECK(std::isfinite(v));

  PretrainConfig scfg2 = cfg;
  scfg2.algo = kAlgoSimclr;
  const auto dir3 = temp_dir("pre3");
  const auto run3 = pretrain_encoder(ds, split, scfg2, 77, dir3);
  CHECK(run3.checkpoints.size() == 2);

  data::DatasetSplit empty;
  empty.role = data::SplitRole::PretrainMember;
  CHECK_THROWS_AS(static_cast<void>(pretrain_encoder(ds, empty, cfg, 1, temp_dir("e1"))), Error);
  data::DatasetSplit wrong_role = split;
  wrong_role.role = data::SplitRole::EvalNonmember;
  CHECK_THROWS_AS(static_cast<void>(pretrain_encoder(ds, wrong_role, cfg, 1, temp_dir("e2"))), Error);
  PretrainConfig bad = cfg;
  bad.algo = "byol";
  CHECK_THROWS_AS(static_cast<void>(pretrain_encoder(ds, split, bad, 1, temp_dir("e3"))), Error);
}

TEST_CASE("checkpoint loader rejects corrupt files") {
  const auto dir = temp_dir("ckpt");
  {
    std::ofstream f(dir / "junk.ckpt", std::ios::binary);
    f << "not a checkpoint";
  }
  CHECK_THROWS_AS(static_cast<void>(load_encoder_checkpoint(dir / "junk.ckpt")), Error);
  try {
    static_cast<void>(load_encoder_checkpoint(dir / "junk.ckpt"));
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::CorruptCheckpoint);
  }

  Rng rng(1);
  nn::EncoderArch arch;
  arch.widths = {4, 6, 8};
  arch.feature_dim = 8;
  nn::Network net = nn::build_encoder(arch, rng);
  save_encoder_checkpoint(net, arch, 3, "digest", dir / "full.ckpt");
  const auto bytes = [&] {
    std::ifstream f(dir / "full.ckpt", std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(f), {});
  }();
  {
    std::ofstream f(dir / "trunc.ckpt", std::ios::binary);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  }
  CHECK_THROWS_AS(static_cast<void>(load_encoder_checkpoint(dir / "trunc.ckpt")), Error);
}
