#include "cmi/contrastive/train.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "cmi/core/digest.hpp"
#include "cmi/core/errors.hpp"
#include "cmi/nn/optim.hpp"

namespace cmi::contrastive {

using nlohmann::json;
namespace fs = std::filesystem;

json PretrainConfig::to_json() const {
  json j;
  j["algo"] = algo;
  j["arch"] = {{"id", arch.id},
               {"feature_dim", arch.feature_dim},
               {"widths", arch.widths},
               {"input_resolution", arch.input_resolution}};
  j["epochs"] = epochs;
  j["checkpoint_every"] = checkpoint_every;
  j["batch_size"] = batch_size;
  j["base_lr"] = base_lr;
  j["sgd_momentum"] = sgd_momentum;
  j["tau_moco"] = tau_moco;
  j["queue_capacity"] = queue_capacity;
  j["key_momentum"] = key_momentum;
  j["tau_simclr"] = tau_simclr;
  j["projection_hidden"] = projection_hidden;
  j["projection_dim"] = projection_dim;
  j["pipeline"] = pipeline.to_json();
  return j;
}

PretrainConfig PretrainConfig::from_json(const json& j) {
  PretrainConfig c;
  c.algo = j.value("algo", c.algo);
  if (j.contains("arch")) {
    const json& a = j["arch"];
    c.arch.id = a.value("id", c.arch.id);
    c.arch.feature_dim = a.value("feature_dim", c.arch.feature_dim);
    if (a.contains("widths")) {
      const auto w = a["widths"].get<std::vector<int>>();
      if (w.size() != 3) raise(ErrorKind::Validation, "arch widths must have 3 entries");
      c.arch.widths = {w[0], w[1], w[2]};
    }
    c.arch.input_resolution = a.value("input_resolution", c.arch.input_resolution);
  }
  c.epochs = j.value("epochs", c.epochs);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.base_lr = j.value("base_lr", c.base_lr);
  c.sgd_momentum = j.value("sgd_momentum", c.sgd_momentum);
  c.tau_moco = j.value("tau_moco", c.tau_moco);
  c.queue_capacity = j.value("queue_capacity", c.queue_capacity);
  c.key_momentum = j.value("key_momentum", c.key_momentum);
  c.tau_simclr = j.value("tau_simclr", c.tau_simclr);
  c.projection_hidden = j.value("projection_hidden", c.projection_hidden);
  c.projection_dim = j.value("projection_dim", c.projection_dim);
  if (j.contains("pipeline"))
    c.pipeline = data::AugmentationPipeline::from_json(j["pipeline"]);
  return c;
}

std::string PretrainConfig::digest() const { return digest_hex(to_json().dump()); }

namespace {

// Two augmented views per input, parallel over the batch with per-image
// derived rng streams (deterministic regardless of thread count).
void make_view_pair(const data::Dataset& dataset,
                    const std::vector<std::size_t>& ids,
                    const data::AugmentationPipeline& pipeline, const Rng& epoch_rng,
                    std::vector<Image>& v1, std::vector<Image>& v2) {
  v1.resize(ids.size());
  v2.resize(ids.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(ids.size()); ++i) {
    Rng r1 = epoch_rng.derive("view1", static_cast<std::uint64_t>(i));
    Rng r2 = epoch_rng.derive("view2", static_cast<std::uint64_t>(i));
    const Image& src = dataset.images[ids[static_cast<std::size_t>(i)]];
    v1[static_cast<std::size_t>(i)] = data::augment(src, pipeline, r1);
    v2[static_cast<std::size_t>(i)] = data::augment(src, pipeline, r2);
  }
}

std::vector<float> l2_normalized(const float* v, int d) {
  double acc = 0.0;
  for (int i = 0; i < d; ++i) acc += static_cast<double>(v[i]) * v[i];
  const double n = std::sqrt(acc);
  std::vector<float> out(static_cast<std::size_t>(d));
  if (n == 0.0) raise(ErrorKind::ZeroNormVector, "feature vector has zero norm");
  for (int i = 0; i < d; ++i) out[static_cast<std::size_t>(i)] = static_cast<float>(v[i] / n);
  return out;
}

// Batched version of the per-query loss: mean over the batch, gradient in
// dq. Keys and queue entries are constants.
double moco_batch_loss(const nn::Tensor& q, const nn::Tensor& k,
                       const KeyQueue& queue, double tau, nn::Tensor& dq) {
  const int n = q.n;
  const int d = static_cast<int>(q.per_image());
  dq = nn::Tensor(q.n, q.c, q.h, q.w);

  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    std::span<const float> qi(q.image(i), static_cast<std::size_t>(d));
    std::span<const float> ki(k.image(i), static_cast<std::size_t>(d));
    std::span<float> gi(dq.image(i), static_cast<std::size_t>(d));
    total += moco_loss(qi, ki, queue.entries(), tau, gi);
  }
  const float inv = 1.0f / static_cast<float>(n);
  for (float& g : dq.v) g *= inv;
  return total / n;
}

struct EpochBatches {
  std::vector<std::vector<std::size_t>> batches;
};

EpochBatches shuffled_batches(const std::vector<std::size_t>& indices,
                              int batch_size, Rng& rng) {
  std::vector<std::size_t> order = indices;
  rng.shuffle(order);
  EpochBatches out;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    if (end - start < 2) break;  // BatchNorm needs at least two samples
    out.batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

}  // namespace

PretrainResult pretrain_encoder(const data::Dataset& dataset,
                                const data::DatasetSplit& split,
                                const PretrainConfig& config, std::uint64_t seed,
                                const fs::path& out_dir) {
  if (split.indices.empty())
    raise(ErrorKind::EmptySplit, "pre-training split is empty");
  if (split.role != data::SplitRole::PretrainMember &&
      split.role != data::SplitRole::ShadowMember)
    raise(ErrorKind::Validation,
          "pre-training expects a pretrain-member or shadow-member split");
  if (config.algo != kAlgoMoco && config.algo != kAlgoSimclr)
    raise(ErrorKind::UnknownAlgorithm, "unknown training algorithm: " + config.algo);

  fs::create_directories(out_dir);
  const std::string cfg_digest = config.digest();
  const Rng root = Rng(seed).derive("pretrain");

  Rng init_rng = root.derive("init");
  nn::Network encoder = nn::build_encoder(config.arch, init_rng);

  // moco state
  nn::Network key_encoder;
  std::unique_ptr<KeyQueue> queue;
  // simclr state
  nn::Network projection;

  std::vector<nn::ParamTensor*> trainable = encoder.params();
  if (config.algo == kAlgoMoco) {
    Rng key_rng = root.derive("init");  // same stream: identical init
    key_encoder = nn::build_encoder(config.arch, key_rng);
    key_encoder.copy_state_from(encoder);
    queue = std::make_unique<KeyQueue>(config.queue_capacity, config.arch.feature_dim);
  } else {
    Rng proj_rng = root.derive("projection");
    projection = nn::build_mlp("proj",
                               {config.arch.feature_dim, config.projection_hidden,
                                config.projection_dim},
                               proj_rng);
    for (nn::ParamTensor* p : projection.params()) trainable.push_back(p);
  }
  nn::SgdMomentum opt(trainable, config.sgd_momentum);
  const double lr_scaled =
      config.base_lr * static_cast<double>(config.batch_size) / 256.0;

  PretrainResult result;
  std::ofstream log(out_dir / "train_log.csv");
  log << "epoch,loss\n";

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = nn::cosine_lr(lr_scaled, epoch, config.epochs);
    Rng epoch_rng = root.derive("epoch", static_cast<std::uint64_t>(epoch));
    const EpochBatches plan = shuffled_batches(split.indices, config.batch_size, epoch_rng);

    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < plan.batches.size(); ++b) {
      const auto& ids = plan.batches[b];
      Rng batch_rng = epoch_rng.derive("batch", b);
      std::vector<Image> v1, v2;
      make_view_pair(dataset, ids, config.pipeline, batch_rng, v1, v2);

      double loss = 0.0;
      encoder.zero_grad();
      if (config.algo == kAlgoMoco) {
        const nn::Tensor q = encoder.forward(nn::batch_from_images(v1), true);
        const nn::Tensor k = key_encoder.forward(nn::batch_from_images(v2), true);
        nn::Tensor dq;
        loss = moco_batch_loss(q, k, *queue, config.tau_moco, dq);
        encoder.backward(dq);
        opt.step(lr);
        momentum_update(encoder, key_encoder, config.key_momentum);
        std::vector<std::vector<float>> keys;
        keys.reserve(ids.size());
        const int d = config.arch.feature_dim;
        for (int i = 0; i < k.n; ++i) keys.push_back(l2_normalized(k.image(i), d));
        queue->push(keys);
      } else {
        // Interleave so views of input t sit at rows (2t, 2t+1).
        std::vector<Image> views;
        views.reserve(2 * ids.size());
        for (std::size_t i = 0; i < ids.size(); ++i) {
          views.push_back(std::move(v1[i]));
          views.push_back(std::move(v2[i]));
        }
        projection.zero_grad();
        const nn::Tensor feats = encoder.forward(nn::batch_from_images(views), true);
        nn::Tensor dfeats;
        loss = simclr_loss(feats, projection, config.tau_simclr, &dfeats);
        encoder.backward(dfeats);
        opt.step(lr);
      }
      epoch_loss += loss;
      ++batches;
    }
    epoch_loss /= static_cast<double>(batches);
    result.loss_log.emplace_back(epoch + 1, epoch_loss);
    log << epoch + 1 << "," << epoch_loss << "\n";
    log.flush();

    const bool last = epoch + 1 == config.epochs;
    if ((config.checkpoint_every > 0 && (epoch + 1) % config.checkpoint_every == 0) ||
        last) {
      const fs::path file =
          out_dir / ("encoder_epoch_" + std::to_string(epoch + 1) + ".ckpt");
      save_encoder_checkpoint(encoder, config.arch, epoch + 1, cfg_digest, file);
      result.checkpoints.push_back({epoch + 1, config.arch, cfg_digest, file});
    }
  }
  return result;
}

namespace {
constexpr char kMagic[8] = {'C', 'M', 'I', 'E', 'N', 'C', '1', '\n'};
}

void save_encoder_checkpoint(nn::Network& net, const nn::EncoderArch& arch,
                             int epoch, const std::string& config_digest,
                             const fs::path& file) {
  json header;
  header["schema"] = 1;
  header["arch"] = {{"id", arch.id},
                    {"feature_dim", arch.feature_dim},
                    {"widths", arch.widths},
                    {"input_resolution", arch.input_resolution}};
  header["epoch"] = epoch;
  header["config_digest"] = config_digest;
  const std::string head = header.dump();

  std::ofstream out(file, std::ios::binary);
  if (!out) raise(ErrorKind::Io, "cannot write " + file.string());
  out.write(kMagic, sizeof(kMagic));
  const std::uint32_t len = static_cast<std::uint32_t>(head.size());
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  net.save_state(out);
}

LoadedEncoder load_encoder_checkpoint(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) raise(ErrorKind::Io, "cannot open " + file.string());
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    raise(ErrorKind::CorruptCheckpoint, file.string() + ": bad magic");
  std::uint32_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || len == 0 || len > (1u << 20))
    raise(ErrorKind::CorruptCheckpoint, file.string() + ": bad header length");
  std::string head(len, '\0');
  in.read(head.data(), len);
  if (!in) raise(ErrorKind::CorruptCheckpoint, file.string() + ": truncated header");

  json header;
  try {
    header = json::parse(head);
  } catch (const json::exception&) {
    raise(ErrorKind::CorruptCheckpoint, file.string() + ": unparseable header");
  }

  LoadedEncoder out;
  const json& a = header.at("arch");
  out.arch.id = a.at("id").get<std::string>();
  out.arch.feature_dim = a.at("feature_dim").get<int>();
  const auto w = a.at("widths").get<std::vector<int>>();
  if (w.size() != 3) raise(ErrorKind::CorruptCheckpoint, "bad widths");
  out.arch.widths = {w[0], w[1], w[2]};
  out.arch.input_resolution = a.at("input_resolution").get<int>();
  out.epoch = header.at("epoch").get<int>();
  out.config_digest = header.value("config_digest", "");

  Rng rng(0);  // overwritten immediately by the stored state
  out.net = nn::build_encoder(out.arch, rng);
  out.net.load_state(in);
  return out;
}

}  // namespace cmi::contrastive
