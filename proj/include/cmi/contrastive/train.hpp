#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cmi/contrastive/loss.hpp"
#include "cmi/data/augment.hpp"
#include "cmi/data/dataset.hpp"
#include "cmi/data/splits.hpp"
#include "cmi/nn/models.hpp"

namespace cmi::contrastive {

inline constexpr const char* kAlgoMoco = "moco";
inline constexpr const char* kAlgoSimclr = "simclr";

struct PretrainConfig {
  std::string algo = kAlgoMoco;
  nn::EncoderArch arch;
  int epochs = 200;
  int checkpoint_every = 50;
  int batch_size = 256;
  double base_lr = 0.06;  // for batch 256; scaled linearly with batch size
  double sgd_momentum = 0.9;

  // moco
  double tau_moco = 0.07;
  std::size_t queue_capacity = 1024;
  double key_momentum = 0.999;

  // simclr
  double tau_simclr = 0.5;
  int projection_hidden = 128;
  int projection_dim = 64;

  data::AugmentationPipeline pipeline = data::AugmentationPipeline::standard();

  nlohmann::json to_json() const;
  static PretrainConfig from_json(const nlohmann::json& j);
  std::string digest() const;
};

struct EncoderCheckpoint {
  int epoch = 0;
  nn::EncoderArch arch;
  std::string config_digest;
  std::filesystem::path file;
};

struct PretrainResult {
  std::vector<EncoderCheckpoint> checkpoints;
  std::vector<std::pair<int, double>> loss_log;  // (epoch, mean loss)
};

// Pre-trains an encoder on the split's images with the requested algorithm.
// Emits a checkpoint at every multiple of checkpoint_every and at the final
// epoch, plus a train_log.csv of per-epoch losses, all under out_dir.
// Deterministic in (dataset, split, config, seed).
PretrainResult pretrain_encoder(const data::Dataset& dataset,
                                const data::DatasetSplit& split,
                                const PretrainConfig& config, std::uint64_t seed,
                                const std::filesystem::path& out_dir);

// Self-describing checkpoint container.
void save_encoder_checkpoint(nn::Network& net, const nn::EncoderArch& arch,
                             int epoch, const std::string& config_digest,
                             const std::filesystem::path& file);

struct LoadedEncoder {
  nn::EncoderArch arch;
  int epoch = 0;
  std::string config_digest;
  nn::Network net;
};

// CorruptCheckpoint on malformed files; ArchitectureUnknown when the header
// names an architecture this build does not know.
LoadedEncoder load_encoder_checkpoint(const std::filesystem::path& file);

}  // namespace cmi::contrastive
