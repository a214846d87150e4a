#pragma once

#include <filesystem>

#include "cmi/contrastive/train.hpp"
#include "cmi/encoder/blackbox.hpp"

namespace cmi::encoder {

// Runs a loaded checkpoint in evaluation mode.
class LocalEncoder : public BlackBoxEncoder {
 public:
  explicit LocalEncoder(contrastive::LoadedEncoder loaded);

  int dim() const override { return loaded_.arch.feature_dim; }
  int input_resolution() const override { return loaded_.arch.input_resolution; }
  std::vector<std::vector<float>> embed_batch(
      const std::vector<Image>& images) override;
  std::string digest() const override { return digest_; }

  int epoch() const { return loaded_.epoch; }

 private:
  contrastive::LoadedEncoder loaded_;
  std::string digest_;
};

std::unique_ptr<BlackBoxEncoder> load_local(const std::filesystem::path& checkpoint);

}  // namespace cmi::encoder
