#include "cmi/encoder/local.hpp"

#include <fstream>

#include "cmi/core/digest.hpp"
#include "cmi/core/errors.hpp"
#include "cmi/nn/tensor.hpp"

namespace cmi::encoder {

std::vector<std::vector<float>> embed_batch(BlackBoxEncoder& enc,
                                            const std::vector<Image>& images) {
  for (const Image& img : images)
    if (img.height != enc.input_resolution() || img.width != enc.input_resolution())
      raise(ErrorKind::DimensionMismatch,
            "image is " + std::to_string(img.height) + "x" +
                std::to_string(img.width) + ", encoder expects " +
                std::to_string(enc.input_resolution()));
  return enc.embed_batch(images);
}

LocalEncoder::LocalEncoder(contrastive::LoadedEncoder loaded)
    : loaded_(std::move(loaded)) {
  // Identity = architecture + epoch + a slice of the parameters.
  std::string key = loaded_.arch.id + "/" + std::to_string(loaded_.arch.feature_dim) +
                    "/" + std::to_string(loaded_.epoch) + "/" + loaded_.config_digest;
  for (nn::ParamTensor* p : loaded_.net.params()) {
    const std::size_t take = std::min<std::size_t>(p->value.size(), 8);
    key.append(reinterpret_cast<const char*>(p->value.data()), take * sizeof(float));
  }
  digest_ = digest_hex(key);
}

std::vector<std::vector<float>> LocalEncoder::embed_batch(
    const std::vector<Image>& images) {
  std::vector<std::vector<float>> out;
  out.reserve(images.size());
  constexpr std::size_t kChunk = 256;
  const int d = loaded_.arch.feature_dim;
  for (std::size_t start = 0; start < images.size(); start += kChunk) {
    const std::size_t end = std::min(images.size(), start + kChunk);
    const std::span<const Image> slice(images.data() + start, end - start);
    const nn::Tensor feats = loaded_.net.forward(nn::batch_from_images(slice), false);
    if (static_cast<int>(feats.per_image()) != d)
      raise(ErrorKind::DimensionMismatch, "encoder produced wrong feature size");
    for (int i = 0; i < feats.n; ++i)
      out.emplace_back(feats.image(i), feats.image(i) + d);
  }
  return out;
}

std::unique_ptr<BlackBoxEncoder> load_local(const std::filesystem::path& checkpoint) {
  return std::make_unique<LocalEncoder>(
      contrastive::load_encoder_checkpoint(checkpoint));
}

}  // namespace cmi::encoder
