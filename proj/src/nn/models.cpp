#include "cmi/nn/models.hpp"

#include "cmi/core/errors.hpp"

namespace cmi::nn {

namespace {

Network build_small_resnet(const EncoderArch& arch, Rng& rng) {
  Network net;
  const auto [w0, w1, w2] = arch.widths;
  net.add(std::make_unique<Conv2d>("stem", 3, w0, 3, 1, 1, false, rng));
  net.add(std::make_unique<BatchNorm2d>("stem_bn", w0));
  net.add(std::make_unique<ReLU>());
  net.add(std::make_unique<ResidualBlock>("block1", w0, w0, 1, rng));
  net.add(std::make_unique<ResidualBlock>("block2", w0, w1, 2, rng));
  net.add(std::make_unique<ResidualBlock>("block3", w1, w2, 2, rng));
  net.add(std::make_unique<GlobalAvgPool>());
  net.add(std::make_unique<Linear>("head", w2, arch.feature_dim, rng));
  return net;
}

Network build_small_vgg(const EncoderArch& arch, Rng& rng) {
  Network net;
  const auto [w0, w1, w2] = arch.widths;
  auto conv = [&](const char* name, int in, int out) {
    net.add(std::make_unique<Conv2d>(name, in, out, 3, 1, 1, false, rng));
    net.add(std::make_unique<BatchNorm2d>(std::string(name) + "_bn", out));
    net.add(std::make_unique<ReLU>());
  };
  conv("conv1", 3, w0);
  conv("conv2", w0, w0);
  net.add(std::make_unique<MaxPool2d>(2));
  conv("conv3", w0, w1);
  conv("conv4", w1, w1);
  net.add(std::make_unique<MaxPool2d>(2));
  conv("conv5", w1, w2);
  net.add(std::make_unique<MaxPool2d>(2));
  net.add(std::make_unique<GlobalAvgPool>());
  net.add(std::make_unique<Linear>("head", w2, arch.feature_dim, rng));
  return net;
}

}  // namespace

Network build_encoder(const EncoderArch& arch, Rng& rng) {
  Rng init = rng.derive("init-" + arch.id);
  if (arch.id == kSmallResnet) return build_small_resnet(arch, init);
  if (arch.id == kSmallVgg) return build_small_vgg(arch, init);
  raise(ErrorKind::ArchitectureUnknown, "unknown architecture: " + arch.id);
}

Network build_mlp(const std::string& name, const std::vector<int>& dims, Rng& rng) {
  if (dims.size() < 2)
    raise(ErrorKind::Validation, "mlp needs at least input and output dims");
  Network net;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    net.add(std::make_unique<Linear>(name + ".fc" + std::to_string(i), dims[i],
                                     dims[i + 1], rng));
    if (i + 2 < dims.size()) net.add(std::make_unique<ReLU>());
  }
  return net;
}

}  // namespace cmi::nn
