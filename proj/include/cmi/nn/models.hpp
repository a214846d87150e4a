#pragma once

#include <array>
#include <string>

#include "cmi/nn/network.hpp"

namespace cmi::nn {

// Known encoder architectures. "small-resnet" is an 8-layer residual CNN
// (stem + three basic blocks + fc head); "small-vgg" is a 6-layer plain CNN
// (five convs + fc). Both end in a d-dimensional feature head.
inline constexpr const char* kSmallResnet = "small-resnet";
inline constexpr const char* kSmallVgg = "small-vgg";

struct EncoderArch {
  std::string id = kSmallResnet;
  int feature_dim = 128;
  std::array<int, 3> widths = {16, 32, 64};
  int input_resolution = 32;
};

// ArchitectureUnknown for an unrecognized id.
Network build_encoder(const EncoderArch& arch, Rng& rng);

// Plain fully connected stack with ReLU between layers (none after the last).
// dims = {in, hidden..., out}.
Network build_mlp(const std::string& name, const std::vector<int>& dims, Rng& rng);

}  // namespace cmi::nn
