#pragma once

#include <iosfwd>
#include <memory>
#include <vector>

#include "cmi/nn/layers.hpp"

namespace cmi::nn {

// A feed-forward stack of layers. Residual topology lives inside
// ResidualBlock, so the stack itself stays sequential.
class Network {
 public:
  Network() = default;

  void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }

  Tensor forward(const Tensor& x, bool train);
  Tensor backward(const Tensor& dy);

  std::vector<ParamTensor*> params();
  std::vector<BufferTensor*> buffers();
  void zero_grad();
  std::size_t param_count();

  // Copies values (params and buffers); ArchitectureMismatch when the shapes
  // differ.
  void copy_state_from(Network& other);

  void save_state(std::ostream& out);
  void load_state(std::istream& in);

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

}  // namespace cmi::nn
