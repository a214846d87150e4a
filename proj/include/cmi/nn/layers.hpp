#pragma once

#include <memory>
#include <string>
#include <vector>

#include "cmi/core/rng.hpp"
#include "cmi/nn/tensor.hpp"

namespace cmi::nn {

struct ParamTensor {
  std::string name;
  std::vector<float> value;
  std::vector<float> grad;

  explicit ParamTensor(std::string n, std::size_t size)
      : name(std::move(n)), value(size, 0.0f), grad(size, 0.0f) {}
};

// Non-learned state (batch-norm running stats); saved in checkpoints.
struct BufferTensor {
  std::string name;
  std::vector<float> value;

  explicit BufferTensor(std::string n, std::size_t size, float fill = 0.0f)
      : name(std::move(n)), value(size, fill) {}
};

// A differentiable module. forward() caches whatever backward() needs;
// backward() consumes the cache, accumulates parameter gradients and returns
// the input gradient. Batch loops are parallelized over a fixed number of
// stripes with reductions in stripe order, so results are independent of the
// OpenMP thread count.
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& x, bool train) = 0;
  virtual Tensor backward(const Tensor& dy) = 0;
  virtual void collect_params(std::vector<ParamTensor*>& out) {}
  virtual void collect_buffers(std::vector<BufferTensor*>& out) {}
};

class Conv2d : public Layer {
 public:
  // kernel k×k, square stride/pad; bias is off when a BatchNorm follows.
  Conv2d(std::string name, int in_channels, int out_channels, int kernel,
         int stride, int pad, bool bias, Rng& rng);

  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(std::vector<ParamTensor*>& out) override;

 private:
  int in_c_, out_c_, k_, stride_, pad_;
  ParamTensor weight_;  // [out_c][in_c][k][k]
  std::unique_ptr<ParamTensor> bias_;
  Tensor x_cache_;
};

class BatchNorm2d : public Layer {
 public:
  BatchNorm2d(std::string name, int channels, double eps = 1e-5,
              double momentum = 0.1);

  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(std::vector<ParamTensor*>& out) override;
  void collect_buffers(std::vector<BufferTensor*>& out) override;

 private:
  int c_;
  double eps_, momentum_;
  ParamTensor gamma_, beta_;
  BufferTensor running_mean_, running_var_;
  Tensor xhat_cache_;
  std::vector<float> inv_std_cache_;
  bool train_cache_ = false;
};

class ReLU : public Layer {
 public:
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;

 private:
  Tensor y_cache_;
};

class MaxPool2d : public Layer {
 public:
  explicit MaxPool2d(int kernel = 2) : k_(kernel) {}
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;

 private:
  int k_;
  Tensor x_shape_;
  std::vector<std::int32_t> argmax_;
};

class GlobalAvgPool : public Layer {
 public:
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;

 private:
  int h_ = 0, w_ = 0, c_ = 0, n_ = 0;
};

class Linear : public Layer {
 public:
  Linear(std::string name, int in_features, int out_features, Rng& rng);

  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(std::vector<ParamTensor*>& out) override;

  int in_features() const { return in_f_; }
  int out_features() const { return out_f_; }

 private:
  int in_f_, out_f_;
  ParamTensor weight_;  // [out][in]
  ParamTensor bias_;
  Tensor x_cache_;
};

// Basic two-conv residual block; 1×1 projection shortcut when the shape
// changes.
class ResidualBlock : public Layer {
 public:
  ResidualBlock(std::string name, int in_channels, int out_channels, int stride,
                Rng& rng);

  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(std::vector<ParamTensor*>& out) override;
  void collect_buffers(std::vector<BufferTensor*>& out) override;

 private:
  bool projected_;
  Conv2d conv1_;
  BatchNorm2d bn1_;
  ReLU relu1_;
  Conv2d conv2_;
  BatchNorm2d bn2_;
  std::unique_ptr<Conv2d> proj_;
  std::unique_ptr<BatchNorm2d> proj_bn_;
  Tensor sum_cache_;  // pre-activation sum, for the final ReLU backward
};

}  // namespace cmi::nn
