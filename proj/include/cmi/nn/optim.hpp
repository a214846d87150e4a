#pragma once

#include <vector>

#include "cmi/nn/layers.hpp"

namespace cmi::nn {

class SgdMomentum {
 public:
  SgdMomentum(std::vector<ParamTensor*> params, double momentum = 0.9)
      : params_(std::move(params)), momentum_(momentum) {
    for (ParamTensor* p : params_)
      velocity_.emplace_back(p->value.size(), 0.0f);
  }

  void step(double lr);

 private:
  std::vector<ParamTensor*> params_;
  double momentum_;
  std::vector<std::vector<float>> velocity_;
};

class Adam {
 public:
  Adam(std::vector<ParamTensor*> params, double lr, double beta1 = 0.9,
       double beta2 = 0.999, double eps = 1e-8)
      : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (ParamTensor* p : params_) {
      m_.emplace_back(p->value.size(), 0.0f);
      v_.emplace_back(p->value.size(), 0.0f);
    }
  }

  void step();

 private:
  std::vector<ParamTensor*> params_;
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<std::vector<float>> m_, v_;
};

// Half-cosine decay from base_lr to ~0 across total_epochs.
double cosine_lr(double base_lr, int epoch, int total_epochs);

// Softmax cross-entropy on [N, classes] logits. Returns the mean loss;
// grad (same shape) is written when non-null. Deterministic, single pass.
double softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                             Tensor* grad);

}  // namespace cmi::nn
