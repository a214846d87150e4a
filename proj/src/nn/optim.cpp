#include "cmi/nn/optim.hpp"

#include <cmath>

#include "cmi/core/errors.hpp"

namespace cmi::nn {

void SgdMomentum::step(double lr) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    ParamTensor* p = params_[i];
    std::vector<float>& vel = velocity_[i];
    for (std::size_t j = 0; j < p->value.size(); ++j) {
      vel[j] = static_cast<float>(momentum_ * vel[j] + p->grad[j]);
      p->value[j] -= static_cast<float>(lr * vel[j]);
    }
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, t_);
  const double bc2 = 1.0 - std::pow(beta2_, t_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    ParamTensor* p = params_[i];
    std::vector<float>& m = m_[i];
    std::vector<float>& v = v_[i];
    for (std::size_t j = 0; j < p->value.size(); ++j) {
      const double g = p->grad[j];
      m[j] = static_cast<float>(beta1_ * m[j] + (1.0 - beta1_) * g);
      v[j] = static_cast<float>(beta2_ * v[j] + (1.0 - beta2_) * g * g);
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p->value[j] -= static_cast<float>(lr_ * mhat / (std::sqrt(vhat) + eps_));
    }
  }
}

double cosine_lr(double base_lr, int epoch, int total_epochs) {
  if (total_epochs <= 1) return base_lr;
  const double t = static_cast<double>(epoch) / static_cast<double>(total_epochs);
  return base_lr * 0.5 * (1.0 + std::cos(M_PI * t));
}

double softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                             Tensor* grad) {
  const int classes = static_cast<int>(logits.per_image());
  if (labels.size() != static_cast<std::size_t>(logits.n))
    raise(ErrorKind::DimensionMismatch, "label count mismatch");
  if (grad) *grad = Tensor(logits.n, logits.c, logits.h, logits.w);
  double total = 0.0;
  const double inv_n = 1.0 / static_cast<double>(logits.n);
  for (int i = 0; i < logits.n; ++i) {
    const float* row = logits.image(i);
    const int label = labels[static_cast<std::size_t>(i)];
    if (label < 0 || label >= classes)
      raise(ErrorKind::LabelOutOfRange,
            "label " + std::to_string(label) + " out of range for " +
                std::to_string(classes) + " classes");
    float mx = row[0];
    for (int k = 1; k < classes; ++k) mx = std::max(mx, row[k]);
    double denom = 0.0;
    for (int k = 0; k < classes; ++k) denom += std::exp(static_cast<double>(row[k]) - mx);
    const double log_denom = std::log(denom) + mx;
    total += log_denom - row[label];
    if (grad) {
      float* g = grad->image(i);
      for (int k = 0; k < classes; ++k) {
        const double p = std::exp(static_cast<double>(row[k]) - log_denom);
        g[k] = static_cast<float>((p - (k == label ? 1.0 : 0.0)) * inv_n);
      }
    }
  }
  return total * inv_n;
}

}  // namespace cmi::nn
