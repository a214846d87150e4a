#pragma once

#include <span>
#include <vector>

#include "cmi/nn/network.hpp"

namespace cmi::contrastive {

// Per-query dictionary-based contrastive loss:
//   -log( e^{sim(q,k)/τ} / (e^{sim(q,k)/τ} + Σ_{z∈Γ} e^{sim(q,z)/τ}) )
// with sim = cosine. The queue may be empty (loss is exactly 0 then). When
// grad_q is non-null it receives dloss/dquery (key and queue are constants).
// Raises ZeroNormVector when any vector has zero norm.
double moco_loss(std::span<const float> query, std::span<const float> key,
                 const std::vector<std::vector<float>>& queue, double tau,
                 std::span<float> grad_query = {});

// Batch contrastive loss over 2N ordered views where (2t, 2t+1) are the two
// augmented views of input t. Features are raw encoder outputs; the
// projection head g is applied internally and similarities are cosine:
//   ℓ_ij = -log( e^{sim(g_i,g_j)/τ} / Σ_{k≠i} e^{sim(g_i,g_k)/τ} )
// Returns the mean of ℓ_ij over all 2N ordered positive pairs. When
// grad_features is non-null it receives dloss/dfeatures (the mean-reduced
// gradient), backpropagated through g (whose parameter gradients accumulate).
double simclr_loss(const nn::Tensor& features, nn::Network& projection, double tau,
                   nn::Tensor* grad_features = nullptr);

// FIFO dictionary of key vectors with fixed capacity.
class KeyQueue {
 public:
  KeyQueue(std::size_t capacity, int dim) : capacity_(capacity), dim_(dim) {}

  // Enqueues N keys; once capacity is reached the oldest are dequeued.
  // DimensionMismatch when a key has the wrong dimension.
  void push(const std::vector<std::vector<float>>& keys);

  const std::vector<std::vector<float>>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  int dim() const { return dim_; }

 private:
  std::size_t capacity_;
  int dim_;
  std::vector<std::vector<float>> entries_;  // oldest first
};

// In-place EMA of parameters: θ_m ← m·θ_m + (1-m)·θ.
// ArchitectureMismatch when the parameter lists differ in shape.
void momentum_update(nn::Network& encoder, nn::Network& momentum_encoder, double m);

}  // namespace cmi::contrastive
