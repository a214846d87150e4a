#include "cmi/contrastive/loss.hpp"

#include <cmath>

#include "cmi/core/errors.hpp"

namespace cmi::contrastive {

namespace {

double norm_of(std::span<const float> v) {
  double acc = 0.0;
  for (float x : v) acc += static_cast<double>(x) * x;
  return std::sqrt(acc);
}

}  // namespace

double moco_loss(std::span<const float> query, std::span<const float> key,
                 const std::vector<std::vector<float>>& queue, double tau,
                 std::span<float> grad_query) {
  if (tau <= 0.0) raise(ErrorKind::Validation, "temperature must be positive");
  const std::size_t d = query.size();
  if (key.size() != d)
    raise(ErrorKind::DimensionMismatch, "query/key dimension mismatch");
  const double qn = norm_of(query);
  if (qn == 0.0) raise(ErrorKind::ZeroNormVector, "query has zero norm");
  if (norm_of(key) == 0.0) raise(ErrorKind::ZeroNormVector, "key has zero norm");

  // Normalized copies; cosine similarity reduces to dot products.
  std::vector<double> u(d);
  for (std::size_t i = 0; i < d; ++i) u[i] = query[i] / qn;

  const std::size_t terms = 1 + queue.size();
  std::vector<std::vector<double>> vhat(terms, std::vector<double>(d));
  {
    const double kn = norm_of(key);
    for (std::size_t i = 0; i < d; ++i) vhat[0][i] = key[i] / kn;
  }
  for (std::size_t j = 0; j < queue.size(); ++j) {
    if (queue[j].size() != d)
      raise(ErrorKind::DimensionMismatch, "queue entry dimension mismatch");
    const double zn = norm_of(queue[j]);
    if (zn == 0.0) raise(ErrorKind::ZeroNormVector, "queue entry has zero norm");
    for (std::size_t i = 0; i < d; ++i) vhat[j + 1][i] = queue[j][i] / zn;
  }

  std::vector<double> logits(terms);
  for (std::size_t t = 0; t < terms; ++t) {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) s += u[i] * vhat[t][i];
    logits[t] = s / tau;
  }
  double mx = logits[0];
  for (double l : logits) mx = std::max(mx, l);
  double denom = 0.0;
  for (double l : logits) denom += std::exp(l - mx);
  const double log_denom = std::log(denom) + mx;
  const double loss = log_denom - logits[0];

  if (!grad_query.empty()) {
    if (grad_query.size() != d)
      raise(ErrorKind::DimensionMismatch, "grad buffer dimension mismatch");
    // dloss/dlogits = softmax - onehot(positive); chain through u = q/|q|.
    std::vector<double> du(d, 0.0);
    for (std::size_t t = 0; t < terms; ++t) {
      const double w =
          (std::exp(logits[t] - log_denom) - (t == 0 ? 1.0 : 0.0)) / tau;
      for (std::size_t i = 0; i < d; ++i) du[i] += w * vhat[t][i];
    }
    double proj = 0.0;
    for (std::size_t i = 0; i < d; ++i) proj += du[i] * u[i];
    for (std::size_t i = 0; i < d; ++i)
      grad_query[i] = static_cast<float>((du[i] - proj * u[i]) / qn);
  }
  return loss;
}

double simclr_loss(const nn::Tensor& features, nn::Network& projection, double tau,
                   nn::Tensor* grad_features) {
  if (tau <= 0.0) raise(ErrorKind::Validation, "temperature must be positive");
  const int count = features.n;
  if (count < 2 || count % 2 != 0)
    raise(ErrorKind::Validation, "simclr needs an even number (>=2) of views");

  nn::Tensor z = projection.forward(features, true);
  const int p = static_cast<int>(z.per_image());

  auto at = [p](std::vector<double>& flat, int i, int f) -> double& {
    return flat[static_cast<std::size_t>(i) * p + f];
  };

  std::vector<double> u(static_cast<std::size_t>(count) * p);
  std::vector<double> norms(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const float* row = z.image(i);
    double acc = 0.0;
    for (int f = 0; f < p; ++f) acc += static_cast<double>(row[f]) * row[f];
    const double n = std::sqrt(acc);
    if (n == 0.0) raise(ErrorKind::ZeroNormVector, "projected view has zero norm");
    norms[static_cast<std::size_t>(i)] = n;
    for (int f = 0; f < p; ++f) at(u, i, f) = row[f] / n;
  }

  std::vector<double> s(static_cast<std::size_t>(count) * count, 0.0);
  for (int i = 0; i < count; ++i)
    for (int j = i + 1; j < count; ++j) {
      double acc = 0.0;
      for (int f = 0; f < p; ++f) acc += at(u, i, f) * at(u, j, f);
      s[static_cast<std::size_t>(i) * count + j] = acc / tau;
      s[static_cast<std::size_t>(j) * count + i] = acc / tau;
    }

  const double inv_pairs = 1.0 / static_cast<double>(count);
  double loss = 0.0;
  std::vector<double> du(static_cast<std::size_t>(count) * p, 0.0);
  for (int i = 0; i < count; ++i) {
    const int pair = i ^ 1;  // views are interleaved: (2t, 2t+1)
    double mx = -1e300;
    for (int k = 0; k < count; ++k)
      if (k != i) mx = std::max(mx, s[static_cast<std::size_t>(i) * count + k]);
    double denom = 0.0;
    for (int k = 0; k < count; ++k)
      if (k != i) denom += std::exp(s[static_cast<std::size_t>(i) * count + k] - mx);
    const double log_denom = std::log(denom) + mx;
    loss += log_denom - s[static_cast<std::size_t>(i) * count + pair];

    if (grad_features) {
      for (int k = 0; k < count; ++k) {
        if (k == i) continue;
        const double soft = std::exp(s[static_cast<std::size_t>(i) * count + k] - log_denom);
        const double w = (soft - (k == pair ? 1.0 : 0.0)) * inv_pairs / tau;
        for (int f = 0; f < p; ++f) {
          at(du, i, f) += w * at(u, k, f);
          at(du, k, f) += w * at(u, i, f);
        }
      }
    }
  }
  loss *= inv_pairs;

  if (grad_features) {
    // Chain through row normalization, then the projection head.
    nn::Tensor dz(z.n, z.c, z.h, z.w);
    for (int i = 0; i < count; ++i) {
      double proj = 0.0;
      for (int f = 0; f < p; ++f) proj += at(du, i, f) * at(u, i, f);
      float* g = dz.image(i);
      for (int f = 0; f < p; ++f)
        g[f] = static_cast<float>((at(du, i, f) - proj * at(u, i, f)) /
                                  norms[static_cast<std::size_t>(i)]);
    }
    *grad_features = projection.backward(dz);
  }
  return loss;
}

void KeyQueue::push(const std::vector<std::vector<float>>& keys) {
  if (keys.size() > capacity_)
    raise(ErrorKind::Validation, "key batch exceeds queue capacity");
  for (const auto& k : keys) {
    if (static_cast<int>(k.size()) != dim_)
      raise(ErrorKind::DimensionMismatch, "key dimension mismatch");
    entries_.push_back(k);
  }
  if (entries_.size() > capacity_)
    entries_.erase(entries_.begin(),
                   entries_.begin() +
                       static_cast<std::ptrdiff_t>(entries_.size() - capacity_));
}

void momentum_update(nn::Network& encoder, nn::Network& momentum_encoder, double m) {
  if (m < 0.0 || m > 1.0)
    raise(ErrorKind::Validation, "momentum coefficient must lie in [0,1]");
  auto src = encoder.params();
  auto dst = momentum_encoder.params();
  if (src.size() != dst.size())
    raise(ErrorKind::ArchitectureMismatch, "parameter list size differs");
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i]->value.size() != dst[i]->value.size())
      raise(ErrorKind::ArchitectureMismatch,
            "parameter shape differs at " + src[i]->name);
    for (std::size_t j = 0; j < src[i]->value.size(); ++j)
      dst[i]->value[j] = static_cast<float>(m * dst[i]->value[j] +
                                            (1.0 - m) * src[i]->value[j]);
  }
}

}  // namespace cmi::contrastive
