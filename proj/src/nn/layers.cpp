#include "cmi/nn/layers.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "cmi/core/errors.hpp"

namespace cmi::nn {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRow = Eigen::Map<RowMat>;
using MapRowC = Eigen::Map<const RowMat>;

// Fixed stripe count for batch parallelism; reductions always run in stripe
// order so outputs do not depend on the number of worker threads.
constexpr int kStripes = 8;

struct StripeRange {
  int begin, end;
};

StripeRange stripe_range(int items, int stripe) {
  const int base = items / kStripes, rem = items % kStripes;
  const int begin = stripe * base + std::min(stripe, rem);
  return {begin, begin + base + (stripe < rem ? 1 : 0)};
}

void he_normal(std::vector<float>& w, std::size_t fan_in, Rng& rng) {
  const double std = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (float& v : w) v = static_cast<float>(rng.normal(0.0, std));
}

// im2col for one image: out is [in_c*k*k, oh*ow] row-major.
void im2col(const float* img, int c, int h, int w, int k, int stride, int pad,
            int oh, int ow, float* col) {
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const std::size_t cols = static_cast<std::size_t>(oh) * ow;
  for (int ci = 0; ci < c; ++ci)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        float* row = col + ((static_cast<std::size_t>(ci) * k + ky) * k + kx) * cols;
        for (int y = 0; y < oh; ++y) {
          const int sy = y * stride - pad + ky;
          if (sy < 0 || sy >= h) {
            std::fill(row + static_cast<std::size_t>(y) * ow,
                      row + static_cast<std::size_t>(y + 1) * ow, 0.0f);
            continue;
          }
          const float* src = img + static_cast<std::size_t>(ci) * plane +
                             static_cast<std::size_t>(sy) * w;
          for (int x = 0; x < ow; ++x) {
            const int sx = x * stride - pad + kx;
            row[static_cast<std::size_t>(y) * ow + x] =
                (sx < 0 || sx >= w) ? 0.0f : src[sx];
          }
        }
      }
}

// Scatter-add of a column gradient back to image layout.
void col2im_add(const float* col, int c, int h, int w, int k, int stride, int pad,
                int oh, int ow, float* img) {
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const std::size_t cols = static_cast<std::size_t>(oh) * ow;
  for (int ci = 0; ci < c; ++ci)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const float* row =
            col + ((static_cast<std::size_t>(ci) * k + ky) * k + kx) * cols;
        for (int y = 0; y < oh; ++y) {
          const int sy = y * stride - pad + ky;
          if (sy < 0 || sy >= h) continue;
          float* dst = img + static_cast<std::size_t>(ci) * plane +
                       static_cast<std::size_t>(sy) * w;
          for (int x = 0; x < ow; ++x) {
            const int sx = x * stride - pad + kx;
            if (sx >= 0 && sx < w) dst[sx] += row[static_cast<std::size_t>(y) * ow + x];
          }
        }
      }
}

}  // namespace

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(std::string name, int in_channels, int out_channels, int kernel,
               int stride, int pad, bool bias, Rng& rng)
    : in_c_(in_channels), out_c_(out_channels), k_(kernel), stride_(stride),
      pad_(pad),
      weight_(name + ".weight",
              static_cast<std::size_t>(out_channels) * in_channels * kernel * kernel) {
  he_normal(weight_.value, static_cast<std::size_t>(in_c_) * k_ * k_, rng);
  if (bias) bias_ = std::make_unique<ParamTensor>(name + ".bias", out_channels);
}

Tensor Conv2d::forward(const Tensor& x, bool train) {
  if (x.c != in_c_)
    raise(ErrorKind::DimensionMismatch, weight_.name + ": channel mismatch");
  const int oh = (x.h + 2 * pad_ - k_) / stride_ + 1;
  const int ow = (x.w + 2 * pad_ - k_) / stride_ + 1;
  Tensor y(x.n, out_c_, oh, ow);
  const int kk = in_c_ * k_ * k_;
  const std::size_t cols = static_cast<std::size_t>(oh) * ow;
  MapRowC wmat(weight_.value.data(), out_c_, kk);

#pragma omp parallel for schedule(static)
  for (int s = 0; s < kStripes; ++s) {
    const auto [begin, end] = stripe_range(x.n, s);
    std::vector<float> col(static_cast<std::size_t>(kk) * cols);
    for (int i = begin; i < end; ++i) {
      im2col(x.image(i), x.c, x.h, x.w, k_, stride_, pad_, oh, ow, col.data());
      MapRowC colmat(col.data(), kk, static_cast<int>(cols));
      MapRow out(y.image(i), out_c_, static_cast<int>(cols));
      out.noalias() = wmat * colmat;
      if (bias_)
        for (int co = 0; co < out_c_; ++co)
          out.row(co).array() += bias_->value[static_cast<std::size_t>(co)];
    }
  }
  x_cache_ = x;  // kept in eval mode too: PGD backpropagates to the input
  return y;
}

Tensor Conv2d::backward(const Tensor& dy) {
  const Tensor& x = x_cache_;
  const int oh = dy.h, ow = dy.w;
  const int kk = in_c_ * k_ * k_;
  const std::size_t cols = static_cast<std::size_t>(oh) * ow;
  Tensor dx(x.n, x.c, x.h, x.w);
  MapRowC wmat(weight_.value.data(), out_c_, kk);

  std::vector<std::vector<float>> dw_stripe(
      kStripes, std::vector<float>(weight_.value.size(), 0.0f));
  std::vector<std::vector<float>> db_stripe;
  if (bias_)
    db_stripe.assign(kStripes, std::vector<float>(static_cast<std::size_t>(out_c_), 0.0f));

#pragma omp parallel for schedule(static)
  for (int s = 0; s < kStripes; ++s) {
    const auto [begin, end] = stripe_range(x.n, s);
    std::vector<float> col(static_cast<std::size_t>(kk) * cols);
    std::vector<float> dcol(static_cast<std::size_t>(kk) * cols);
    MapRow dw(dw_stripe[static_cast<std::size_t>(s)].data(), out_c_, kk);
    for (int i = begin; i < end; ++i) {
      im2col(x.image(i), x.c, x.h, x.w, k_, stride_, pad_, oh, ow, col.data());
      MapRowC colmat(col.data(), kk, static_cast<int>(cols));
      MapRowC dout(dy.image(i), out_c_, static_cast<int>(cols));
      dw.noalias() += dout * colmat.transpose();
      if (bias_) {
        auto& db = db_stripe[static_cast<std::size_t>(s)];
        for (int co = 0; co < out_c_; ++co) db[static_cast<std::size_t>(co)] += dout.row(co).sum();
      }
      MapRow dcolmat(dcol.data(), kk, static_cast<int>(cols));
      dcolmat.noalias() = wmat.transpose() * dout;
      col2im_add(dcol.data(), x.c, x.h, x.w, k_, stride_, pad_, oh, ow, dx.image(i));
    }
  }

  // Stripe-major reduction keeps gradient accumulation deterministic.
  for (int s = 0; s < kStripes; ++s) {
    const auto& dw = dw_stripe[static_cast<std::size_t>(s)];
    for (std::size_t j = 0; j < weight_.grad.size(); ++j) weight_.grad[j] += dw[j];
    if (bias_)
      for (int co = 0; co < out_c_; ++co)
        bias_->grad[static_cast<std::size_t>(co)] +=
            db_stripe[static_cast<std::size_t>(s)][static_cast<std::size_t>(co)];
  }
  return dx;
}

void Conv2d::collect_params(std::vector<ParamTensor*>& out) {
  out.push_back(&weight_);
  if (bias_) out.push_back(bias_.get());
}

// ------------------------------------------------------------ BatchNorm2d

BatchNorm2d::BatchNorm2d(std::string name, int channels, double eps, double momentum)
    : c_(channels), eps_(eps), momentum_(momentum),
      gamma_(name + ".gamma", channels), beta_(name + ".beta", channels),
      running_mean_(name + ".running_mean", channels, 0.0f),
      running_var_(name + ".running_var", channels, 1.0f) {
  std::fill(gamma_.value.begin(), gamma_.value.end(), 1.0f);
}

Tensor BatchNorm2d::forward(const Tensor& x, bool train) {
  if (x.c != c_) raise(ErrorKind::DimensionMismatch, gamma_.name + ": channel mismatch");
  const std::size_t plane = static_cast<std::size_t>(x.h) * x.w;
  const double count = static_cast<double>(x.n) * plane;
  Tensor y(x.n, x.c, x.h, x.w);
  train_cache_ = train;
  inv_std_cache_.assign(static_cast<std::size_t>(c_), 0.0f);

  std::vector<float> mean(static_cast<std::size_t>(c_)), var(static_cast<std::size_t>(c_));
  if (train) {
    // Channel sums via fixed stripes.
    std::vector<std::vector<double>> sum_s(kStripes, std::vector<double>(c_, 0.0));
    std::vector<std::vector<double>> sq_s(kStripes, std::vector<double>(c_, 0.0));
#pragma omp parallel for schedule(static)
    for (int s = 0; s < kStripes; ++s) {
      const auto [begin, end] = stripe_range(x.n, s);
      auto& sum = sum_s[static_cast<std::size_t>(s)];
      auto& sq = sq_s[static_cast<std::size_t>(s)];
      for (int i = begin; i < end; ++i)
        for (int ci = 0; ci < c_; ++ci) {
          const float* p = x.image(i) + static_cast<std::size_t>(ci) * plane;
          double a = 0.0, b = 0.0;
          for (std::size_t j = 0; j < plane; ++j) {
            a += p[j];
            b += static_cast<double>(p[j]) * p[j];
          }
          sum[static_cast<std::size_t>(ci)] += a;
          sq[static_cast<std::size_t>(ci)] += b;
        }
    }
    for (int ci = 0; ci < c_; ++ci) {
      double sum = 0.0, sq = 0.0;
      for (int s = 0; s < kStripes; ++s) {
        sum += sum_s[static_cast<std::size_t>(s)][static_cast<std::size_t>(ci)];
        sq += sq_s[static_cast<std::size_t>(s)][static_cast<std::size_t>(ci)];
      }
      const double m = sum / count;
      const double v = std::max(0.0, sq / count - m * m);
      mean[static_cast<std::size_t>(ci)] = static_cast<float>(m);
      var[static_cast<std::size_t>(ci)] = static_cast<float>(v);
      // Running stats keep the unbiased variance, matching common practice.
      const double unbiased = count > 1.0 ? v * count / (count - 1.0) : v;
      running_mean_.value[static_cast<std::size_t>(ci)] = static_cast<float>(
          (1.0 - momentum_) * running_mean_.value[static_cast<std::size_t>(ci)] +
          momentum_ * m);
      running_var_.value[static_cast<std::size_t>(ci)] = static_cast<float>(
          (1.0 - momentum_) * running_var_.value[static_cast<std::size_t>(ci)] +
          momentum_ * unbiased);
    }
  } else {
    for (int ci = 0; ci < c_; ++ci) {
      mean[static_cast<std::size_t>(ci)] = running_mean_.value[static_cast<std::size_t>(ci)];
      var[static_cast<std::size_t>(ci)] = running_var_.value[static_cast<std::size_t>(ci)];
    }
  }

  for (int ci = 0; ci < c_; ++ci)
    inv_std_cache_[static_cast<std::size_t>(ci)] =
        static_cast<float>(1.0 / std::sqrt(var[static_cast<std::size_t>(ci)] + eps_));

  xhat_cache_ = Tensor(x.n, x.c, x.h, x.w);
#pragma omp parallel for schedule(static)
  for (int s = 0; s < kStripes; ++s) {
    const auto [begin, end] = stripe_range(x.n, s);
    for (int i = begin; i < end; ++i)
      for (int ci = 0; ci < c_; ++ci) {
        const float m = mean[static_cast<std::size_t>(ci)];
        const float is = inv_std_cache_[static_cast<std::size_t>(ci)];
        const float g = gamma_.value[static_cast<std::size_t>(ci)];
        const float b = beta_.value[static_cast<std::size_t>(ci)];
        const float* src = x.image(i) + static_cast<std::size_t>(ci) * plane;
        float* xh = xhat_cache_.image(i) + static_cast<std::size_t>(ci) * plane;
        float* dst = y.image(i) + static_cast<std::size_t>(ci) * plane;
        for (std::size_t j = 0; j < plane; ++j) {
          xh[j] = (src[j] - m) * is;
          dst[j] = g * xh[j] + b;
        }
      }
  }
  return y;
}

Tensor BatchNorm2d::backward(const Tensor& dy) {
  const Tensor& xh = xhat_cache_;
  const std::size_t plane = static_cast<std::size_t>(dy.h) * dy.w;
  const double count = static_cast<double>(dy.n) * plane;
  Tensor dx(dy.n, dy.c, dy.h, dy.w);

  if (!train_cache_) {
    // Eval mode (PGD uses this): the normalization constants are fixed.
#pragma omp parallel for schedule(static)
    for (int s = 0; s < kStripes; ++s) {
      const auto [begin, end] = stripe_range(dy.n, s);
      for (int i = begin; i < end; ++i)
        for (int ci = 0; ci < c_; ++ci) {
          const float scale = gamma_.value[static_cast<std::size_t>(ci)] *
                              inv_std_cache_[static_cast<std::size_t>(ci)];
          const float* src = dy.image(i) + static_cast<std::size_t>(ci) * plane;
          float* dst = dx.image(i) + static_cast<std::size_t>(ci) * plane;
          for (std::size_t j = 0; j < plane; ++j) dst[j] = src[j] * scale;
        }
    }
    return dx;
  }

  std::vector<std::vector<double>> dsum_s(kStripes, std::vector<double>(c_, 0.0));
  std::vector<std::vector<double>> dxhsum_s(kStripes, std::vector<double>(c_, 0.0));
#pragma omp parallel for schedule(static)
  for (int s = 0; s < kStripes; ++s) {
    const auto [begin, end] = stripe_range(dy.n, s);
    auto& dsum = dsum_s[static_cast<std::size_t>(s)];
    auto& dxh = dxhsum_s[static_cast<std::size_t>(s)];
    for (int i = begin; i < end; ++i)
      for (int ci = 0; ci < c_; ++ci) {
        const float* g = dy.image(i) + static_cast<std::size_t>(ci) * plane;
        const float* h = xh.image(i) + static_cast<std::size_t>(ci) * plane;
        double a = 0.0, b = 0.0;
        for (std::size_t j = 0; j < plane; ++j) {
          a += g[j];
          b += static_cast<double>(g[j]) * h[j];
        }
        dsum[static_cast<std::size_t>(ci)] += a;
        dxh[static_cast<std::size_t>(ci)] += b;
      }
  }
  std::vector<double> dbeta(static_cast<std::size_t>(c_), 0.0),
      dgamma(static_cast<std::size_t>(c_), 0.0);
  for (int s = 0; s < kStripes; ++s)
    for (int ci = 0; ci < c_; ++ci) {
      dbeta[static_cast<std::size_t>(ci)] += dsum_s[static_cast<std::size_t>(s)][static_cast<std::size_t>(ci)];
      dgamma[static_cast<std::size_t>(ci)] += dxhsum_s[static_cast<std::size_t>(s)][static_cast<std::size_t>(ci)];
    }
  for (int ci = 0; ci < c_; ++ci) {
    gamma_.grad[static_cast<std::size_t>(ci)] += static_cast<float>(dgamma[static_cast<std::size_t>(ci)]);
    beta_.grad[static_cast<std::size_t>(ci)] += static_cast<float>(dbeta[static_cast<std::size_t>(ci)]);
  }

#pragma omp parallel for schedule(static)
  for (int s = 0; s < kStripes; ++s) {
    const auto [begin, end] = stripe_range(dy.n, s);
    for (int i = begin; i < end; ++i)
      for (int ci = 0; ci < c_; ++ci) {
        const double scale = gamma_.value[static_cast<std::size_t>(ci)] *
                             inv_std_cache_[static_cast<std::size_t>(ci)];
        const double mean_dy = dbeta[static_cast<std::size_t>(ci)] / count;
        const double mean_dyxh = dgamma[static_cast<std::size_t>(ci)] / count;
        const float* g = dy.image(i) + static_cast<std::size_t>(ci) * plane;
        const float* h = xh.image(i) + static_cast<std::size_t>(ci) * plane;
        float* dst = dx.image(i) + static_cast<std::size_t>(ci) * plane;
        for (std::size_t j = 0; j < plane; ++j)
          dst[j] = static_cast<float>(scale * (g[j] - mean_dy - h[j] * mean_dyxh));
      }
  }
  return dx;
}

void BatchNorm2d::collect_params(std::vector<ParamTensor*>& out) {
  out.push_back(&gamma_);
  out.push_back(&beta_);
}

void BatchNorm2d::collect_buffers(std::vector<BufferTensor*>& out) {
  out.push_back(&running_mean_);
  out.push_back(&running_var_);
}

// ------------------------------------------------------------------ ReLU

Tensor ReLU::forward(const Tensor& x, bool) {
  Tensor y = x;
  for (float& v : y.v) v = v > 0.0f ? v : 0.0f;
  y_cache_ = y;
  return y;
}

Tensor ReLU::backward(const Tensor& dy) {
  Tensor dx = dy;
  for (std::size_t j = 0; j < dx.v.size(); ++j)
    if (y_cache_.v[j] <= 0.0f) dx.v[j] = 0.0f;
  return dx;
}

// ------------------------------------------------------------- MaxPool2d

Tensor MaxPool2d::forward(const Tensor& x, bool) {
  const int oh = x.h / k_, ow = x.w / k_;
  Tensor y(x.n, x.c, oh, ow);
  argmax_.assign(y.size(), 0);
  x_shape_ = Tensor(x.n, x.c, x.h, x.w);  // shape only
  x_shape_.v.clear();

#pragma omp parallel for schedule(static)
  for (int s = 0; s < kStripes; ++s) {
    const auto [begin, end] = stripe_range(x.n, s);
    for (int i = begin; i < end; ++i)
      for (int ci = 0; ci < x.c; ++ci) {
        const float* src = x.image(i) + static_cast<std::size_t>(ci) * x.h * x.w;
        const std::size_t base =
            (static_cast<std::size_t>(i) * x.c + ci) * static_cast<std::size_t>(oh) * ow;
        for (int y0 = 0; y0 < oh; ++y0)
          for (int x0 = 0; x0 < ow; ++x0) {
            float best = -1e30f;
            int best_idx = 0;
            for (int dy0 = 0; dy0 < k_; ++dy0)
              for (int dx0 = 0; dx0 < k_; ++dx0) {
                const int yy = y0 * k_ + dy0, xx = x0 * k_ + dx0;
                const float v = src[yy * x.w + xx];
                if (v > best) {
                  best = v;
                  best_idx = yy * x.w + xx;
                }
              }
            const std::size_t out_idx = base + static_cast<std::size_t>(y0) * ow + x0;
            y.v[out_idx] = best;
            argmax_[out_idx] = best_idx;
          }
      }
  }
  return y;
}

Tensor MaxPool2d::backward(const Tensor& dy) {
  Tensor dx(x_shape_.n, x_shape_.c, x_shape_.h, x_shape_.w);
  const std::size_t in_plane = static_cast<std::size_t>(x_shape_.h) * x_shape_.w;
  const std::size_t out_plane = static_cast<std::size_t>(dy.h) * dy.w;
#pragma omp parallel for schedule(static)
  for (int s = 0; s < kStripes; ++s) {
    const auto [begin, end] = stripe_range(dy.n, s);
    for (int i = begin; i < end; ++i)
      for (int ci = 0; ci < dy.c; ++ci) {
        const std::size_t base = (static_cast<std::size_t>(i) * dy.c + ci) * out_plane;
        float* dst = dx.image(i) + static_cast<std::size_t>(ci) * in_plane;
        for (std::size_t j = 0; j < out_plane; ++j)
          dst[argmax_[base + j]] += dy.v[base + j];
      }
  }
  return dx;
}

// --------------------------------------------------------- GlobalAvgPool

Tensor GlobalAvgPool::forward(const Tensor& x, bool) {
  n_ = x.n;
  c_ = x.c;
  h_ = x.h;
  w_ = x.w;
  Tensor y = Tensor::flat(x.n, x.c);
  const std::size_t plane = static_cast<std::size_t>(x.h) * x.w;
  for (int i = 0; i < x.n; ++i)
    for (int ci = 0; ci < x.c; ++ci) {
      const float* src = x.image(i) + static_cast<std::size_t>(ci) * plane;
      double acc = 0.0;
      for (std::size_t j = 0; j < plane; ++j) acc += src[j];
      y.v[static_cast<std::size_t>(i) * x.c + ci] =
          static_cast<float>(acc / static_cast<double>(plane));
    }
  return y;
}

Tensor GlobalAvgPool::backward(const Tensor& dy) {
  Tensor dx(n_, c_, h_, w_);
  const std::size_t plane = static_cast<std::size_t>(h_) * w_;
  const float inv = 1.0f / static_cast<float>(plane);
  for (int i = 0; i < n_; ++i)
    for (int ci = 0; ci < c_; ++ci) {
      const float g = dy.v[static_cast<std::size_t>(i) * c_ + ci] * inv;
      float* dst = dx.image(i) + static_cast<std::size_t>(ci) * plane;
      for (std::size_t j = 0; j < plane; ++j) dst[j] = g;
    }
  return dx;
}

// ---------------------------------------------------------------- Linear

Linear::Linear(std::string name, int in_features, int out_features, Rng& rng)
    : in_f_(in_features), out_f_(out_features),
      weight_(name + ".weight", static_cast<std::size_t>(out_features) * in_features),
      bias_(name + ".bias", static_cast<std::size_t>(out_features)) {
  he_normal(weight_.value, static_cast<std::size_t>(in_features), rng);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_features));
  for (float& v : bias_.value) v = static_cast<float>(rng.uniform(-bound, bound));
}

Tensor Linear::forward(const Tensor& x, bool) {
  if (static_cast<int>(x.per_image()) != in_f_)
    raise(ErrorKind::DimensionMismatch, weight_.name + ": feature mismatch");
  x_cache_ = x;
  Tensor y = Tensor::flat(x.n, out_f_);
  MapRowC xm(x.v.data(), x.n, in_f_);
  MapRowC wm(weight_.value.data(), out_f_, in_f_);
  MapRow ym(y.v.data(), x.n, out_f_);
  ym.noalias() = xm * wm.transpose();
  for (int i = 0; i < x.n; ++i)
    for (int o = 0; o < out_f_; ++o) ym(i, o) += bias_.value[static_cast<std::size_t>(o)];
  return y;
}

Tensor Linear::backward(const Tensor& dy) {
  const Tensor& x = x_cache_;
  Tensor dx(x.n, x.c, x.h, x.w);
  MapRowC dym(dy.v.data(), dy.n, out_f_);
  MapRowC xm(x.v.data(), x.n, in_f_);
  MapRowC wm(weight_.value.data(), out_f_, in_f_);
  MapRow dwm(weight_.grad.data(), out_f_, in_f_);
  dwm.noalias() += dym.transpose() * xm;
  for (int o = 0; o < out_f_; ++o)
    bias_.grad[static_cast<std::size_t>(o)] += dym.col(o).sum();
  MapRow dxm(dx.v.data(), x.n, in_f_);
  dxm.noalias() = dym * wm;
  return dx;
}

void Linear::collect_params(std::vector<ParamTensor*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

// --------------------------------------------------------- ResidualBlock

ResidualBlock::ResidualBlock(std::string name, int in_channels, int out_channels,
                             int stride, Rng& rng)
    : projected_(stride != 1 || in_channels != out_channels),
      conv1_(name + ".conv1", in_channels, out_channels, 3, stride, 1, false, rng),
      bn1_(name + ".bn1", out_channels),
      conv2_(name + ".conv2", out_channels, out_channels, 3, 1, 1, false, rng),
      bn2_(name + ".bn2", out_channels) {
  if (projected_) {
    proj_ = std::make_unique<Conv2d>(name + ".proj", in_channels, out_channels, 1,
                                     stride, 0, false, rng);
    proj_bn_ = std::make_unique<BatchNorm2d>(name + ".proj_bn", out_channels);
  }
}

Tensor ResidualBlock::forward(const Tensor& x, bool train) {
  Tensor main = bn1_.forward(conv1_.forward(x, train), train);
  main = relu1_.forward(main, train);
  main = bn2_.forward(conv2_.forward(main, train), train);
  Tensor shortcut =
      projected_ ? proj_bn_->forward(proj_->forward(x, train), train) : x;
  Tensor sum = std::move(main);
  for (std::size_t j = 0; j < sum.v.size(); ++j) sum.v[j] += shortcut.v[j];
  sum_cache_ = sum;
  for (float& v : sum.v) v = v > 0.0f ? v : 0.0f;
  return sum;
}

Tensor ResidualBlock::backward(const Tensor& dy) {
  Tensor dsum = dy;
  for (std::size_t j = 0; j < dsum.v.size(); ++j)
    if (sum_cache_.v[j] <= 0.0f) dsum.v[j] = 0.0f;

  Tensor dmain = conv2_.backward(bn2_.backward(dsum));
  dmain = relu1_.backward(dmain);
  Tensor dx = conv1_.backward(bn1_.backward(dmain));

  if (projected_) {
    Tensor dshort = proj_->backward(proj_bn_->backward(dsum));
    for (std::size_t j = 0; j < dx.v.size(); ++j) dx.v[j] += dshort.v[j];
  } else {
    for (std::size_t j = 0; j < dx.v.size(); ++j) dx.v[j] += dsum.v[j];
  }
  return dx;
}

void ResidualBlock::collect_params(std::vector<ParamTensor*>& out) {
  conv1_.collect_params(out);
  bn1_.collect_params(out);
  conv2_.collect_params(out);
  bn2_.collect_params(out);
  if (projected_) {
    proj_->collect_params(out);
    proj_bn_->collect_params(out);
  }
}

void ResidualBlock::collect_buffers(std::vector<BufferTensor*>& out) {
  bn1_.collect_buffers(out);
  bn2_.collect_buffers(out);
  if (projected_) proj_bn_->collect_buffers(out);
}

}  // namespace cmi::nn
