#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cmi/core/image.hpp"

namespace cmi::nn {

// Dense NCHW batch. Vectors/matrices use h = w = 1 with c as the feature
// dimension.
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<float> v;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_),
        v(static_cast<std::size_t>(n_) * c_ * h_ * w_, 0.0f) {}

  static Tensor flat(int rows, int features) { return Tensor(rows, features, 1, 1); }

  std::size_t size() const { return v.size(); }
  std::size_t per_image() const { return static_cast<std::size_t>(c) * h * w; }
  float* image(int i) { return v.data() + static_cast<std::size_t>(i) * per_image(); }
  const float* image(int i) const {
    return v.data() + static_cast<std::size_t>(i) * per_image();
  }
  bool same_shape(const Tensor& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }
};

// Images ([0,1], HWC) to a normalized NCHW batch: (x - 0.5) / 0.5.
Tensor batch_from_images(std::span<const Image> images);
inline Tensor batch_from_images(const std::vector<Image>& images) {
  return batch_from_images(std::span<const Image>(images));
}

// Jacobian factor of the [0,1]→normalized mapping (d normalized / d pixel).
inline constexpr float kPixelScale = 2.0f;

}  // namespace cmi::nn
