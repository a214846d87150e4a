#include "cmi/nn/tensor.hpp"

#include "cmi/core/errors.hpp"

namespace cmi::nn {

Tensor batch_from_images(std::span<const Image> images) {
  if (images.empty()) return Tensor();
  const Image& first = images[0];
  Tensor out(static_cast<int>(images.size()), 3, first.height, first.width);
  for (std::size_t i = 0; i < images.size(); ++i) {
    const Image& img = images[i];
    if (img.height != first.height || img.width != first.width)
      raise(ErrorKind::DimensionMismatch, "batch images must share dimensions");
    float* dst = out.image(static_cast<int>(i));
    const std::size_t plane = static_cast<std::size_t>(img.height) * img.width;
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        const std::size_t px = static_cast<std::size_t>(y) * img.width + x;
        if (img.channels == 3) {
          dst[0 * plane + px] = (img.at(y, x, 0) - 0.5f) * kPixelScale;
          dst[1 * plane + px] = (img.at(y, x, 1) - 0.5f) * kPixelScale;
          dst[2 * plane + px] = (img.at(y, x, 2) - 0.5f) * kPixelScale;
        } else {
          const float v = (img.at(y, x, 0) - 0.5f) * kPixelScale;
          dst[0 * plane + px] = v;
          dst[1 * plane + px] = v;
          dst[2 * plane + px] = v;
        }
      }
  }
  return out;
}

}  // namespace cmi::nn
