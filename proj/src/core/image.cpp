#include "cmi/core/image.hpp"

#include <algorithm>
#include <cmath>

namespace cmi {

void validate_image(const Image& img) {
  if (img.height <= 0 || img.width <= 0)
    raise(ErrorKind::Validation, "image has non-positive dimensions");
  if (img.channels != 1 && img.channels != 3)
    raise(ErrorKind::Validation, "image channel count must be 1 or 3");
  if (img.pixels.size() !=
      static_cast<std::size_t>(img.height) * img.width * img.channels)
    raise(ErrorKind::Validation, "pixel buffer size does not match dimensions");
  for (float v : img.pixels)
    if (!(v >= 0.0f && v <= 1.0f))
      raise(ErrorKind::Validation, "pixel value outside [0,1]");
}

Image resize_bilinear(const Image& img, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0)
    raise(ErrorKind::Validation, "resize target must be positive");
  if (out_h == img.height && out_w == img.width) return img;
  Image out(out_h, out_w, img.channels);
  const double sy = static_cast<double>(img.height) / out_h;
  const double sx = static_cast<double>(img.width) / out_w;
  for (int y = 0; y < out_h; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    fy = std::max(0.0, std::min(fy, static_cast<double>(img.height - 1)));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const float wy = static_cast<float>(fy - y0);
    for (int x = 0; x < out_w; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      fx = std::max(0.0, std::min(fx, static_cast<double>(img.width - 1)));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, img.width - 1);
      const float wx = static_cast<float>(fx - x0);
      for (int c = 0; c < img.channels; ++c) {
        const float top = img.at(y0, x0, c) * (1.0f - wx) + img.at(y0, x1, c) * wx;
        const float bot = img.at(y1, x0, c) * (1.0f - wx) + img.at(y1, x1, c) * wx;
        out.at(y, x, c) = clamp01(top * (1.0f - wy) + bot * wy);
      }
    }
  }
  return out;
}

Image horizontal_flip(const Image& img) {
  Image out(img.height, img.width, img.channels);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c)
        out.at(y, x, c) = img.at(y, img.width - 1 - x, c);
  return out;
}

Image crop(const Image& img, int y0, int x0, int h, int w) {
  if (y0 < 0 || x0 < 0 || h <= 0 || w <= 0 || y0 + h > img.height ||
      x0 + w > img.width)
    raise(ErrorKind::Validation, "crop rectangle outside image bounds");
  Image out(h, w, img.channels);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < img.channels; ++c)
        out.at(y, x, c) = img.at(y0 + y, x0 + x, c);
  return out;
}

Image to_grayscale(const Image& img) {
  Image out(img.height, img.width, img.channels);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      float luma;
      if (img.channels == 3) {
        luma = 0.299f * img.at(y, x, 0) + 0.587f * img.at(y, x, 1) +
               0.114f * img.at(y, x, 2);
      } else {
        luma = img.at(y, x, 0);
      }
      for (int c = 0; c < img.channels; ++c) out.at(y, x, c) = clamp01(luma);
    }
  return out;
}

Image concat_horizontal(const Image& left, const Image& right) {
  if (left.height != right.height || left.channels != right.channels)
    raise(ErrorKind::DimensionMismatch,
          "concat requires matching height and channels");
  Image out(left.height, left.width + right.width, left.channels);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < left.width; ++x)
      for (int c = 0; c < out.channels; ++c) out.at(y, x, c) = left.at(y, x, c);
    for (int x = 0; x < right.width; ++x)
      for (int c = 0; c < out.channels; ++c)
        out.at(y, left.width + x, c) = right.at(y, x, c);
  }
  return out;
}

Image gaussian_blur(const Image& img, double sigma) {
  if (sigma <= 0.0) return img;
  const int radius = std::max(1, static_cast<int>(std::ceil(2.0 * sigma)));
  std::vector<float> kernel(static_cast<std::size_t>(2 * radius + 1));
  float sum = 0.0f;
  for (int i = -radius; i <= radius; ++i) {
    const float v = static_cast<float>(std::exp(-0.5 * (i * i) / (sigma * sigma)));
    kernel[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (float& v : kernel) v /= sum;

  // Separable passes with edge clamping.
  Image tmp(img.height, img.width, img.channels);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        float acc = 0.0f;
        for (int i = -radius; i <= radius; ++i) {
          const int xi = std::clamp(x + i, 0, img.width - 1);
          acc += kernel[static_cast<std::size_t>(i + radius)] * img.at(y, xi, c);
        }
        tmp.at(y, x, c) = acc;
      }
  Image out(img.height, img.width, img.channels);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        float acc = 0.0f;
        for (int i = -radius; i <= radius; ++i) {
          const int yi = std::clamp(y + i, 0, img.height - 1);
          acc += kernel[static_cast<std::size_t>(i + radius)] * tmp.at(yi, x, c);
        }
        out.at(y, x, c) = clamp01(acc);
      }
  return out;
}

std::vector<std::uint8_t> to_bytes(const Image& img) {
  std::vector<std::uint8_t> out(img.pixels.size());
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    out[i] = static_cast<std::uint8_t>(
        std::lround(clamp01(img.pixels[i]) * 255.0f));
  return out;
}

Image from_bytes(const std::uint8_t* data, int h, int w, int c) {
  Image out(h, w, c);
  const std::size_t total = out.pixels.size();
  for (std::size_t i = 0; i < total; ++i)
    out.pixels[i] = static_cast<float>(data[i]) / 255.0f;
  return out;
}

}  // namespace cmi
