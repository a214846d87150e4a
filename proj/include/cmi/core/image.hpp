#pragma once

#include <cstdint>
#include <vector>

#include "cmi/core/errors.hpp"

namespace cmi {

// An H×W×C image with float pixels in [0,1], interleaved row-major (HWC).
// Channels are 1 or 3; loaders replicate grayscale to 3 channels so the rest
// of the toolkit only ever sees 3-channel inputs.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> pixels;

  Image() = default;
  Image(int h, int w, int c, float fill = 0.0f)
      : height(h), width(w), channels(c),
        pixels(static_cast<std::size_t>(h) * w * c, fill) {}

  float& at(int y, int x, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  float at(int y, int x, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  std::size_t size() const { return pixels.size(); }
};

// Throws Validation if the ImageTensor invariants do not hold.
void validate_image(const Image& img);

// Bilinear resample to out_h × out_w (stretch-to-fit, pixel-center mapping).
Image resize_bilinear(const Image& img, int out_h, int out_w);

Image horizontal_flip(const Image& img);

// Crop the rect [y0, y0+h) × [x0, x0+w) (must lie inside the image).
Image crop(const Image& img, int y0, int x0, int h, int w);

// Luma grayscale, replicated back to the input channel count.
Image to_grayscale(const Image& img);

// Side-by-side concatenation; both images must share height and channels.
Image concat_horizontal(const Image& left, const Image& right);

Image gaussian_blur(const Image& img, double sigma);

inline float clamp01(float v) { return v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v); }

// 8-bit quantization helpers (dataset files and the wire protocol are 8-bit).
std::vector<std::uint8_t> to_bytes(const Image& img);
Image from_bytes(const std::uint8_t* data, int h, int w, int c);

}  // namespace cmi
