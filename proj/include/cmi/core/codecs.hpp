#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cmi/core/image.hpp"

namespace cmi {

// Minimal PNG support: 8-bit grayscale/RGB/RGBA, non-interlaced. This covers
// everything the toolkit itself writes plus typical dataset files; anything
// else is rejected with a Validation error.
std::vector<std::uint8_t> encode_png(const Image& img);
Image decode_png(const std::uint8_t* data, std::size_t size);

// Baseline JPEG via libjpeg (quality 95 on encode).
std::vector<std::uint8_t> encode_jpeg(const Image& img, int quality = 95);
Image decode_jpeg(const std::uint8_t* data, std::size_t size);

std::string base64_encode(const std::uint8_t* data, std::size_t size);
std::vector<std::uint8_t> base64_decode(const std::string& text);

}  // namespace cmi
