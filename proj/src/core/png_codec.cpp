#include <zlib.h>

#include <cstring>

#include "cmi/core/codecs.hpp"

namespace cmi {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) |
         (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) | p[3];
}

void write_chunk(std::vector<std::uint8_t>& out, const char* type,
                 const std::vector<std::uint8_t>& payload) {
  put_u32(out, static_cast<std::uint32_t>(payload.size()));
  const std::size_t crc_start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), payload.begin(), payload.end());
  const uLong crc =
      crc32(0, out.data() + crc_start, static_cast<uInt>(out.size() - crc_start));
  put_u32(out, static_cast<std::uint32_t>(crc));
}

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const Image& img) {
  if (img.channels != 1 && img.channels != 3)
    raise(ErrorKind::Validation, "png encoder expects 1 or 3 channels");
  const std::vector<std::uint8_t> raw = to_bytes(img);
  const std::size_t stride = static_cast<std::size_t>(img.width) * img.channels;

  // Filter 0 (None) on every scanline.
  std::vector<std::uint8_t> scanlines;
  scanlines.reserve((stride + 1) * static_cast<std::size_t>(img.height));
  for (int y = 0; y < img.height; ++y) {
    scanlines.push_back(0);
    scanlines.insert(scanlines.end(), raw.begin() + y * stride,
                     raw.begin() + (y + 1) * stride);
  }

  uLongf bound = compressBound(static_cast<uLong>(scanlines.size()));
  std::vector<std::uint8_t> compressed(bound);
  if (compress2(compressed.data(), &bound, scanlines.data(),
                static_cast<uLong>(scanlines.size()), 6) != Z_OK)
    raise(ErrorKind::Io, "png deflate failed");
  compressed.resize(bound);

  std::vector<std::uint8_t> out = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  std::vector<std::uint8_t> ihdr;
  put_u32(ihdr, static_cast<std::uint32_t>(img.width));
  put_u32(ihdr, static_cast<std::uint32_t>(img.height));
  ihdr.push_back(8);                                   // bit depth
  ihdr.push_back(img.channels == 3 ? 2 : 0);           // color type
  ihdr.push_back(0);                                   // compression
  ihdr.push_back(0);                                   // filter
  ihdr.push_back(0);                                   // no interlace
  write_chunk(out, "IHDR", ihdr);
  write_chunk(out, "IDAT", compressed);
  write_chunk(out, "IEND", {});
  return out;
}

Image decode_png(const std::uint8_t* data, std::size_t size) {
  static const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  if (size < 8 || std::memcmp(data, sig, 8) != 0)
    raise(ErrorKind::Validation, "not a png file");

  std::size_t pos = 8;
  int width = 0, height = 0, color_type = -1, bit_depth = 0;
  std::vector<std::uint8_t> idat;
  while (pos + 8 <= size) {
    const std::uint32_t len = get_u32(data + pos);
    if (pos + 12 + len > size)
      raise(ErrorKind::Validation, "truncated png chunk");
    const char* type = reinterpret_cast<const char*>(data + pos + 4);
    const std::uint8_t* payload = data + pos + 8;
    if (std::memcmp(type, "IHDR", 4) == 0) {
      width = static_cast<int>(get_u32(payload));
      height = static_cast<int>(get_u32(payload + 4));
      bit_depth = payload[8];
      color_type = payload[9];
      if (payload[12] != 0)
        raise(ErrorKind::Validation, "interlaced png not supported");
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), payload, payload + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      break;
    }
    pos += 12 + len;
  }
  if (width <= 0 || height <= 0 || bit_depth != 8)
    raise(ErrorKind::Validation, "unsupported png header");
  int src_channels;
  switch (color_type) {
    case 0: src_channels = 1; break;
    case 2: src_channels = 3; break;
    case 6: src_channels = 4; break;
    default:
      raise(ErrorKind::Validation, "unsupported png color type");
  }

  const std::size_t stride = static_cast<std::size_t>(width) * src_channels;
  std::vector<std::uint8_t> decomp((stride + 1) * static_cast<std::size_t>(height));
  uLongf out_len = static_cast<uLongf>(decomp.size());
  if (uncompress(decomp.data(), &out_len, idat.data(),
                 static_cast<uLong>(idat.size())) != Z_OK ||
      out_len != decomp.size())
    raise(ErrorKind::Validation, "png inflate failed");

  // Undo per-scanline filters.
  std::vector<std::uint8_t> raw(stride * static_cast<std::size_t>(height));
  const int bpp = src_channels;
  for (int y = 0; y < height; ++y) {
    const std::uint8_t filter = decomp[(stride + 1) * y];
    const std::uint8_t* src = decomp.data() + (stride + 1) * y + 1;
    std::uint8_t* dst = raw.data() + stride * y;
    const std::uint8_t* prev = y > 0 ? raw.data() + stride * (y - 1) : nullptr;
    for (std::size_t x = 0; x < stride; ++x) {
      const int a = x >= static_cast<std::size_t>(bpp) ? dst[x - bpp] : 0;
      const int b = prev ? prev[x] : 0;
      const int c = (prev && x >= static_cast<std::size_t>(bpp)) ? prev[x - bpp] : 0;
      int v = src[x];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: v += paeth(a, b, c); break;
        default:
          raise(ErrorKind::Validation, "unknown png filter");
      }
      dst[x] = static_cast<std::uint8_t>(v & 0xff);
    }
  }

  // Drop alpha, replicate grayscale to 3 channels.
  Image out(height, width, 3);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const std::uint8_t* px = raw.data() + stride * y + static_cast<std::size_t>(x) * src_channels;
      float r, g, b;
      if (src_channels == 1) {
        r = g = b = px[0] / 255.0f;
      } else {
        r = px[0] / 255.0f;
        g = px[1] / 255.0f;
        b = px[2] / 255.0f;
      }
      out.at(y, x, 0) = r;
      out.at(y, x, 1) = g;
      out.at(y, x, 2) = b;
    }
  return out;
}

std::string base64_encode(const std::uint8_t* data, std::size_t size) {
  static const char* table =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((size + 2) / 3 * 4);
  for (std::size_t i = 0; i < size; i += 3) {
    std::uint32_t v = static_cast<std::uint32_t>(data[i]) << 16;
    if (i + 1 < size) v |= static_cast<std::uint32_t>(data[i + 1]) << 8;
    if (i + 2 < size) v |= data[i + 2];
    out.push_back(table[(v >> 18) & 0x3f]);
    out.push_back(table[(v >> 12) & 0x3f]);
    out.push_back(i + 1 < size ? table[(v >> 6) & 0x3f] : '=');
    out.push_back(i + 2 < size ? table[v & 0x3f] : '=');
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
  auto value = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  std::vector<std::uint8_t> out;
  std::uint32_t buf = 0;
  int bits = 0;
  for (char c : text) {
    if (c == '=' || c == '\n' || c == '\r') continue;
    const int v = value(c);
    if (v < 0) raise(ErrorKind::Validation, "invalid base64 input");
    buf = (buf << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<std::uint8_t>((buf >> bits) & 0xff));
    }
  }
  return out;
}

}  // namespace cmi
