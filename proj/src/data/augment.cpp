#include "cmi/data/augment.hpp"

#include <algorithm>
#include <cmath>

#include "cmi/core/digest.hpp"
#include "cmi/core/errors.hpp"

namespace cmi::data {

using nlohmann::json;

const char* aug_kind_name(AugKind kind) {
  switch (kind) {
    case AugKind::RandomResizedCrop: return "random-resized-crop";
    case AugKind::RandomGrayscale: return "random-grayscale";
    case AugKind::RandomHorizontalFlip: return "random-horizontal-flip";
    case AugKind::ColorJitter: return "color-jitter";
    case AugKind::GaussianBlur: return "gaussian-blur";
  }
  return "?";
}

AugKind parse_aug_kind(const std::string& name) {
  for (AugKind kind : {AugKind::RandomResizedCrop, AugKind::RandomGrayscale,
                       AugKind::RandomHorizontalFlip, AugKind::ColorJitter,
                       AugKind::GaussianBlur})
    if (name == aug_kind_name(kind)) return kind;
  raise(ErrorKind::Validation, "unknown augmentation kind: " + name);
}

AugmentationOp AugmentationOp::random_resized_crop(double scale_min,
                                                   double scale_max) {
  AugmentationOp op;
  op.kind = AugKind::RandomResizedCrop;
  op.scale_min = scale_min;
  op.scale_max = scale_max;
  return op;
}

AugmentationOp AugmentationOp::random_grayscale(double p) {
  AugmentationOp op;
  op.kind = AugKind::RandomGrayscale;
  op.probability = p;
  return op;
}

AugmentationOp AugmentationOp::random_horizontal_flip(double p) {
  AugmentationOp op;
  op.kind = AugKind::RandomHorizontalFlip;
  op.probability = p;
  return op;
}

AugmentationOp AugmentationOp::color_jitter(double brightness, double contrast,
                                            double saturation, double hue) {
  AugmentationOp op;
  op.kind = AugKind::ColorJitter;
  op.brightness = brightness;
  op.contrast = contrast;
  op.saturation = saturation;
  op.hue = hue;
  return op;
}

AugmentationOp AugmentationOp::gaussian_blur(double p, double sigma_min,
                                             double sigma_max) {
  AugmentationOp op;
  op.kind = AugKind::GaussianBlur;
  op.probability = p;
  op.sigma_min = sigma_min;
  op.sigma_max = sigma_max;
  return op;
}

namespace {

void validate_op(const AugmentationOp& op) {
  auto check = [&](bool ok, const char* what) {
    if (!ok)
      raise(ErrorKind::Validation,
            std::string(aug_kind_name(op.kind)) + ": invalid " + what);
  };
  switch (op.kind) {
    case AugKind::RandomResizedCrop:
      check(op.scale_min > 0.0 && op.scale_min <= op.scale_max && op.scale_max <= 1.0,
            "scale range");
      check(op.aspect_min > 0.0 && op.aspect_min <= op.aspect_max, "aspect range");
      break;
    case AugKind::RandomGrayscale:
    case AugKind::RandomHorizontalFlip:
      check(op.probability >= 0.0 && op.probability <= 1.0, "probability");
      break;
    case AugKind::ColorJitter:
      check(op.brightness >= 0.0 && op.contrast >= 0.0 && op.saturation >= 0.0,
            "jitter strength");
      check(op.hue >= 0.0 && op.hue <= 0.5, "hue strength");
      break;
    case AugKind::GaussianBlur:
      check(op.probability >= 0.0 && op.probability <= 1.0, "probability");
      check(op.sigma_min > 0.0 && op.sigma_min <= op.sigma_max, "sigma range");
      break;
  }
}

Image apply_random_resized_crop(const Image& img, const AugmentationOp& op,
                                Rng& rng) {
  const double area = static_cast<double>(img.height) * img.width;
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double target = area * rng.uniform(op.scale_min, op.scale_max);
    const double log_ratio =
        rng.uniform(std::log(op.aspect_min), std::log(op.aspect_max));
    const double ratio = std::exp(log_ratio);
    const int w = static_cast<int>(std::lround(std::sqrt(target * ratio)));
    const int h = static_cast<int>(std::lround(std::sqrt(target / ratio)));
    if (w < 1 || h < 1 || w > img.width || h > img.height) continue;
    const int y0 = static_cast<int>(rng.uniform_int(0, img.height - h));
    const int x0 = static_cast<int>(rng.uniform_int(0, img.width - w));
    return resize_bilinear(crop(img, y0, x0, h, w), img.height, img.width);
  }
  // Fallback: centered crop of the shorter side.
  const int side = std::min(img.height, img.width);
  const int y0 = (img.height - side) / 2;
  const int x0 = (img.width - side) / 2;
  return resize_bilinear(crop(img, y0, x0, side, side), img.height, img.width);
}

void rgb_to_hsv(float r, float g, float b, float& h, float& s, float& v) {
  const float mx = std::max({r, g, b});
  const float mn = std::min({r, g, b});
  v = mx;
  const float d = mx - mn;
  s = mx == 0.0f ? 0.0f : d / mx;
  if (d == 0.0f) {
    h = 0.0f;
  } else if (mx == r) {
    h = std::fmod((g - b) / d, 6.0f);
  } else if (mx == g) {
    h = (b - r) / d + 2.0f;
  } else {
    h = (r - g) / d + 4.0f;
  }
  h /= 6.0f;
  if (h < 0.0f) h += 1.0f;
}

void hsv_to_rgb(float h, float s, float v, float& r, float& g, float& b) {
  const float i = std::floor(h * 6.0f);
  const float f = h * 6.0f - i;
  const float p = v * (1.0f - s);
  const float q = v * (1.0f - f * s);
  const float t = v * (1.0f - (1.0f - f) * s);
  switch (static_cast<int>(i) % 6) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
}

Image apply_color_jitter(const Image& img, const AugmentationOp& op, Rng& rng) {
  // Factor draws happen unconditionally and in a fixed order; application
  // order is brightness, contrast, saturation, hue.
  const double fb = rng.uniform(std::max(0.0, 1.0 - op.brightness), 1.0 + op.brightness);
  const double fc = rng.uniform(std::max(0.0, 1.0 - op.contrast), 1.0 + op.contrast);
  const double fs = rng.uniform(std::max(0.0, 1.0 - op.saturation), 1.0 + op.saturation);
  const double fh = rng.uniform(-op.hue, op.hue);

  Image out = img;
  for (float& v : out.pixels) v = clamp01(static_cast<float>(v * fb));

  double mean = 0.0;
  if (out.channels == 3) {
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x)
        mean += 0.299 * out.at(y, x, 0) + 0.587 * out.at(y, x, 1) +
                0.114 * out.at(y, x, 2);
  } else {
    for (float v : out.pixels) mean += v;
  }
  mean /= static_cast<double>(out.height) * out.width;
  for (float& v : out.pixels)
    v = clamp01(static_cast<float>((v - mean) * fc + mean));

  if (out.channels == 3) {
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x) {
        const float gray = 0.299f * out.at(y, x, 0) + 0.587f * out.at(y, x, 1) +
                           0.114f * out.at(y, x, 2);
        for (int c = 0; c < 3; ++c)
          out.at(y, x, c) =
              clamp01(static_cast<float>((out.at(y, x, c) - gray) * fs + gray));
      }
    if (fh != 0.0) {
      for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x) {
          float h, s, v;
          rgb_to_hsv(out.at(y, x, 0), out.at(y, x, 1), out.at(y, x, 2), h, s, v);
          h = std::fmod(h + static_cast<float>(fh) + 1.0f, 1.0f);
          float r, g, b;
          hsv_to_rgb(h, s, v, r, g, b);
          out.at(y, x, 0) = clamp01(r);
          out.at(y, x, 1) = clamp01(g);
          out.at(y, x, 2) = clamp01(b);
        }
    }
  }
  return out;
}

}  // namespace

AugmentationPipeline::AugmentationPipeline(std::vector<AugmentationOp> ops)
    : ops_(std::move(ops)) {
  for (const auto& op : ops_) validate_op(op);
}

json AugmentationPipeline::to_json() const {
  json arr = json::array();
  for (const auto& op : ops_) {
    json j;
    j["kind"] = aug_kind_name(op.kind);
    switch (op.kind) {
      case AugKind::RandomResizedCrop:
        j["scale"] = {op.scale_min, op.scale_max};
        j["aspect"] = {op.aspect_min, op.aspect_max};
        break;
      case AugKind::RandomGrayscale:
      case AugKind::RandomHorizontalFlip:
        j["p"] = op.probability;
        break;
      case AugKind::ColorJitter:
        j["brightness"] = op.brightness;
        j["contrast"] = op.contrast;
        j["saturation"] = op.saturation;
        j["hue"] = op.hue;
        break;
      case AugKind::GaussianBlur:
        j["p"] = op.probability;
        j["sigma"] = {op.sigma_min, op.sigma_max};
        break;
    }
    arr.push_back(j);
  }
  return arr;
}

AugmentationPipeline AugmentationPipeline::from_json(const json& arr) {
  std::vector<AugmentationOp> ops;
  for (const auto& j : arr) {
    AugmentationOp op;
    op.kind = parse_aug_kind(j.at("kind").get<std::string>());
    switch (op.kind) {
      case AugKind::RandomResizedCrop:
        if (j.contains("scale")) {
          op.scale_min = j["scale"][0];
          op.scale_max = j["scale"][1];
        }
        if (j.contains("aspect")) {
          op.aspect_min = j["aspect"][0];
          op.aspect_max = j["aspect"][1];
        }
        break;
      case AugKind::RandomGrayscale:
      case AugKind::RandomHorizontalFlip:
        if (j.contains("p")) op.probability = j["p"];
        break;
      case AugKind::ColorJitter:
        if (j.contains("brightness")) op.brightness = j["brightness"];
        if (j.contains("contrast")) op.contrast = j["contrast"];
        if (j.contains("saturation")) op.saturation = j["saturation"];
        if (j.contains("hue")) op.hue = j["hue"];
        break;
      case AugKind::GaussianBlur:
        if (j.contains("p")) op.probability = j["p"];
        if (j.contains("sigma")) {
          op.sigma_min = j["sigma"][0];
          op.sigma_max = j["sigma"][1];
        }
        break;
    }
    ops.push_back(op);
  }
  return AugmentationPipeline(std::move(ops));
}

std::string AugmentationPipeline::digest() const { return digest_hex(to_json().dump()); }

AugmentationPipeline AugmentationPipeline::standard() {
  return AugmentationPipeline({
      AugmentationOp::random_resized_crop(0.2, 1.0),
      AugmentationOp::random_grayscale(0.2),
      AugmentationOp::color_jitter(0.4, 0.4, 0.4, 0.1),
      AugmentationOp::random_horizontal_flip(0.5),
  });
}

AugmentationPipeline AugmentationPipeline::crop_only() {
  return AugmentationPipeline({AugmentationOp::random_resized_crop(0.2, 1.0)});
}

Image augment(const Image& img, const AugmentationPipeline& pipeline, Rng& rng) {
  Image out = img;
  for (const auto& op : pipeline.ops()) {
    switch (op.kind) {
      case AugKind::RandomResizedCrop:
        out = apply_random_resized_crop(out, op, rng);
        break;
      case AugKind::RandomGrayscale:
        if (rng.bernoulli(op.probability)) out = to_grayscale(out);
        break;
      case AugKind::RandomHorizontalFlip:
        if (rng.bernoulli(op.probability)) out = horizontal_flip(out);
        break;
      case AugKind::ColorJitter:
        out = apply_color_jitter(out, op, rng);
        break;
      case AugKind::GaussianBlur:
        if (rng.bernoulli(op.probability))
          out = gaussian_blur(out, rng.uniform(op.sigma_min, op.sigma_max));
        break;
    }
  }
  return out;
}

}  // namespace cmi::data
