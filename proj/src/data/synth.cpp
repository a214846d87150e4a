#include "cmi/data/synth.hpp"

#include <cmath>
#include <fstream>

#include "cmi/core/codecs.hpp"
#include "cmi/core/errors.hpp"
#include "cmi/core/rng.hpp"

namespace cmi::data {

namespace fs = std::filesystem;

namespace {

struct Color {
  float r, g, b;
};

Color hsv(float h, float s, float v) {
  h = std::fmod(h + 10.0f, 1.0f) * 6.0f;
  const int i = static_cast<int>(h);
  const float f = h - i;
  const float p = v * (1 - s), q = v * (1 - f * s), t = v * (1 - (1 - f) * s);
  switch (i % 6) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

void fill_gradient(Image& img, const Color& a, const Color& b, double angle) {
  const float ca = static_cast<float>(std::cos(angle));
  const float sa = static_cast<float>(std::sin(angle));
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      float t = (ca * x / img.width + sa * y / img.height + 1.0f) * 0.5f;
      t = std::clamp(t, 0.0f, 1.0f);
      img.at(y, x, 0) = clamp01(a.r + (b.r - a.r) * t);
      img.at(y, x, 1) = clamp01(a.g + (b.g - a.g) * t);
      img.at(y, x, 2) = clamp01(a.b + (b.b - a.b) * t);
    }
}

void draw_shape(Image& img, int kind, const Color& col, Rng& rng) {
  const int h = img.height, w = img.width;
  const int cx = static_cast<int>(rng.uniform_int(w / 6, w - 1 - w / 6));
  const int cy = static_cast<int>(rng.uniform_int(h / 6, h - 1 - h / 6));
  const int size = static_cast<int>(rng.uniform_int(h / 6, h / 3));
  const float alpha = static_cast<float>(rng.uniform(0.75, 1.0));

  auto blend = [&](int y, int x) {
    if (y < 0 || y >= h || x < 0 || x >= w) return;
    img.at(y, x, 0) = clamp01(img.at(y, x, 0) * (1 - alpha) + col.r * alpha);
    img.at(y, x, 1) = clamp01(img.at(y, x, 1) * (1 - alpha) + col.g * alpha);
    img.at(y, x, 2) = clamp01(img.at(y, x, 2) * (1 - alpha) + col.b * alpha);
  };

  switch (kind % 5) {
    case 0:  // disc
      for (int y = cy - size; y <= cy + size; ++y)
        for (int x = cx - size; x <= cx + size; ++x)
          if ((y - cy) * (y - cy) + (x - cx) * (x - cx) <= size * size) blend(y, x);
      break;
    case 1:  // rectangle
      for (int y = cy - size; y <= cy + size; ++y)
        for (int x = cx - size * 2 / 3; x <= cx + size * 2 / 3; ++x) blend(y, x);
      break;
    case 2:  // ring
      for (int y = cy - size; y <= cy + size; ++y)
        for (int x = cx - size; x <= cx + size; ++x) {
          const int d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
          if (d2 <= size * size && d2 >= size * size / 4) blend(y, x);
        }
      break;
    case 3:  // diagonal stripes
      for (int y = cy - size; y <= cy + size; ++y)
        for (int x = cx - size; x <= cx + size; ++x)
          if (((x + y) / 3) % 2 == 0) blend(y, x);
      break;
    default:  // triangle
      for (int dy = 0; dy <= 2 * size; ++dy) {
        const int half = dy / 2;
        for (int x = cx - half; x <= cx + half; ++x) blend(cy - size + dy, x);
      }
      break;
  }
}

Image geometric_image(int cls, int classes, int h, int w, Rng& rng) {
  Image img(h, w, 3);
  const float class_hue =
      static_cast<float>(cls) / static_cast<float>(classes) +
      static_cast<float>(rng.uniform(-0.03, 0.03));

  const Color bg_a = hsv(static_cast<float>(rng.uniform(0.0, 1.0)),
                         static_cast<float>(rng.uniform(0.05, 0.25)),
                         static_cast<float>(rng.uniform(0.25, 0.9)));
  const Color bg_b = hsv(static_cast<float>(rng.uniform(0.0, 1.0)),
                         static_cast<float>(rng.uniform(0.05, 0.25)),
                         static_cast<float>(rng.uniform(0.25, 0.9)));
  fill_gradient(img, bg_a, bg_b, rng.uniform(0.0, 2.0 * M_PI));

  // Distractors carry no class information.
  const int distractors = static_cast<int>(rng.uniform_int(2, 4));
  for (int i = 0; i < distractors; ++i) {
    const Color col = hsv(static_cast<float>(rng.uniform(0.0, 1.0)),
                          static_cast<float>(rng.uniform(0.3, 0.9)),
                          static_cast<float>(rng.uniform(0.3, 1.0)));
    draw_shape(img, static_cast<int>(rng.uniform_int(0, 4)), col, rng);
  }

  // The class-characteristic shape: hue and shape family track the label.
  const Color class_col = hsv(class_hue, static_cast<float>(rng.uniform(0.7, 1.0)),
                              static_cast<float>(rng.uniform(0.7, 1.0)));
  draw_shape(img, cls % 5, class_col, rng);
  draw_shape(img, cls % 5, class_col, rng);

  for (float& v : img.pixels)
    v = clamp01(v + static_cast<float>(rng.uniform(-0.03, 0.03)));
  return img;
}

Image blotch_image(int h, int w, Rng& rng) {
  Image img(h, w, 3);
  // Sum of a few random low-frequency plane waves per channel.
  for (int c = 0; c < 3; ++c) {
    const double fy1 = rng.uniform(0.5, 3.0), fx1 = rng.uniform(0.5, 3.0);
    const double fy2 = rng.uniform(1.0, 5.0), fx2 = rng.uniform(1.0, 5.0);
    const double p1 = rng.uniform(0.0, 2.0 * M_PI), p2 = rng.uniform(0.0, 2.0 * M_PI);
    const double base = rng.uniform(0.2, 0.8);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double u = static_cast<double>(y) / h, v = static_cast<double>(x) / w;
        const double s = base + 0.25 * std::sin(2 * M_PI * (fy1 * u + fx1 * v) + p1) +
                         0.15 * std::sin(2 * M_PI * (fy2 * u - fx2 * v) + p2);
        img.at(y, x, c) = clamp01(static_cast<float>(s));
      }
  }
  for (float& v : img.pixels)
    v = clamp01(v + static_cast<float>(rng.uniform(-0.02, 0.02)));
  return img;
}

}  // namespace

Dataset make_synthetic_dataset(const SynthConfig& config) {
  if (config.count == 0)
    raise(ErrorKind::Validation, "synthetic dataset count must be positive");
  Dataset ds;
  ds.name = "synthetic-" + config.family;
  const Rng root = Rng(config.seed).derive("synth-" + config.family);
  for (std::size_t i = 0; i < config.count; ++i) {
    Rng rng = root.derive("image", i);
    if (config.family == "geometric") {
      const int cls = static_cast<int>(i % static_cast<std::size_t>(config.classes));
      ds.images.push_back(
          geometric_image(cls, config.classes, config.height, config.width, rng));
      ds.labels.push_back(cls);
    } else if (config.family == "blotch") {
      ds.images.push_back(blotch_image(config.height, config.width, rng));
    } else {
      raise(ErrorKind::Validation, "unknown synthetic family: " + config.family);
    }
  }
  return ds;
}

void write_cifar10_layout(const Dataset& ds, const fs::path& root) {
  if (!ds.labeled())
    raise(ErrorKind::MissingLabel, "cifar layout requires labels");
  fs::create_directories(root);
  const std::size_t per_batch = (ds.size() + 5) / 6;  // 5 train batches + test
  std::size_t idx = 0;
  for (int batch = 0; batch < 6 && idx < ds.size(); ++batch) {
    const fs::path file =
        batch < 5 ? root / ("data_batch_" + std::to_string(batch + 1) + ".bin")
                  : root / "test_batch.bin";
    std::ofstream f(file, std::ios::binary);
    if (!f) raise(ErrorKind::Io, "cannot write " + file.string());
    for (std::size_t n = 0; n < per_batch && idx < ds.size(); ++n, ++idx) {
      const Image img = resize_bilinear(ds.images[idx], 32, 32);
      f.put(static_cast<char>(ds.labels[idx]));
      for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 32; ++y)
          for (int x = 0; x < 32; ++x)
            f.put(static_cast<char>(
                std::lround(clamp01(img.at(y, x, c)) * 255.0f)));
    }
  }
}

void write_stl10_unlabeled(const Dataset& ds, const fs::path& root) {
  fs::create_directories(root);
  const fs::path file = root / "unlabeled_X.bin";
  std::ofstream f(file, std::ios::binary);
  if (!f) raise(ErrorKind::Io, "cannot write " + file.string());
  for (const Image& src : ds.images) {
    const Image img = resize_bilinear(src, 96, 96);
    for (int c = 0; c < 3; ++c)
      for (int x = 0; x < 96; ++x)
        for (int y = 0; y < 96; ++y)
          f.put(static_cast<char>(std::lround(clamp01(img.at(y, x, c)) * 255.0f)));
  }
}

void write_image_dir(const Dataset& ds, const fs::path& dir,
                     const std::string& format) {
  fs::create_directories(dir);
  char name[32];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    std::vector<std::uint8_t> bytes;
    if (format == "png") {
      std::snprintf(name, sizeof(name), "img_%05zu.png", i);
      bytes = encode_png(ds.images[i]);
    } else if (format == "jpeg") {
      std::snprintf(name, sizeof(name), "img_%05zu.jpg", i);
      bytes = encode_jpeg(ds.images[i]);
    } else {
      raise(ErrorKind::Validation, "unknown image format: " + format);
    }
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) raise(ErrorKind::Io, "cannot write " + (dir / name).string());
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  }
}

}  // namespace cmi::data
