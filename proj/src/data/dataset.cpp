#include "cmi/data/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "cmi/core/codecs.hpp"
#include "cmi/core/errors.hpp"

namespace cmi::data {

namespace fs = std::filesystem;

namespace {

std::vector<std::uint8_t> read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) raise(ErrorKind::Io, "cannot open " + p.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(f),
                                   std::istreambuf_iterator<char>());
}

void maybe_resize(Dataset& ds, std::optional<int> resize_to) {
  if (!resize_to) return;
  for (Image& img : ds.images)
    img = resize_bilinear(img, *resize_to, *resize_to);
}

// CIFAR binary record: label byte + 32*32 R plane + G plane + B plane.
void append_cifar_batch(Dataset& ds, const fs::path& file) {
  const auto bytes = read_file(file);
  constexpr std::size_t kRecord = 1 + 3 * 32 * 32;
  if (bytes.size() % kRecord != 0)
    raise(ErrorKind::Io, file.string() + ": size is not a whole number of records");
  const std::size_t count = bytes.size() / kRecord;
  for (std::size_t r = 0; r < count; ++r) {
    const std::uint8_t* rec = bytes.data() + r * kRecord;
    ds.labels.push_back(rec[0]);
    Image img(32, 32, 3);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x)
          img.at(y, x, c) = rec[1 + c * 1024 + y * 32 + x] / 255.0f;
    ds.images.push_back(std::move(img));
  }
}

Image decode_by_extension(const fs::path& p) {
  const auto bytes = read_file(p);
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
  if (ext == ".png") return decode_png(bytes.data(), bytes.size());
  if (ext == ".jpg" || ext == ".jpeg") return decode_jpeg(bytes.data(), bytes.size());
  if (ext == ".ppm") {
    // P6 only.
    std::istringstream s(std::string(bytes.begin(), bytes.end()));
    std::string magic;
    int w, h, maxval;
    s >> magic >> w >> h >> maxval;
    if (magic != "P6" || maxval != 255)
      raise(ErrorKind::Validation, p.string() + ": unsupported ppm variant");
    s.get();  // single whitespace after header
    const std::size_t offset = static_cast<std::size_t>(s.tellg());
    if (bytes.size() < offset + static_cast<std::size_t>(w) * h * 3)
      raise(ErrorKind::Io, p.string() + ": truncated ppm");
    return from_bytes(bytes.data() + offset, h, w, 3);
  }
  raise(ErrorKind::Validation, p.string() + ": unsupported image extension");
}

}  // namespace

Dataset load_cifar10(const fs::path& root, std::optional<int> resize_to) {
  fs::path dir = root;
  if (fs::exists(root / "cifar-10-batches-bin"))
    dir = root / "cifar-10-batches-bin";
  Dataset ds;
  ds.name = "cifar10";
  bool any = false;
  for (int i = 1; i <= 5; ++i) {
    const fs::path batch = dir / ("data_batch_" + std::to_string(i) + ".bin");
    if (fs::exists(batch)) {
      append_cifar_batch(ds, batch);
      any = true;
    }
  }
  if (fs::exists(dir / "test_batch.bin")) {
    append_cifar_batch(ds, dir / "test_batch.bin");
    any = true;
  }
  if (!any)
    raise(ErrorKind::Io, "no cifar10 batch files under " + dir.string());
  maybe_resize(ds, resize_to);
  return ds;
}

Dataset load_stl10(const fs::path& root, std::optional<int> resize_to) {
  Dataset ds;
  ds.name = "stl10";
  constexpr std::size_t kPixels = 3 * 96 * 96;

  auto append_images = [&](const fs::path& file) {
    const auto bytes = read_file(file);
    if (bytes.size() % kPixels != 0)
      raise(ErrorKind::Io, file.string() + ": size is not a whole number of images");
    const std::size_t count = bytes.size() / kPixels;
    for (std::size_t r = 0; r < count; ++r) {
      const std::uint8_t* rec = bytes.data() + r * kPixels;
      Image img(96, 96, 3);
      // Column-major within each channel plane.
      for (int c = 0; c < 3; ++c)
        for (int x = 0; x < 96; ++x)
          for (int y = 0; y < 96; ++y)
            img.at(y, x, c) = rec[c * 96 * 96 + x * 96 + y] / 255.0f;
      ds.images.push_back(std::move(img));
    }
  };

  if (fs::exists(root / "unlabeled_X.bin")) {
    append_images(root / "unlabeled_X.bin");
  } else {
    bool any = false;
    for (const char* stem : {"train", "test"}) {
      const fs::path xfile = root / (std::string(stem) + "_X.bin");
      if (!fs::exists(xfile)) continue;
      const std::size_t before = ds.images.size();
      append_images(xfile);
      any = true;
      const fs::path yfile = root / (std::string(stem) + "_y.bin");
      if (fs::exists(yfile)) {
        const auto labels = read_file(yfile);
        if (labels.size() != ds.images.size() - before)
          raise(ErrorKind::Io, yfile.string() + ": label count mismatch");
        for (std::uint8_t v : labels) ds.labels.push_back(v - 1);  // 1-based on disk
      }
    }
    if (!any)
      raise(ErrorKind::Io, "no stl10 binaries under " + root.string());
    if (!ds.labels.empty() && ds.labels.size() != ds.images.size())
      ds.labels.clear();  // partially labeled: treat as unlabeled
  }
  maybe_resize(ds, resize_to);
  return ds;
}

Dataset load_tiny_imagenet(const fs::path& root, std::optional<int> resize_to) {
  Dataset ds;
  ds.name = "tiny-imagenet";
  const fs::path train = root / "train";
  if (!fs::exists(train))
    raise(ErrorKind::Io, "no train/ directory under " + root.string());

  std::vector<fs::path> wnids;
  for (const auto& entry : fs::directory_iterator(train))
    if (entry.is_directory()) wnids.push_back(entry.path());
  std::sort(wnids.begin(), wnids.end());

  std::map<std::string, int> wnid_index;
  for (std::size_t i = 0; i < wnids.size(); ++i)
    wnid_index[wnids[i].filename().string()] = static_cast<int>(i);

  for (const auto& wnid : wnids) {
    fs::path images = wnid / "images";
    if (!fs::exists(images)) images = wnid;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(images))
      if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      ds.images.push_back(decode_by_extension(file));
      ds.labels.push_back(wnid_index[wnid.filename().string()]);
    }
  }

  const fs::path val = root / "val";
  if (fs::exists(val / "val_annotations.txt")) {
    std::ifstream ann(val / "val_annotations.txt");
    std::string line;
    while (std::getline(ann, line)) {
      std::istringstream s(line);
      std::string file, wnid;
      s >> file >> wnid;
      if (file.empty()) continue;
      const fs::path img = val / "images" / file;
      if (!fs::exists(img)) continue;
      ds.images.push_back(decode_by_extension(img));
      const auto it = wnid_index.find(wnid);
      ds.labels.push_back(it == wnid_index.end() ? -1 : it->second);
    }
  }
  if (ds.images.empty())
    raise(ErrorKind::Io, "no images under " + root.string());
  maybe_resize(ds, resize_to);
  return ds;
}

Dataset load_image_dir(const fs::path& dir, std::optional<int> resize_to) {
  if (!fs::exists(dir))
    raise(ErrorKind::Io, "no such directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".ppm")
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  Dataset ds;
  ds.name = dir.filename().string();
  for (const auto& file : files) ds.images.push_back(decode_by_extension(file));
  if (ds.images.empty())
    raise(ErrorKind::Io, "no image files under " + dir.string());
  maybe_resize(ds, resize_to);
  return ds;
}

Dataset load_dataset(const std::string& kind, const fs::path& path,
                     std::optional<int> resize_to) {
  if (kind == "cifar10") return load_cifar10(path, resize_to);
  if (kind == "stl10") return load_stl10(path, resize_to);
  if (kind == "tiny-imagenet") return load_tiny_imagenet(path, resize_to);
  if (kind == "image-dir") return load_image_dir(path, resize_to);
  raise(ErrorKind::Validation, "unknown dataset kind: " + kind);
}

}  // namespace cmi::data
