#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cmi/core/image.hpp"

namespace cmi::data {

// An in-memory image collection. Labels are optional (contrastive
// pre-training does not need them; downstream training and Baseline-B do).
struct Dataset {
  std::string name;
  std::vector<Image> images;
  std::vector<int> labels;  // empty when unlabeled

  bool labeled() const { return !labels.empty(); }
  std::size_t size() const { return images.size(); }
};

// CIFAR10 binary layout: <root>/data_batch_{1..5}.bin and test_batch.bin
// (or the same files under <root>/cifar-10-batches-bin). Train batches are
// loaded first, then the test batch, so record ids are stable.
Dataset load_cifar10(const std::filesystem::path& root,
                     std::optional<int> resize_to = std::nullopt);

// STL10 binary layout: 96×96×3 uint8, column-major per channel. Loads
// unlabeled_X.bin when present, otherwise train_X/test_X (with labels).
Dataset load_stl10(const std::filesystem::path& root,
                   std::optional<int> resize_to = std::nullopt);

// Tiny-ImageNet layout: <root>/train/<wnid>/images/*.JPEG plus optional
// <root>/val/images + val_annotations.txt. Labels are wnid indices in
// sorted order.
Dataset load_tiny_imagenet(const std::filesystem::path& root,
                           std::optional<int> resize_to = std::nullopt);

// Generic loader: every *.png / *.jpg / *.jpeg / *.ppm file directly under
// the directory, sorted by filename, unlabeled.
Dataset load_image_dir(const std::filesystem::path& dir,
                       std::optional<int> resize_to = std::nullopt);

// Dispatch on a dataset kind string ("cifar10", "stl10", "tiny-imagenet",
// "image-dir").
Dataset load_dataset(const std::string& kind, const std::filesystem::path& path,
                     std::optional<int> resize_to = std::nullopt);

}  // namespace cmi::data
