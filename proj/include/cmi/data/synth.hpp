#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "cmi/data/dataset.hpp"

namespace cmi::data {

// Procedural image generator used for demos, tests, and desk-scale runs in
// environments without the real datasets on disk. Two families with visibly
// different statistics:
//   "geometric" — gradient backgrounds with class-tinted shapes (the
//                 stand-in for the pre-training distribution);
//   "blotch"    — smooth random color fields (the "different distribution"
//                 stand-in).
// Every image is a deterministic function of (seed, index).
struct SynthConfig {
  std::size_t count = 0;
  int classes = 10;
  int height = 32;
  int width = 32;
  std::uint64_t seed = 0;
  std::string family = "geometric";
};

Dataset make_synthetic_dataset(const SynthConfig& config);

// Writers for the supported on-disk layouts, so loaders can be exercised
// end to end. Labels are required for the CIFAR layout.
void write_cifar10_layout(const Dataset& ds, const std::filesystem::path& root);
void write_stl10_unlabeled(const Dataset& ds, const std::filesystem::path& root);
void write_image_dir(const Dataset& ds, const std::filesystem::path& dir,
                     const std::string& format = "png");

}  // namespace cmi::data
