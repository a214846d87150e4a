#pragma once

#include <memory>
#include <string>
#include <vector>

#include "cmi/core/image.hpp"

namespace cmi::encoder {

// The only access the inference side ever needs: images in, d-dimensional
// feature vectors out. Implementations must be stateless per query (same
// image, same vector) and safe for concurrent read-only use.
class BlackBoxEncoder {
 public:
  virtual ~BlackBoxEncoder() = default;

  virtual int dim() const = 0;
  virtual int input_resolution() const = 0;

  // One feature vector per input image, in order. Images must already be at
  // input_resolution (resizing is the caller's job).
  virtual std::vector<std::vector<float>> embed_batch(
      const std::vector<Image>& images) = 0;

  virtual std::string digest() const = 0;  // identity for cache keys
};

// Resolution-checked convenience wrapper around enc.embed_batch.
std::vector<std::vector<float>> embed_batch(BlackBoxEncoder& enc,
                                            const std::vector<Image>& images);

}  // namespace cmi::encoder
