#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cmi/core/image.hpp"
#include "cmi/core/rng.hpp"

namespace cmi::data {

enum class AugKind {
  RandomResizedCrop,
  RandomGrayscale,
  RandomHorizontalFlip,
  ColorJitter,
  GaussianBlur,
};

const char* aug_kind_name(AugKind kind);
AugKind parse_aug_kind(const std::string& name);

struct AugmentationOp {
  AugKind kind = AugKind::RandomResizedCrop;

  // random-resized-crop: area fraction and aspect-ratio ranges
  double scale_min = 0.2, scale_max = 1.0;
  double aspect_min = 3.0 / 4.0, aspect_max = 4.0 / 3.0;

  // random-grayscale / random-horizontal-flip / gaussian-blur
  double probability = 0.5;

  // color-jitter strengths; hue is a fraction of the full hue circle
  double brightness = 0.4, contrast = 0.4, saturation = 0.4, hue = 0.1;

  // gaussian-blur sigma range
  double sigma_min = 0.1, sigma_max = 2.0;

  static AugmentationOp random_resized_crop(double scale_min = 0.2,
                                            double scale_max = 1.0);
  static AugmentationOp random_grayscale(double p = 0.2);
  static AugmentationOp random_horizontal_flip(double p = 0.5);
  static AugmentationOp color_jitter(double brightness = 0.4, double contrast = 0.4,
                                     double saturation = 0.4, double hue = 0.1);
  static AugmentationOp gaussian_blur(double p = 0.5, double sigma_min = 0.1,
                                      double sigma_max = 2.0);
};

// An ordered list of stochastic ops. Applying the pipeline never changes the
// image dimensions and is a pure function of (image, rng state). Parameters
// are validated at construction; augment() itself does not re-validate.
class AugmentationPipeline {
 public:
  AugmentationPipeline() = default;
  explicit AugmentationPipeline(std::vector<AugmentationOp> ops);

  const std::vector<AugmentationOp>& ops() const { return ops_; }
  bool empty() const { return ops_.empty(); }

  std::string digest() const;
  nlohmann::json to_json() const;
  static AugmentationPipeline from_json(const nlohmann::json& j);

  // The recipe used by the public MoCo-v1 implementation: random resized
  // crop, grayscale p=0.2, color jitter (0.4, 0.4, 0.4, 0.1), flip p=0.5.
  static AugmentationPipeline standard();

  // Query pipeline when the training algorithm is unknown.
  static AugmentationPipeline crop_only();

 private:
  std::vector<AugmentationOp> ops_;
};

Image augment(const Image& img, const AugmentationPipeline& pipeline, Rng& rng);

}  // namespace cmi::data
