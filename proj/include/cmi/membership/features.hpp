#pragma once

#include <filesystem>
#include <mutex>
#include <optional>

#include "cmi/data/augment.hpp"
#include "cmi/data/dataset.hpp"
#include "cmi/data/splits.hpp"
#include "cmi/encoder/blackbox.hpp"
#include "cmi/membership/similarity.hpp"

namespace cmi::membership {

// The n·(n-1)/2 pairwise similarity scores between the encoder's feature
// vectors for n augmented views of one input. Stored in (i<j) pair order but
// semantically a multiset: consumers must not depend on the ordering.
struct FeatureSet {
  std::vector<double> scores;
  int n_views = 0;
  SimilarityMetric metric = SimilarityMetric::Cosine;

  double average() const;
  std::vector<double> sorted_descending() const;
};

struct LabeledRecord {
  FeatureSet features;
  int label = 0;  // 1 member, 0 non-member
  std::size_t source_id = 0;
};

// Augments x into n views, embeds them with enc, and scores all unordered
// pairs. Deterministic in the rng state. n must be ≥ 2.
FeatureSet extract_membership_features(const Image& x,
                                       encoder::BlackBoxEncoder& enc,
                                       const data::AugmentationPipeline& pipeline,
                                       int n, SimilarityMetric metric, Rng& rng);

// Batch variant; one derived rng stream per input, views embedded in shared
// chunks for throughput. Equivalent to calling the scalar op per image with
// rng = base_rng.derive("views", i).
std::vector<FeatureSet> extract_features_batch(
    const std::vector<Image>& images, encoder::BlackBoxEncoder& enc,
    const data::AugmentationPipeline& pipeline, int n, SimilarityMetric metric,
    const Rng& base_rng);

// Labeled records for the inference classifier: members first (label 1),
// then non-members (label 0). OverlappingSplits when the splits intersect.
std::vector<LabeledRecord> build_inference_training_set(
    encoder::BlackBoxEncoder& shadow_enc, const data::Dataset& dataset,
    const data::DatasetSplit& shadow_member,
    const data::DatasetSplit& shadow_nonmember,
    const data::AugmentationPipeline& pipeline, int n, SimilarityMetric metric,
    std::uint64_t seed);

// On-disk feature cache: binary score array plus a JSON sidecar. The ablation
// grids re-extract the same (split, encoder, config) combinations heavily.
struct CacheKey {
  std::string tag;              // e.g. split name
  std::string encoder_digest;
  std::string pipeline_digest;
  int n = 0;
  SimilarityMetric metric = SimilarityMetric::Cosine;
  std::uint64_t seed = 0;

  std::string file_stem() const;
};

class FeatureCache {
 public:
  explicit FeatureCache(std::filesystem::path dir);

  std::optional<std::vector<FeatureSet>> load(const CacheKey& key) const;
  // Insert-if-absent; concurrent stores of the same key are benign.
  void store(const CacheKey& key, const std::vector<FeatureSet>& sets);

 private:
  std::filesystem::path dir_;
  mutable std::mutex mutex_;
};

}  // namespace cmi::membership
