#pragma once

#include <filesystem>
#include <memory>

#include "cmi/membership/features.hpp"
#include "cmi/nn/network.hpp"

namespace cmi::classifiers {

enum class ClassifierKind { Vector, Set, Threshold };

const char* kind_name(ClassifierKind kind);

enum class Decision { NonMember = 0, Member = 1 };

// Binary membership classifier over membership feature sets. member_score
// is a monotone confidence (softmax member probability for the learned
// classifiers, the average similarity for the threshold one); the default
// decision is member iff score ≥ decision_cutoff().
class InferenceClassifier {
 public:
  virtual ~InferenceClassifier() = default;

  virtual ClassifierKind kind() const = 0;
  virtual int n_views() const = 0;
  virtual membership::SimilarityMetric metric() const = 0;
  virtual double member_score(const membership::FeatureSet& features) const = 0;
  virtual double decision_cutoff() const = 0;

  bool predict(const membership::FeatureSet& features) const {
    return member_score(features) >= decision_cutoff();
  }

  std::vector<double> member_scores(
      const std::vector<membership::FeatureSet>& sets) const;

  virtual void save(const std::filesystem::path& file) const = 0;
};

std::unique_ptr<InferenceClassifier> load_classifier(
    const std::filesystem::path& file);

struct TrainOptions {
  int epochs = 300;
  double lr = 1e-4;
  int batch_size = 128;
  int hidden = 256;         // vector classifier hidden width
  int deepsets_width = 64;  // φ and ρ width
};

// Two-hidden-layer MLP over the descending-sorted score vector.
std::unique_ptr<InferenceClassifier> train_vector_classifier(
    const std::vector<membership::LabeledRecord>& records, std::uint64_t seed,
    const TrainOptions& options = {});

// Permutation-invariant classifier: per-score embedder φ, sum pooling, head ρ.
std::unique_ptr<InferenceClassifier> train_set_classifier(
    const std::vector<membership::LabeledRecord>& records, std::uint64_t seed,
    const TrainOptions& options = {});

// Average-score threshold rule: member iff average ≥ θ*, with θ* maximizing
// fitting accuracy (equivalently minimizing missed members + false members).
std::unique_ptr<InferenceClassifier> fit_threshold(
    const std::vector<membership::LabeledRecord>& records);

// Core of fit_threshold, reusable over any scalar score (Baseline-E fits
// patch-similarity averages with it). Candidates are midpoints between
// adjacent distinct sorted values plus below-min/above-max sentinels; among
// equally accurate candidates the smallest wins (recall-leaning).
// Returns (θ*, fitting accuracy).
std::pair<double, double> best_threshold(const std::vector<double>& values,
                                         const std::vector<int>& labels);

// End-to-end inference for one input against a target encoder: extract
// membership features with the classifier's own (n, metric) and route by
// classifier kind. ConfigMismatch when n or metric disagree.
Decision infer_membership(const Image& x, encoder::BlackBoxEncoder& target,
                          const InferenceClassifier& clf,
                          const data::AugmentationPipeline& pipeline, int n,
                          membership::SimilarityMetric metric, Rng& rng);

}  // namespace cmi::classifiers
