#pragma once

#include <span>
#include <string>

namespace cmi::membership {

enum class SimilarityMetric {
  Cosine,
  PearsonCorrelation,
  NegativeEuclidean,
};

const char* metric_name(SimilarityMetric metric);
SimilarityMetric parse_metric(const std::string& name);

// Symmetric similarity between two equal-length vectors. Euclidean distance
// is negated so that "larger means more similar" holds for every metric
// (the threshold classifier's decision direction relies on it).
// DegenerateFeature for a zero-norm vector under cosine or a constant vector
// under correlation.
double similarity(SimilarityMetric metric, std::span<const float> a,
                  std::span<const float> b);

}  // namespace cmi::membership
