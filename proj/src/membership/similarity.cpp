#include "cmi/membership/similarity.hpp"

#include <cmath>

#include "cmi/core/errors.hpp"

namespace cmi::membership {

const char* metric_name(SimilarityMetric metric) {
  switch (metric) {
    case SimilarityMetric::Cosine: return "cosine";
    case SimilarityMetric::PearsonCorrelation: return "correlation";
    case SimilarityMetric::NegativeEuclidean: return "euclidean";
  }
  return "?";
}

SimilarityMetric parse_metric(const std::string& name) {
  if (name == "cosine") return SimilarityMetric::Cosine;
  if (name == "correlation") return SimilarityMetric::PearsonCorrelation;
  if (name == "euclidean") return SimilarityMetric::NegativeEuclidean;
  raise(ErrorKind::Validation, "unknown similarity metric: " + name);
}

double similarity(SimilarityMetric metric, std::span<const float> a,
                  std::span<const float> b) {
  if (a.size() != b.size())
    raise(ErrorKind::DimensionMismatch, "similarity arguments differ in length");
  const std::size_t d = a.size();
  if (d == 0) raise(ErrorKind::DimensionMismatch, "empty vectors");

  switch (metric) {
    case SimilarityMetric::Cosine: {
      double dot = 0, na = 0, nb = 0;
      for (std::size_t i = 0; i < d; ++i) {
        dot += static_cast<double>(a[i]) * b[i];
        na += static_cast<double>(a[i]) * a[i];
        nb += static_cast<double>(b[i]) * b[i];
      }
      if (na == 0.0 || nb == 0.0)
        raise(ErrorKind::DegenerateFeature, "cosine of a zero-norm vector");
      return dot / (std::sqrt(na) * std::sqrt(nb));
    }
    case SimilarityMetric::PearsonCorrelation: {
      double ma = 0, mb = 0;
      for (std::size_t i = 0; i < d; ++i) {
        ma += a[i];
        mb += b[i];
      }
      ma /= static_cast<double>(d);
      mb /= static_cast<double>(d);
      double dot = 0, va = 0, vb = 0;
      for (std::size_t i = 0; i < d; ++i) {
        const double xa = a[i] - ma, xb = b[i] - mb;
        dot += xa * xb;
        va += xa * xa;
        vb += xb * xb;
      }
      if (va == 0.0 || vb == 0.0)
        raise(ErrorKind::DegenerateFeature, "correlation of a constant vector");
      return dot / (std::sqrt(va) * std::sqrt(vb));
    }
    case SimilarityMetric::NegativeEuclidean: {
      double acc = 0;
      for (std::size_t i = 0; i < d; ++i) {
        const double diff = static_cast<double>(a[i]) - b[i];
        acc += diff * diff;
      }
      return -std::sqrt(acc);
    }
  }
  raise(ErrorKind::Validation, "unreachable metric");
}

}  // namespace cmi::membership
