#include "cmi/membership/features.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "cmi/core/digest.hpp"
#include "cmi/core/errors.hpp"

namespace cmi::membership {

using nlohmann::json;
namespace fs = std::filesystem;

double FeatureSet::average() const {
  double acc = 0.0;
  for (double s : scores) acc += s;
  return scores.empty() ? 0.0 : acc / static_cast<double>(scores.size());
}

std::vector<double> FeatureSet::sorted_descending() const {
  std::vector<double> out = scores;
  std::sort(out.begin(), out.end(), std::greater<double>());
  return out;
}

namespace {

FeatureSet score_views(const std::vector<std::vector<float>>& feats, int n,
                       SimilarityMetric metric) {
  FeatureSet set;
  set.n_views = n;
  set.metric = metric;
  set.scores.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      set.scores.push_back(similarity(metric, feats[static_cast<std::size_t>(i)],
                                      feats[static_cast<std::size_t>(j)]));
  return set;
}

}  // namespace

FeatureSet extract_membership_features(const Image& x,
                                       encoder::BlackBoxEncoder& enc,
                                       const data::AugmentationPipeline& pipeline,
                                       int n, SimilarityMetric metric, Rng& rng) {
  if (n < 2) raise(ErrorKind::Validation, "need at least 2 augmented views");
  std::vector<Image> views;
  views.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) views.push_back(data::augment(x, pipeline, rng));
  const auto feats = enc.embed_batch(views);
  return score_views(feats, n, metric);
}

std::vector<FeatureSet> extract_features_batch(
    const std::vector<Image>& images, encoder::BlackBoxEncoder& enc,
    const data::AugmentationPipeline& pipeline, int n, SimilarityMetric metric,
    const Rng& base_rng) {
  if (n < 2) raise(ErrorKind::Validation, "need at least 2 augmented views");
  std::vector<FeatureSet> out(images.size());

  // Chunked so view batches stay reasonably sized for the encoder.
  const std::size_t inputs_per_chunk =
      std::max<std::size_t>(1, 512 / static_cast<std::size_t>(n));
  for (std::size_t start = 0; start < images.size(); start += inputs_per_chunk) {
    const std::size_t end = std::min(images.size(), start + inputs_per_chunk);
    std::vector<Image> views(static_cast<std::size_t>(n) * (end - start));
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(end - start); ++i) {
      Rng rng = base_rng.derive("views", start + static_cast<std::size_t>(i));
      for (int v = 0; v < n; ++v)
        views[static_cast<std::size_t>(i) * n + v] =
            data::augment(images[start + static_cast<std::size_t>(i)], pipeline, rng);
    }
    const auto feats = enc.embed_batch(views);
    for (std::size_t i = 0; i < end - start; ++i) {
      std::vector<std::vector<float>> per_input(
          feats.begin() + static_cast<std::ptrdiff_t>(i * n),
          feats.begin() + static_cast<std::ptrdiff_t>((i + 1) * n));
      out[start + i] = score_views(per_input, n, metric);
    }
  }
  return out;
}

std::vector<LabeledRecord> build_inference_training_set(
    encoder::BlackBoxEncoder& shadow_enc, const data::Dataset& dataset,
    const data::DatasetSplit& shadow_member,
    const data::DatasetSplit& shadow_nonmember,
    const data::AugmentationPipeline& pipeline, int n, SimilarityMetric metric,
    std::uint64_t seed) {
  std::set<std::size_t> members(shadow_member.indices.begin(),
                                shadow_member.indices.end());
  for (std::size_t id : shadow_nonmember.indices)
    if (members.count(id))
      raise(ErrorKind::OverlappingSplits,
            "shadow member and non-member splits share record " +
                std::to_string(id));

  const Rng root = Rng(seed).derive("inference-training-set");
  std::vector<LabeledRecord> out;
  out.reserve(shadow_member.size() + shadow_nonmember.size());

  auto extract_split = [&](const data::DatasetSplit& split, int label,
                           const char* stream) {
    std::vector<Image> images;
    images.reserve(split.size());
    for (std::size_t id : split.indices) images.push_back(dataset.images[id]);
    const auto sets =
        extract_features_batch(images, shadow_enc, pipeline, n, metric,
                               root.derive(stream));
    for (std::size_t i = 0; i < sets.size(); ++i)
      out.push_back({sets[i], label, split.indices[i]});
  };
  extract_split(shadow_member, 1, "members");
  extract_split(shadow_nonmember, 0, "nonmembers");
  return out;
}

std::string CacheKey::file_stem() const {
  json j;
  j["tag"] = tag;
  j["encoder"] = encoder_digest;
  j["pipeline"] = pipeline_digest;
  j["n"] = n;
  j["metric"] = metric_name(metric);
  j["seed"] = seed;
  return digest_hex(j.dump());
}

FeatureCache::FeatureCache(fs::path dir) : dir_(std::move(dir)) {
  fs::create_directories(dir_);
}

std::optional<std::vector<FeatureSet>> FeatureCache::load(const CacheKey& key) const {
  std::lock_guard<std::mutex> lock(mutex_);
  const fs::path meta_file = dir_ / (key.file_stem() + ".json");
  const fs::path bin_file = dir_ / (key.file_stem() + ".bin");
  if (!fs::exists(meta_file) || !fs::exists(bin_file)) return std::nullopt;

  json meta;
  {
    std::ifstream f(meta_file);
    if (!f) return std::nullopt;
    f >> meta;
  }
  const std::size_t count = meta.at("count").get<std::size_t>();
  const int n = meta.at("n").get<int>();
  const SimilarityMetric metric = parse_metric(meta.at("metric").get<std::string>());
  const std::size_t per = static_cast<std::size_t>(n) * (n - 1) / 2;

  std::ifstream bin(bin_file, std::ios::binary);
  std::vector<double> flat(count * per);
  bin.read(reinterpret_cast<char*>(flat.data()),
           static_cast<std::streamsize>(flat.size() * sizeof(double)));
  if (!bin) return std::nullopt;

  std::vector<FeatureSet> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    out[i].n_views = n;
    out[i].metric = metric;
    out[i].scores.assign(flat.begin() + static_cast<std::ptrdiff_t>(i * per),
                         flat.begin() + static_cast<std::ptrdiff_t>((i + 1) * per));
  }
  return out;
}

void FeatureCache::store(const CacheKey& key, const std::vector<FeatureSet>& sets) {
  std::lock_guard<std::mutex> lock(mutex_);
  const std::string stem = key.file_stem();
  const fs::path bin_file = dir_ / (stem + ".bin");
  const fs::path meta_file = dir_ / (stem + ".json");
  if (fs::exists(meta_file)) return;  // insert-if-absent

  const fs::path tmp_bin = dir_ / (stem + ".bin.tmp");
  {
    std::ofstream bin(tmp_bin, std::ios::binary);
    if (!bin) raise(ErrorKind::Io, "cannot write " + tmp_bin.string());
    for (const FeatureSet& set : sets)
      bin.write(reinterpret_cast<const char*>(set.scores.data()),
                static_cast<std::streamsize>(set.scores.size() * sizeof(double)));
  }
  json meta;
  meta["tag"] = key.tag;
  meta["encoder"] = key.encoder_digest;
  meta["pipeline"] = key.pipeline_digest;
  meta["n"] = key.n;
  meta["metric"] = metric_name(key.metric);
  meta["seed"] = key.seed;
  meta["count"] = sets.size();
  const fs::path tmp_meta = dir_ / (stem + ".json.tmp");
  {
    std::ofstream f(tmp_meta);
    f << meta.dump(2) << "\n";
  }
  fs::rename(tmp_bin, bin_file);
  fs::rename(tmp_meta, meta_file);  // meta last: presence implies complete data
}

}  // namespace cmi::membership
