#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cmi/core/image.hpp"
#include "cmi/core/rng.hpp"

namespace cmi::data {

enum class SplitRole {
  PretrainMember,
  ShadowMember,
  ShadowNonmember,
  EvalMember,
  EvalNonmember,
  DownstreamTrain,
  DownstreamTest,
};

const char* role_name(SplitRole role);
SplitRole parse_role(const std::string& name);  // UnknownRole on bad input

struct DatasetSplit {
  std::string name;
  SplitRole role = SplitRole::PretrainMember;
  std::vector<std::size_t> indices;  // record ids into the source dataset

  std::size_t size() const { return indices.size(); }
};

// Draws pairwise-disjoint splits from [0, dataset_size). The one deliberate
// exception: eval-member is a subset of pretrain-member (eval members must
// be actual members), so that pair overlaps by construction and every other
// pair is disjoint. Deterministic in (dataset_size, sizes, seed).
std::vector<DatasetSplit> make_splits(std::size_t dataset_size,
                                      const std::map<SplitRole, std::size_t>& sizes,
                                      std::uint64_t seed);

// Convenience lookup; MissingAsset if the role is absent.
const DatasetSplit& find_split(const std::vector<DatasetSplit>& splits,
                               SplitRole role);

void save_splits(const std::vector<DatasetSplit>& splits, std::uint64_t seed,
                 const std::filesystem::path& file);
std::pair<std::vector<DatasetSplit>, std::uint64_t> load_splits(
    const std::filesystem::path& file);

// Pairs up pool images at random, resizes each pair to a common size and
// concatenates them side by side: pool_size/2 synthetic non-members.
// Deterministic in (pool, seed); the pool size must be even.
std::vector<Image> make_concat_nonmembers(const std::vector<Image>& pool,
                                          std::uint64_t seed);

}  // namespace cmi::data
