#include "cmi/data/splits.hpp"

#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "cmi/core/errors.hpp"

namespace cmi::data {

using nlohmann::json;

const char* role_name(SplitRole role) {
  switch (role) {
    case SplitRole::PretrainMember: return "pretrain-member";
    case SplitRole::ShadowMember: return "shadow-member";
    case SplitRole::ShadowNonmember: return "shadow-nonmember";
    case SplitRole::EvalMember: return "eval-member";
    case SplitRole::EvalNonmember: return "eval-nonmember";
    case SplitRole::DownstreamTrain: return "downstream-train";
    case SplitRole::DownstreamTest: return "downstream-test";
  }
  return "?";
}

SplitRole parse_role(const std::string& name) {
  static const std::map<std::string, SplitRole> table = {
      {"pretrain-member", SplitRole::PretrainMember},
      {"shadow-member", SplitRole::ShadowMember},
      {"shadow-nonmember", SplitRole::ShadowNonmember},
      {"eval-member", SplitRole::EvalMember},
      {"eval-nonmember", SplitRole::EvalNonmember},
      {"downstream-train", SplitRole::DownstreamTrain},
      {"downstream-test", SplitRole::DownstreamTest},
  };
  const auto it = table.find(name);
  if (it == table.end()) raise(ErrorKind::UnknownRole, "unknown split role: " + name);
  return it->second;
}

std::vector<DatasetSplit> make_splits(std::size_t dataset_size,
                                      const std::map<SplitRole, std::size_t>& sizes,
                                      std::uint64_t seed) {
  std::size_t fresh_needed = 0;
  for (const auto& [role, count] : sizes)
    if (role != SplitRole::EvalMember) fresh_needed += count;
  if (fresh_needed > dataset_size)
    raise(ErrorKind::InsufficientData,
          "requested " + std::to_string(fresh_needed) + " records, dataset has " +
              std::to_string(dataset_size));

  const auto em = sizes.find(SplitRole::EvalMember);
  const auto pm = sizes.find(SplitRole::PretrainMember);
  const std::size_t eval_member_count = em == sizes.end() ? 0 : em->second;
  const std::size_t pretrain_count = pm == sizes.end() ? 0 : pm->second;
  if (eval_member_count > pretrain_count)
    raise(ErrorKind::InsufficientData,
          "eval-member must fit inside pretrain-member");

  std::vector<std::size_t> ids(dataset_size);
  std::iota(ids.begin(), ids.end(), 0);
  Rng rng = Rng(seed).derive("splits");
  rng.shuffle(ids);

  // Fixed allocation order keeps the result independent of map iteration.
  static constexpr SplitRole kOrder[] = {
      SplitRole::PretrainMember,   SplitRole::ShadowMember,
      SplitRole::ShadowNonmember,  SplitRole::EvalNonmember,
      SplitRole::DownstreamTrain,  SplitRole::DownstreamTest,
  };

  std::vector<DatasetSplit> out;
  std::size_t cursor = 0;
  const std::vector<std::size_t>* pretrain_ids = nullptr;
  for (SplitRole role : kOrder) {
    const auto it = sizes.find(role);
    if (it == sizes.end()) continue;
    DatasetSplit split;
    split.name = role_name(role);
    split.role = role;
    split.indices.assign(ids.begin() + cursor, ids.begin() + cursor + it->second);
    cursor += it->second;
    out.push_back(std::move(split));
    if (role == SplitRole::PretrainMember) pretrain_ids = &out.back().indices;
  }

  if (em != sizes.end()) {
    DatasetSplit split;
    split.name = role_name(SplitRole::EvalMember);
    split.role = SplitRole::EvalMember;
    if (eval_member_count > 0) {
      if (!pretrain_ids)
        raise(ErrorKind::InsufficientData,
              "eval-member requested without a pretrain-member split");
      split.indices.assign(pretrain_ids->begin(),
                           pretrain_ids->begin() + eval_member_count);
    }
    out.push_back(std::move(split));
  }
  return out;
}

const DatasetSplit& find_split(const std::vector<DatasetSplit>& splits,
                               SplitRole role) {
  for (const auto& s : splits)
    if (s.role == role) return s;
  raise(ErrorKind::MissingAsset,
        std::string("no split with role ") + role_name(role));
}

void save_splits(const std::vector<DatasetSplit>& splits, std::uint64_t seed,
                 const std::filesystem::path& file) {
  json j;
  j["seed"] = seed;
  json roles = json::object();
  for (const auto& s : splits) roles[s.name] = s.indices;
  j["splits"] = roles;
  std::ofstream f(file);
  if (!f) raise(ErrorKind::Io, "cannot write " + file.string());
  f << j.dump(2) << "\n";
}

std::pair<std::vector<DatasetSplit>, std::uint64_t> load_splits(
    const std::filesystem::path& file) {
  std::ifstream f(file);
  if (!f) raise(ErrorKind::Io, "cannot open " + file.string());
  json j;
  f >> j;
  std::vector<DatasetSplit> splits;
  for (const auto& [name, ids] : j.at("splits").items()) {
    DatasetSplit s;
    s.name = name;
    s.role = parse_role(name);
    s.indices = ids.get<std::vector<std::size_t>>();
    splits.push_back(std::move(s));
  }
  return {std::move(splits), j.at("seed").get<std::uint64_t>()};
}

std::vector<Image> make_concat_nonmembers(const std::vector<Image>& pool,
                                          std::uint64_t seed) {
  if (pool.size() % 2 != 0)
    raise(ErrorKind::OddPool, "concat non-member pool size must be even");
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng = Rng(seed).derive("concat-nonmembers");
  rng.shuffle(order);

  std::vector<Image> out;
  out.reserve(pool.size() / 2);
  for (std::size_t i = 0; i + 1 < pool.size(); i += 2) {
    const Image& left = pool[order[i]];
    // Both halves share the left image's dimensions.
    const Image right =
        resize_bilinear(pool[order[i + 1]], left.height, left.width);
    out.push_back(concat_horizontal(left, right));
  }
  return out;
}

}  // namespace cmi::data
