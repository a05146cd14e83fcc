#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "micl/coreset.hpp"
#include "micl/embedding.hpp"
#include "micl/prompt.hpp"
#include "micl/rng.hpp"

namespace micl {

// Coreset keys are optimized vectors, not records; their visuals come from
// the record that seeded each key.
inline std::vector<Exemplar> resolve_decs_exemplars(const Coreset& cs,
                                                    const std::vector<RetrievalHit>& hits,
                                                    const DatasetIndex& train_index) {
  std::vector<Exemplar> out;
  out.reserve(hits.size());
  for (const auto& h : hits) {
    const std::string& seed_id = cs.init_member_ids[h.key_index];
    const EmbeddingRecord& seed = train_index.at(seed_id);
    if (seed.image_ref.empty())
      raise(ErrorCode::MissingImageRef, "seed record '" + seed_id + "' has no image");
    out.push_back({seed.image_ref, h.key_class, h.similarity});
  }
  return out;
}

inline std::vector<Exemplar> select_decs(const Coreset& cs, const DatasetIndex& train_index,
                                         const std::vector<double>& query, int k) {
  return resolve_decs_exemplars(cs, retrieve_topk(cs, query, k), train_index);
}

// Plain cosine Top-K over the raw training embeddings; the Table-2 style
// baseline without any coreset optimization. Ties by ascending record index.
inline std::vector<Exemplar> select_topk_raw(const Dataset& train,
                                             const std::vector<double>& query, int k) {
  if (k < 1 || static_cast<std::size_t>(k) > train.size())
    raise(ErrorCode::KTooLarge, "K=" + std::to_string(k) + " outside [1, " +
                                    std::to_string(train.size()) + "]");
  std::vector<std::pair<double, std::size_t>> sims;
  sims.reserve(train.size());
  for (std::size_t i = 0; i < train.records.size(); ++i)
    sims.emplace_back(detail::dot(query, train.records[i].vec), i);
  std::partial_sort(sims.begin(), sims.begin() + k, sims.end(),
                    [](const auto& a, const auto& b) {
                      if (a.first != b.first) return a.first > b.first;
                      return a.second < b.second;
                    });
  std::vector<Exemplar> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    const auto& r = train.records[sims[static_cast<std::size_t>(i)].second];
    if (r.image_ref.empty())
      raise(ErrorCode::MissingImageRef, "record '" + r.id + "' has no image");
    out.push_back({r.image_ref, r.label, sims[static_cast<std::size_t>(i)].first});
  }
  return out;
}

/// Per-class record indices, built once per dataset for stratified draws.
struct ClassMembers {
  explicit ClassMembers(const Dataset& ds)
      : by_class(static_cast<std::size_t>(ds.num_classes)) {
    for (std::size_t i = 0; i < ds.records.size(); ++i)
      by_class[static_cast<std::size_t>(ds.records[i].label)].push_back(i);
  }
  std::vector<std::vector<std::size_t>> by_class;
};

// Class-stratified random draw: classes in seeded shuffled order, one uniform
// member per class, cycling when k exceeds the class count. The rng stream is
// derived from (run seed, query id), so results do not depend on evaluation
// order and stay safe under concurrent callers.
inline std::vector<Exemplar> select_random_stratified(const Dataset& train,
                                                      const ClassMembers& members,
                                                      const std::vector<double>& query,
                                                      const std::string& query_id,
                                                      std::uint64_t run_seed, int k) {
  Rng rng(splitmix64(run_seed ^ fnv1a64(query_id)));
  std::vector<int> classes(static_cast<std::size_t>(train.num_classes));
  for (int c = 0; c < train.num_classes; ++c) classes[static_cast<std::size_t>(c)] = c;
  rng.shuffle(classes);
  std::vector<Exemplar> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    const int c = classes[static_cast<std::size_t>(i) % classes.size()];
    const auto& pool = members.by_class[static_cast<std::size_t>(c)];
    const auto& r = train.records[pool[static_cast<std::size_t>(rng.bounded(pool.size()))]];
    if (r.image_ref.empty())
      raise(ErrorCode::MissingImageRef, "record '" + r.id + "' has no image");
    out.push_back({r.image_ref, r.label, detail::dot(query, r.vec)});
  }
  return out;
}

}  // namespace micl
