#pragma once

#include <algorithm>
#include <functional>
#include <vector>

#include "micl/coreset.hpp"
#include "micl/embedding.hpp"
#include "micl/prompt.hpp"

namespace micl {

// Deliberately independent re-implementations of the assignment and retrieval
// rules, used to cross-check the optimized paths. Keep these naive: the point
// is that they share nothing with coreset.hpp beyond the data types.

inline std::size_t oracle_assign(const std::vector<double>& query, int query_class,
                                 const Coreset& cs) {
  std::vector<std::pair<double, std::size_t>> candidates;
  for (std::size_t j = 0; j < cs.keys.size(); ++j) {
    if (cs.key_class[j] != query_class) continue;
    double sim = 0.0;
    for (std::size_t i = 0; i < query.size(); ++i) sim += query[i] * cs.keys[j][i];
    candidates.emplace_back(sim, j);
  }
  if (candidates.empty())
    raise(ErrorCode::NoKeyForClass, "class " + std::to_string(query_class));
  std::sort(candidates.begin(), candidates.end(),
            [](const auto& a, const auto& b) {
              if (a.first != b.first) return a.first < b.first;
              return a.second < b.second;
            });
  return candidates.front().second;
}

inline std::vector<RetrievalHit> oracle_topk(const Coreset& cs,
                                             const std::vector<double>& query, int k) {
  if (k < 1 || static_cast<std::size_t>(k) > cs.keys.size())
    raise(ErrorCode::KTooLarge, "K=" + std::to_string(k));
  std::vector<RetrievalHit> all;
  for (std::size_t j = 0; j < cs.keys.size(); ++j) {
    double sim = 0.0;
    for (std::size_t i = 0; i < query.size(); ++i) sim += query[i] * cs.keys[j][i];
    all.push_back({j, cs.key_class[j], sim});
  }
  std::sort(all.begin(), all.end(), [](const RetrievalHit& a, const RetrievalHit& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.key_index < b.key_index;
  });
  all.resize(static_cast<std::size_t>(k));
  return all;
}

using ExemplarSelector = std::function<std::vector<Exemplar>(const EmbeddingRecord&)>;

// Mean over test queries of the fraction of retrieved exemplars whose class
// matches the query's. Order-invariant by construction (plain mean).
inline double retrieval_purity(const ExemplarSelector& selector, const Dataset& test) {
  if (test.records.empty())
    raise(ErrorCode::ValidationError, "empty test set");
  double sum = 0.0;
  for (const auto& r : test.records) {
    const std::vector<Exemplar> picks = selector(r);
    if (picks.empty()) continue;
    std::size_t same = 0;
    for (const auto& e : picks)
      if (e.class_index == r.label) ++same;
    sum += static_cast<double>(same) / static_cast<double>(picks.size());
  }
  return sum / static_cast<double>(test.records.size());
}

}  // namespace micl
