#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "micl/embedding.hpp"
#include "micl/error.hpp"
#include "micl/rng.hpp"

namespace micl {

struct DecsConfig {
  int base_size = 50;       // B_size
  int base_epochs = 10;     // B_epoch
  int ref_size = 1000;      // N_ref
  double update_rate = 0.2;  // alpha
  int batch_size = 128;
  std::uint64_t seed = 0;
  int top_k = 5;

  void validate() const {
    if (base_size < 1 || base_epochs < 1 || ref_size < 1)
      raise(ErrorCode::ConfigError, "base parameters must be >= 1");
    if (update_rate < 0.0 || update_rate > 1.0)
      raise(ErrorCode::ConfigError, "update_rate must be in [0,1]");
    if (batch_size < 1) raise(ErrorCode::ConfigError, "batch_size must be >= 1");
    if (top_k < 1) raise(ErrorCode::ConfigError, "top_k must be >= 1");
  }
};

struct Sizing {
  int coreset_size = 0;  // S_c
  int epochs = 0;        // T_opt
};

/// Class-tagged prototype keys optimized over a normalized dataset.
struct Coreset {
  int dim = 0;
  int num_classes = 0;
  Sizing sizing;
  DecsConfig config;
  std::vector<std::vector<double>> keys;      // unit vectors, |keys| == S_c
  std::vector<int> key_class;                 // fixed at initialization
  std::vector<std::string> init_member_ids;   // seeding record id per key

  std::size_t size() const { return keys.size(); }
};

/// Hardest-positive assignment of one batch: (query, key) pairs plus the
/// per-key grouping used by the EMA step.
struct AssignmentBatch {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (query record idx, key idx)
  std::vector<std::vector<std::size_t>> by_key;            // key idx -> query record idxs
};

// S_c = floor(B_size * sqrt(N / N_ref)), T_opt = floor(B_epoch * sqrt(N_ref / N)),
// both clamped to at least 1. When the class count is known, S_c is additionally
// clamped to it so class balance stays satisfiable.
inline Sizing adaptive_size(std::size_t n, const DecsConfig& cfg, int num_classes = 0) {
  if (n < 1) raise(ErrorCode::ValidationError, "dataset size must be >= 1");
  cfg.validate();
  const double ratio = static_cast<double>(n) / static_cast<double>(cfg.ref_size);
  int s_c = static_cast<int>(std::floor(cfg.base_size * std::sqrt(ratio)));
  int t_opt = static_cast<int>(std::floor(cfg.base_epochs * std::sqrt(1.0 / ratio)));
  s_c = std::max(s_c, 1);
  t_opt = std::max(t_opt, 1);
  if (num_classes > 0) s_c = std::max(s_c, num_classes);
  return Sizing{s_c, t_opt};
}

namespace detail {

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Per-class key quotas: floor(S_c / C) each, remainder one-by-one to the
// classes with the most training records, ties broken by ascending class index.
inline std::vector<int> class_quotas(const std::vector<std::size_t>& class_counts,
                                     int coreset_size) {
  const int c = static_cast<int>(class_counts.size());
  std::vector<int> quota(static_cast<std::size_t>(c), coreset_size / c);
  int remainder = coreset_size - (coreset_size / c) * c;
  std::vector<int> order(static_cast<std::size_t>(c));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return class_counts[static_cast<std::size_t>(a)] >
           class_counts[static_cast<std::size_t>(b)];
  });
  for (int i = 0; i < remainder; ++i) ++quota[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
  return quota;
}

}  // namespace detail

// Random class-balanced initialization. Keys copy member vectors, sampled
// without replacement within each class (with replacement only when a class
// has fewer members than its quota). Classes are processed in ascending
// order from a single rng stream, so the result is a pure function of seed.
inline Coreset init_coreset(const Dataset& ds, const Sizing& sizing,
                            const DecsConfig& cfg, Rng& rng) {
  if (!is_normalized(ds))
    raise(ErrorCode::ValidationError, "init_coreset requires a normalized dataset");
  if (sizing.coreset_size < ds.num_classes)
    raise(ErrorCode::QuotaUnsatisfiable,
          "S_c=" + std::to_string(sizing.coreset_size) + " below num_classes=" +
              std::to_string(ds.num_classes));

  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(ds.num_classes));
  for (std::size_t i = 0; i < ds.records.size(); ++i)
    members[static_cast<std::size_t>(ds.records[i].label)].push_back(i);

  std::vector<std::size_t> counts;
  counts.reserve(members.size());
  for (const auto& m : members) counts.push_back(m.size());
  const std::vector<int> quota = detail::class_quotas(counts, sizing.coreset_size);

  Coreset cs;
  cs.dim = ds.dim;
  cs.num_classes = ds.num_classes;
  cs.sizing = sizing;
  cs.config = cfg;
  cs.keys.reserve(static_cast<std::size_t>(sizing.coreset_size));

  for (int c = 0; c < ds.num_classes; ++c) {
    const auto& pool = members[static_cast<std::size_t>(c)];
    const int q = quota[static_cast<std::size_t>(c)];
    if (pool.empty())
      raise(ErrorCode::QuotaUnsatisfiable, "class " + std::to_string(c) + " has no members");
    std::vector<std::size_t> chosen;
    if (pool.size() >= static_cast<std::size_t>(q)) {
      std::vector<std::size_t> copy = pool;
      rng.shuffle(copy);
      chosen.assign(copy.begin(), copy.begin() + q);
    } else {
      for (int i = 0; i < q; ++i)
        chosen.push_back(pool[static_cast<std::size_t>(rng.bounded(pool.size()))]);
    }
    for (std::size_t idx : chosen) {
      cs.keys.push_back(ds.records[idx].vec);
      cs.key_class.push_back(c);
      cs.init_member_ids.push_back(ds.records[idx].id);
    }
  }
  return cs;
}

inline Coreset init_coreset(const Dataset& ds, const Sizing& sizing,
                            const DecsConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  return init_coreset(ds, sizing, cfg, rng);
}

// Hardest positive: the same-class key with the LOWEST inner product to the
// query. Ties go to the lowest key index.
inline std::size_t assign_hardest_positive(const std::vector<double>& query,
                                           int query_class, const Coreset& cs) {
  bool found = false;
  std::size_t best = 0;
  double best_sim = 0.0;
  for (std::size_t j = 0; j < cs.keys.size(); ++j) {
    if (cs.key_class[j] != query_class) continue;
    const double sim = detail::dot(query, cs.keys[j]);
    if (!found || sim < best_sim) {
      found = true;
      best = j;
      best_sim = sim;
    }
  }
  if (!found)
    raise(ErrorCode::NoKeyForClass,
          "coreset has no key for class " + std::to_string(query_class));
  return best;
}

inline AssignmentBatch build_assignment_batch(const Dataset& ds,
                                              const std::vector<std::size_t>& query_idxs,
                                              const Coreset& cs) {
  AssignmentBatch batch;
  batch.pairs.reserve(query_idxs.size());
  batch.by_key.assign(cs.keys.size(), {});
  for (std::size_t qi : query_idxs) {
    const auto& r = ds.records[qi];
    const std::size_t j = assign_hardest_positive(r.vec, r.label, cs);
    batch.pairs.emplace_back(qi, j);
    batch.by_key[j].push_back(qi);
  }
  return batch;
}

struct EmaStats {
  std::vector<std::size_t> degenerate_keys;  // blends with norm < 1e-12, left unchanged
};

// One EMA step over a batch: for every key with assigned queries,
//   k <- normalize((1 - alpha) * k + alpha * mean(assigned query vectors)).
// alpha == 0 leaves the coreset bit-identical (the blend reduces to the key
// itself, which is already unit norm). Keys without assignments are untouched.
inline Coreset ema_update(Coreset cs, const AssignmentBatch& batch, const Dataset& ds,
                          double alpha, EmaStats* stats = nullptr) {
  if (alpha < 0.0 || alpha > 1.0)
    raise(ErrorCode::ValidationError, "alpha must be in [0,1]");
  if (batch.by_key.size() != cs.keys.size())
    raise(ErrorCode::ValidationError, "assignment batch does not match coreset");
  if (alpha == 0.0) return cs;

  const std::size_t d = static_cast<std::size_t>(cs.dim);
  std::vector<double> mean(d);
  for (std::size_t j = 0; j < cs.keys.size(); ++j) {
    const auto& assigned = batch.by_key[j];
    if (assigned.empty()) continue;

    std::fill(mean.begin(), mean.end(), 0.0);
    for (std::size_t qi : assigned)
      for (std::size_t i = 0; i < d; ++i) mean[i] += ds.records[qi].vec[i];
    const double inv = 1.0 / static_cast<double>(assigned.size());

    std::vector<double>& key = cs.keys[j];
    std::vector<double> blend(d);
    for (std::size_t i = 0; i < d; ++i)
      blend[i] = (1.0 - alpha) * key[i] + alpha * mean[i] * inv;

    const double norm = l2_norm(blend);
    if (norm < 1e-12) {
      if (stats) stats->degenerate_keys.push_back(j);
      continue;  // exactly antipodal blend; key stays as it was
    }
    for (std::size_t i = 0; i < d; ++i) key[i] = blend[i] / norm;
  }
  return cs;
}

struct OptimizeStats {
  std::size_t query_pool_size = 0;
  std::size_t degenerate_updates = 0;
};

// Full DECS optimization: adaptive sizing, class-balanced init, then T_opt
// epochs over the untapped query pool (every record whose id did not seed a
// key). Each epoch reshuffles the pool and applies one EMA step per batch.
// Deterministic: a single rng stream seeded with cfg.seed drives both the
// initialization and every epoch shuffle.
inline Coreset optimize(const Dataset& ds, const DecsConfig& cfg,
                        OptimizeStats* stats = nullptr) {
  cfg.validate();
  validate_dataset(ds);
  if (!is_normalized(ds))
    raise(ErrorCode::ValidationError, "optimize requires a normalized dataset");

  const Sizing sizing = adaptive_size(ds.size(), cfg, ds.num_classes);
  Rng rng(cfg.seed);
  Coreset cs = init_coreset(ds, sizing, cfg, rng);

  std::unordered_set<std::string> seeded(cs.init_member_ids.begin(),
                                         cs.init_member_ids.end());
  std::vector<std::size_t> pool;
  pool.reserve(ds.size());
  for (std::size_t i = 0; i < ds.records.size(); ++i)
    if (!seeded.count(ds.records[i].id)) pool.push_back(i);
  if (pool.empty())
    raise(ErrorCode::EmptyQueryPool, "every record seeded a key; nothing to optimize");
  if (stats) stats->query_pool_size = pool.size();

  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 0; epoch < sizing.epochs; ++epoch) {
    rng.shuffle(pool);
    for (std::size_t start = 0; start < pool.size(); start += bs) {
      const std::size_t end = std::min(start + bs, pool.size());
      const std::vector<std::size_t> batch_idxs(pool.begin() + static_cast<std::ptrdiff_t>(start),
                                                pool.begin() + static_cast<std::ptrdiff_t>(end));
      const AssignmentBatch batch = build_assignment_batch(ds, batch_idxs, cs);
      EmaStats ema_stats;
      cs = ema_update(std::move(cs), batch, ds, cfg.update_rate, &ema_stats);
      if (stats) stats->degenerate_updates += ema_stats.degenerate_keys.size();
    }
  }
  return cs;
}

struct RetrievalHit {
  std::size_t key_index = 0;
  int key_class = 0;
  double similarity = 0.0;
};

// Exact top-K scan by cosine similarity (keys and query are unit norm, so the
// inner product is the cosine). Descending similarity, ties by ascending index.
inline std::vector<RetrievalHit> retrieve_topk(const Coreset& cs,
                                               const std::vector<double>& query,
                                               int k) {
  if (k < 1 || static_cast<std::size_t>(k) > cs.keys.size())
    raise(ErrorCode::KTooLarge, "K=" + std::to_string(k) + " outside [1, " +
                                    std::to_string(cs.keys.size()) + "]");
  std::vector<RetrievalHit> hits;
  hits.reserve(cs.keys.size());
  for (std::size_t j = 0; j < cs.keys.size(); ++j)
    hits.push_back({j, cs.key_class[j], detail::dot(query, cs.keys[j])});
  std::partial_sort(hits.begin(), hits.begin() + k, hits.end(),
                    [](const RetrievalHit& a, const RetrievalHit& b) {
                      if (a.similarity != b.similarity) return a.similarity > b.similarity;
                      return a.key_index < b.key_index;
                    });
  hits.resize(static_cast<std::size_t>(k));
  return hits;
}

inline Json decs_config_to_json(const DecsConfig& c) {
  return Json{{"base_size", c.base_size},   {"base_epochs", c.base_epochs},
              {"ref_size", c.ref_size},     {"update_rate", c.update_rate},
              {"batch_size", c.batch_size}, {"seed", c.seed},
              {"top_k", c.top_k}};
}

inline DecsConfig decs_config_from_json(const Json& j) {
  DecsConfig c;
  c.base_size = j.at("base_size").get<int>();
  c.base_epochs = j.at("base_epochs").get<int>();
  c.ref_size = j.at("ref_size").get<int>();
  c.update_rate = j.at("update_rate").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.top_k = j.at("top_k").get<int>();
  return c;
}

inline void save_coreset(const Coreset& cs, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) raise(ErrorCode::IoError, "cannot write " + path);
  Json j{{"dim", cs.dim},
         {"num_classes", cs.num_classes},
         {"sizing", {cs.sizing.coreset_size, cs.sizing.epochs}},
         {"config", decs_config_to_json(cs.config)},
         {"keys", cs.keys},
         {"key_class", cs.key_class},
         {"init_member_ids", cs.init_member_ids}};
  out << j.dump(2) << "\n";
  if (!out.good()) raise(ErrorCode::IoError, "write failed for " + path);
}

inline Coreset load_coreset(const std::string& path) {
  if (!std::filesystem::exists(path))
    raise(ErrorCode::FileMissing, "coreset file not found: " + path);
  std::ifstream in(path);
  if (!in) raise(ErrorCode::IoError, "cannot open " + path);
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    raise(ErrorCode::ParseError, path + ": " + e.what());
  }
  Coreset cs;
  try {
    cs.dim = j.at("dim").get<int>();
    cs.num_classes = j.at("num_classes").get<int>();
    cs.sizing.coreset_size = j.at("sizing").at(0).get<int>();
    cs.sizing.epochs = j.at("sizing").at(1).get<int>();
    cs.config = decs_config_from_json(j.at("config"));
    cs.keys = j.at("keys").get<std::vector<std::vector<double>>>();
    cs.key_class = j.at("key_class").get<std::vector<int>>();
    cs.init_member_ids = j.at("init_member_ids").get<std::vector<std::string>>();
  } catch (const Json::exception& e) {
    raise(ErrorCode::ParseError, path + ": " + e.what());
  }
  if (cs.keys.size() != cs.key_class.size() ||
      cs.keys.size() != cs.init_member_ids.size())
    raise(ErrorCode::InvariantViolation, path + ": key arrays disagree in length");
  for (const auto& k : cs.keys)
    if (static_cast<int>(k.size()) != cs.dim)
      raise(ErrorCode::InvariantViolation, path + ": key dimension mismatch");
  return cs;
}

}  // namespace micl
