#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

#include "micl/embedding.hpp"
#include "micl/error.hpp"
#include "micl/rng.hpp"

namespace micl {

// Gaussian clusters on the unit sphere, corrupted along a few nuisance axes
// SHARED across classes. The shared axes degrade raw nearest-neighbor
// retrieval while leaving the class means separable, which is the regime the
// coreset optimizer is supposed to win in.
struct SynthSpec {
  int num_classes = 8;
  int dim = 64;
  int per_class = 250;  // per-class training-set size; the test split is a further 25%
  double spread = 0.2;
  int noise_axes = 4;
  double noise_mag = 0.2;
  double min_separation_deg = 30.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (num_classes < 1 || dim < 1 || per_class < 1)
      raise(ErrorCode::ConfigError, "counts must be positive");
    if (spread < 0.0 || noise_mag < 0.0)
      raise(ErrorCode::ConfigError, "magnitudes must be >= 0");
    if (noise_axes < 0) raise(ErrorCode::ConfigError, "noise_axes must be >= 0");
    if (min_separation_deg <= 0.0 || min_separation_deg >= 180.0)
      raise(ErrorCode::ConfigError, "min_separation_deg must be in (0, 180)");
  }
};

namespace detail {

inline std::vector<double> random_unit_vector(Rng& rng, int dim) {
  std::vector<double> v(static_cast<std::size_t>(dim));
  for (;;) {
    for (double& x : v) x = rng.gaussian();
    const double n = l2_norm(v);
    if (n > 1e-12) {
      for (double& x : v) x /= n;
      return v;
    }
  }
}

}  // namespace detail

// Deterministic per seed. Produces an 80/20 train/test split, stratified per
// class with rounding, so e.g. 8 classes x 250/class yields exactly 2000
// train and 500 test records. Ids are "s<i>", image refs "synth://s<i>".
inline std::pair<Dataset, Dataset> generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);

  // Class means with minimum pairwise angular separation, by rejection.
  const double max_dot = std::cos(spec.min_separation_deg * M_PI / 180.0);
  std::vector<std::vector<double>> means;
  for (int c = 0; c < spec.num_classes; ++c) {
    bool placed = false;
    for (int attempt = 0; attempt < 10000 && !placed; ++attempt) {
      std::vector<double> m = detail::random_unit_vector(rng, spec.dim);
      bool ok = true;
      for (const auto& other : means) {
        double d = 0.0;
        for (int i = 0; i < spec.dim; ++i)
          d += m[static_cast<std::size_t>(i)] * other[static_cast<std::size_t>(i)];
        if (d > max_dot) {
          ok = false;
          break;
        }
      }
      if (ok) {
        means.push_back(std::move(m));
        placed = true;
      }
    }
    if (!placed)
      raise(ErrorCode::SeparationUnsatisfiable,
            std::to_string(spec.num_classes) + " classes at " +
                std::to_string(spec.min_separation_deg) + " deg do not fit in dim " +
                std::to_string(spec.dim));
  }

  std::vector<std::vector<double>> axes;
  for (int a = 0; a < spec.noise_axes; ++a)
    axes.push_back(detail::random_unit_vector(rng, spec.dim));

  // Total population sized so the 80% train side holds per_class per class.
  const std::size_t total = static_cast<std::size_t>(std::llround(
      static_cast<double>(spec.num_classes) * spec.per_class / 0.8));
  std::vector<EmbeddingRecord> pool;
  pool.reserve(total);
  for (std::size_t i = 0; i < total; ++i) {
    const int c = static_cast<int>(i % static_cast<std::size_t>(spec.num_classes));
    EmbeddingRecord r;
    r.id = "s" + std::to_string(i);
    r.image_ref = "synth://" + r.id;
    r.label = c;
    r.vec.resize(static_cast<std::size_t>(spec.dim));
    for (int k = 0; k < spec.dim; ++k)
      r.vec[static_cast<std::size_t>(k)] =
          means[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)] +
          spec.spread * rng.gaussian();
    for (const auto& axis : axes) {
      const double g = spec.noise_mag * rng.gaussian();
      for (int k = 0; k < spec.dim; ++k)
        r.vec[static_cast<std::size_t>(k)] += g * axis[static_cast<std::size_t>(k)];
    }
    const double n = l2_norm(r.vec);
    if (n < 1e-12)
      raise(ErrorCode::ZeroVector, "degenerate sample " + r.id);
    for (double& x : r.vec) x /= n;
    pool.push_back(std::move(r));
  }

  // Stratified 80/20 split: round(0.2 * n_c) per class to test (at least one).
  std::vector<std::vector<std::size_t>> by_class(
      static_cast<std::size_t>(spec.num_classes));
  for (std::size_t i = 0; i < pool.size(); ++i)
    by_class[static_cast<std::size_t>(pool[i].label)].push_back(i);

  std::vector<int> side(pool.size(), 0);  // 0 = train, 1 = test
  for (auto& members : by_class) {
    if (members.size() < 2)
      raise(ErrorCode::ValidationError,
            "class too small to appear in both train and test splits");
    rng.shuffle(members);
    std::size_t n_test = static_cast<std::size_t>(
        std::llround(0.2 * static_cast<double>(members.size())));
    n_test = std::clamp<std::size_t>(n_test, 1, members.size() - 1);
    for (std::size_t i = 0; i < n_test; ++i) side[members[i]] = 1;
  }

  Dataset train, test;
  train.dim = test.dim = spec.dim;
  train.num_classes = test.num_classes = spec.num_classes;
  for (std::size_t i = 0; i < pool.size(); ++i)
    (side[i] == 0 ? train : test).records.push_back(pool[i]);

  validate_dataset(train);
  validate_dataset(test);
  return {std::move(train), std::move(test)};
}

}  // namespace micl
