/*
 * Copyright 2026 The relfsim Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Naive reference implementations used only by tests. They work on dense
// matrices (0 = unrated) and share no code with the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <random>
#include <vector>

#include "relfsim/ingest.hpp"

namespace oracle {

using Dense = std::vector<std::vector<double>>;  // [user][item], 0 = missing

inline std::optional<double> naive_rating_cosine(const Dense& r, std::size_t i, std::size_t j) {
  double num = 0, ni = 0, nj = 0;
  int both = 0;
  for (const auto& row : r) {
    if (row[i] != 0 && row[j] != 0) {
      num += row[i] * row[j];
      ni += row[i] * row[i];
      nj += row[j] * row[j];
      ++both;
    }
  }
  if (both == 0) return std::nullopt;
  return num / (std::sqrt(ni) * std::sqrt(nj));
}

inline std::optional<double> item_mean(const Dense& r, std::size_t i) {
  double s = 0;
  int n = 0;
  for (const auto& row : r) {
    if (row[i] != 0) {
      s += row[i];
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return s / n;
}

/// Mean-centered k-NN over positive rating-cosine neighbors; no clamping,
/// one neighbor suffices.
inline std::optional<double> naive_predict(const Dense& r, std::size_t u, std::size_t i, std::size_t k) {
  struct Cand {
    double sim;
    std::size_t j;
  };
  std::vector<Cand> cands;
  for (std::size_t j = 0; j < r[u].size(); ++j) {
    if (j == i || r[u][j] == 0) continue;
    auto s = naive_rating_cosine(r, i, j);
    if (s && *s > 0) cands.push_back({*s, j});
  }
  if (cands.empty()) return std::nullopt;
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.sim != b.sim) return a.sim > b.sim;
    return a.j < b.j;
  });
  if (cands.size() > k) cands.resize(k);
  double num = 0, den = 0;
  for (const auto& c : cands) {
    num += c.sim * (r[u][c.j] - *item_mean(r, c.j));
    den += c.sim;
  }
  return num / den + *item_mean(r, i);
}

/// Random integer ratings 1..5 at the given density. Ids are index + 1.
inline Dense random_dense(std::mt19937_64& rng, std::size_t users, std::size_t items, double density) {
  std::uniform_real_distribution<double> coin(0, 1);
  std::uniform_int_distribution<int> star(1, 5);
  Dense r(users, std::vector<double>(items, 0.0));
  for (auto& row : r) {
    for (auto& x : row) {
      if (coin(rng) < density) x = star(rng);
    }
  }
  return r;
}

inline relfsim::RatingDataset to_dataset(const Dense& r) {
  std::vector<relfsim::RatingRecord> recs;
  for (std::size_t u = 0; u < r.size(); ++u) {
    for (std::size_t i = 0; i < r[u].size(); ++i) {
      if (r[u][i] != 0) {
        recs.push_back({static_cast<relfsim::UserId>(u + 1), static_cast<relfsim::ItemId>(i + 1), r[u][i], 0});
      }
    }
  }
  return relfsim::RatingDataset(std::move(recs));
}

inline double log_sigmoid(double x) { return -std::log1p(std::exp(-x)); }

/// Negative SGNS objective for one (center, context) pair.
inline double sgns_loss(const std::vector<double>& center, const std::vector<double>& context,
                        const std::vector<std::vector<double>>& negatives) {
  auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
  };
  double obj = log_sigmoid(dot(context, center));
  for (const auto& n : negatives) obj += log_sigmoid(-dot(n, center));
  return -obj;
}

/// Relative error with an absolute floor for near-zero reference values.
inline double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(1e-3, std::abs(want));
}

}  // namespace oracle
