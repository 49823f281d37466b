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

#include "relfsim/predict.hpp"

#include <algorithm>
#include <thread>

#include "relfsim/error.hpp"

namespace relfsim {

namespace {

bool neighbor_order(const Neighbor& a, const Neighbor& b) {
  return a.similarity != b.similarity ? a.similarity > b.similarity : a.item < b.item;
}

}  // namespace

void PredictionConfig::validate() const {
  if (k < 1) throw ContractError("k must be >= 1");
  if (min_neighbors < 1) throw ContractError("min_neighbors must be >= 1");
}

const char* to_string(PredictionDetail detail) {
  switch (detail) {
    case PredictionDetail::full: return "full";
    case PredictionDetail::item_mean_fallback: return "item-mean-fallback";
    case PredictionDetail::global_mean_fallback: return "global-mean-fallback";
  }
  return "?";
}

KnnPredictor::KnnPredictor(const RatingDataset& train, const SimilarityProvider& similarity, PredictionConfig config)
    : train_(train), similarity_(similarity), config_(config) {
  config_.validate();
}

std::vector<Neighbor> KnnPredictor::candidates(UserId user, ItemId item) const {
  std::vector<Neighbor> out;
  for (const auto& [j, r] : train_.user_ratings(user)) {
    if (j == item) continue;
    auto s = similarity_.similarity(item, j);
    if (s && s->value > 0.0) out.push_back({j, s->value, r});
  }
  return out;
}

std::vector<Neighbor> KnnPredictor::neighborhood(UserId user, ItemId item) const {
  auto out = candidates(user, item);
  const std::size_t keep = std::min(config_.k, out.size());
  std::partial_sort(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(keep), out.end(), neighbor_order);
  out.resize(keep);
  return out;
}

Prediction KnnPredictor::predict(UserId user, ItemId item) const {
  const auto& scale = train_.scale();
  auto finish = [&](double v, PredictionDetail d, std::size_t used) {
    return Prediction{config_.clamp ? scale.clamp(v) : v, d, used};
  };
  const bool item_known = train_.has_item(item);
  if (!train_.has_user(user)) return finish(train_.global_mean(), PredictionDetail::global_mean_fallback, 0);

  const auto nbrs = neighborhood(user, item);
  if (nbrs.size() < config_.min_neighbors) {
    if (item_known) return finish(train_.item_mean(item), PredictionDetail::item_mean_fallback, 0);
    return finish(train_.global_mean(), PredictionDetail::global_mean_fallback, 0);
  }
  double num = 0.0, den = 0.0;
  for (const auto& n : nbrs) {
    num += n.similarity * (n.rating - train_.item_mean(n.item));
    den += n.similarity;
  }
  const double anchor = item_known ? train_.item_mean(item) : train_.global_mean();
  return finish(anchor + num / den, PredictionDetail::full, nbrs.size());
}

std::vector<Prediction> predict_batch(const RatingPredictor& predictor, std::span<const UserItem> pairs,
                                      std::size_t workers) {
  std::vector<Prediction> out(pairs.size());
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(1, pairs.size()));
  auto run = [&](std::size_t begin, std::size_t end) {
    for (std::size_t x = begin; x < end; ++x) out[x] = predictor.predict(pairs[x].first, pairs[x].second);
  };
  if (workers == 1) {
    run(0, pairs.size());
    return out;
  }
  const std::size_t chunk = (pairs.size() + workers - 1) / workers;
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(pairs.size(), begin + chunk);
    if (begin < end) pool.emplace_back(run, begin, end);
  }
  pool.clear();
  return out;
}

std::vector<Recommendation> recommend_top_n(const KnnPredictor& predictor, UserId user, std::size_t n,
                                            std::span<const ItemId> universe) {
  if (n < 1) throw ContractError("recommend_top_n: n must be >= 1");
  const auto& train = predictor.train();
  std::vector<ItemId> rated;
  for (const auto& e : train.user_ratings(user)) rated.push_back(e.id);

  std::vector<Recommendation> recs;
  for (ItemId item : universe) {
    if (std::binary_search(rated.begin(), rated.end(), item)) continue;
    if (!train.has_user(user)) {
      const bool known = train.has_item(item);
      recs.push_back({item, {known ? train.item_mean(item) : train.global_mean(),
                             known ? PredictionDetail::item_mean_fallback : PredictionDetail::global_mean_fallback, 0}});
    } else {
      recs.push_back({item, predictor.predict(user, item)});
    }
  }
  auto rank = [](const Recommendation& r) {
    return r.prediction.detail == PredictionDetail::full ? 0 : (r.prediction.detail == PredictionDetail::item_mean_fallback ? 1 : 2);
  };
  std::sort(recs.begin(), recs.end(), [&](const Recommendation& a, const Recommendation& b) {
    if (rank(a) != rank(b)) return rank(a) < rank(b);
    if (a.prediction.value != b.prediction.value) return a.prediction.value > b.prediction.value;
    return a.item < b.item;
  });
  // Duplicates in the universe collapse to one entry.
  recs.erase(std::unique(recs.begin(), recs.end(), [](const auto& a, const auto& b) { return a.item == b.item; }),
             recs.end());
  if (recs.size() > n) recs.resize(n);
  return recs;
}

}  // namespace relfsim
