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

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "relfsim/ingest.hpp"
#include "relfsim/simcore.hpp"

namespace relfsim {

struct PredictionConfig {
  std::size_t k = 35;
  std::size_t min_neighbors = 1;
  bool clamp = true;
  SimilarityKind similarity = SimilarityKind::hybrid;

  void validate() const;
};

enum class PredictionDetail { full, item_mean_fallback, global_mean_fallback };

const char* to_string(PredictionDetail detail);

struct Prediction {
  double value = 0.0;
  PredictionDetail detail = PredictionDetail::full;
  std::size_t neighbors_used = 0;

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

/// Anything that can produce a rating estimate for (user, item).
class RatingPredictor {
 public:
  virtual ~RatingPredictor() = default;
  virtual Prediction predict(UserId user, ItemId item) const = 0;
};

struct Neighbor {
  ItemId item;
  double similarity;
  double rating;  ///< the user's rating of `item`
};

/// Item-based k-NN with mean-centered weighting:
///
///   r(u,i) = mean(i) + sum_j s(i,j) (r(u,j) - mean(j)) / sum_j s(i,j)
///
/// over the k items rated by u that are most similar to i. Only strictly
/// positive similarities are eligible, so the denominator is positive.
/// Means come from the training dataset passed in.
class KnnPredictor final : public RatingPredictor {
 public:
  KnnPredictor(const RatingDataset& train, const SimilarityProvider& similarity, PredictionConfig config);

  Prediction predict(UserId user, ItemId item) const override;

  /// Eligible neighbors of `item` among the user's rated items, ordered by
  /// similarity descending then item id, truncated to k.
  std::vector<Neighbor> neighborhood(UserId user, ItemId item) const;

  const PredictionConfig& config() const { return config_; }
  const RatingDataset& train() const { return train_; }

 private:
  std::vector<Neighbor> candidates(UserId user, ItemId item) const;

  const RatingDataset& train_;
  const SimilarityProvider& similarity_;
  PredictionConfig config_;
};

using UserItem = std::pair<UserId, ItemId>;

/// Element-wise predict; output order matches input. workers > 1 splits the
/// list into contiguous chunks.
std::vector<Prediction> predict_batch(const RatingPredictor& predictor, std::span<const UserItem> pairs,
                                      std::size_t workers = 1);

struct Recommendation {
  ItemId item;
  Prediction prediction;
};

/// Items from `universe` the user has not rated, full predictions first, each
/// group by predicted value descending then item id. A user without ratings
/// gets items ranked by their training mean (unrated items last).
std::vector<Recommendation> recommend_top_n(const KnnPredictor& predictor, UserId user, std::size_t n,
                                            std::span<const ItemId> universe);

}  // namespace relfsim
