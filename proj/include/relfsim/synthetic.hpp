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
#include <cstdint>
#include <vector>

#include "relfsim/ingest.hpp"

namespace relfsim::synthetic {

/// Two disjoint groups of tokens ("a0".."a{n-1}" and "b0".."b{n-1}"); each
/// sentence is a shuffled copy of one group, groups alternating.
std::vector<FeatureSentence> two_clique_corpus(std::size_t tokens_per_clique, std::size_t sentences,
                                               std::uint64_t seed);

struct MovieWorldConfig {
  std::size_t users = 500;
  std::size_t items = 300;
  std::size_t genres = 6;
  std::size_t people_per_genre = 20;
  /// Probability that a credited person comes from the item's own genre.
  double genre_purity = 0.85;
  /// Expected fraction of items each user rates.
  double density = 0.2;
  double taste_scale = 1.0;
  double noise = 0.5;
  std::uint64_t seed = 7;
};

/// Ratings driven by per-user genre taste, with credits (director,
/// screenwriter, 12 cast) drawn mostly from the item's genre pool, so content
/// similarity is informative about ratings.
struct MovieWorld {
  RatingDataset ratings;
  FeatureCatalog catalog;
  std::vector<std::size_t> item_genre;  ///< indexed by item id - 1
};

MovieWorld movie_world(const MovieWorldConfig& config = {});

}  // namespace relfsim::synthetic
