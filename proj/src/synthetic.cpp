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

#include "relfsim/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "relfsim/embed.hpp"

namespace relfsim::synthetic {

namespace {

double gaussian(Rng& rng) {
  // Box-Muller; u1 kept away from 0.
  const double u1 = (static_cast<double>(rng.next() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace

std::vector<FeatureSentence> two_clique_corpus(std::size_t tokens_per_clique, std::size_t sentences,
                                               std::uint64_t seed) {
  Rng rng(seed);
  std::vector<FeatureSentence> out;
  out.reserve(sentences);
  for (std::size_t s = 0; s < sentences; ++s) {
    const char prefix = s % 2 == 0 ? 'a' : 'b';
    FeatureSentence sent{static_cast<ItemId>(s + 1), {}};
    for (std::size_t t = 0; t < tokens_per_clique; ++t) sent.tokens.push_back(prefix + std::to_string(t));
    for (std::size_t n = sent.tokens.size(); n > 1; --n) {
      std::swap(sent.tokens[n - 1], sent.tokens[static_cast<std::size_t>(rng.below(n))]);
    }
    out.push_back(std::move(sent));
  }
  return out;
}

MovieWorld movie_world(const MovieWorldConfig& config) {
  Rng rng(config.seed);
  MovieWorld world;
  const std::size_t pool = config.people_per_genre;

  auto person = [&](std::size_t genre) {
    std::size_t g = genre;
    if (rng.uniform() >= config.genre_purity) g = static_cast<std::size_t>(rng.below(config.genres));
    return "p" + std::to_string(g * pool + static_cast<std::size_t>(rng.below(pool)));
  };

  std::vector<double> quality(config.items);
  for (std::size_t i = 0; i < config.items; ++i) {
    const std::size_t genre = static_cast<std::size_t>(rng.below(config.genres));
    world.item_genre.push_back(genre);
    quality[i] = 0.3 * gaussian(rng);
    FeatureEntry e;
    e.directors.push_back(person(genre));
    e.screenwriters.push_back(person(genre));
    while (e.cast.size() < kMaxCast) {
      auto p = person(genre);
      if (std::find(e.cast.begin(), e.cast.end(), p) == e.cast.end()) e.cast.push_back(std::move(p));
    }
    world.catalog.entries.emplace(static_cast<ItemId>(i + 1), std::move(e));
  }

  std::vector<RatingRecord> records;
  std::vector<double> taste(config.genres);
  for (std::size_t u = 0; u < config.users; ++u) {
    for (auto& t : taste) t = config.taste_scale * gaussian(rng);
    const double bias = 0.3 * gaussian(rng);
    for (std::size_t i = 0; i < config.items; ++i) {
      if (rng.uniform() >= config.density) continue;
      double r = 3.0 + taste[world.item_genre[i]] + bias + quality[i] + config.noise * gaussian(rng);
      r = std::clamp(std::round(r), 1.0, 5.0);
      records.push_back({static_cast<UserId>(u + 1), static_cast<ItemId>(i + 1), r,
                         static_cast<std::int64_t>(records.size())});
    }
  }
  world.ratings = RatingDataset(std::move(records));
  return world;
}

}  // namespace relfsim::synthetic
