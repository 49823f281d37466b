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

#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>

#include "oracles.hpp"
#include "relfsim/error.hpp"
#include "relfsim/predict.hpp"
#include "relfsim/synthetic.hpp"

using namespace relfsim;

namespace {

/// Fixed similarity table for hand-built cases.
class TableSimilarity final : public SimilarityProvider {
 public:
  void set(ItemId i, ItemId j, double v) { values_[{std::min(i, j), std::max(i, j)}] = v; }
  std::optional<SimilarityValue> similarity(ItemId i, ItemId j) const override {
    auto it = values_.find({std::min(i, j), std::max(i, j)});
    if (it == values_.end()) return std::nullopt;
    return SimilarityValue{it->second, 1, SimilaritySource::rating};
  }

 private:
  std::map<std::pair<ItemId, ItemId>, double> values_;
};

PredictionConfig raw_config(std::size_t k = 35) {
  PredictionConfig c;
  c.k = k;
  c.min_neighbors = 1;
  c.clamp = false;
  return c;
}

}  // namespace

TEST_SUITE("predict") {
  TEST_CASE("homogeneous neighborhood") {
    std::vector<RatingRecord> recs{{1, 2, 4, 0}, {1, 3, 4, 0}, {2, 1, 4, 0}, {2, 2, 4, 0}, {2, 3, 4, 0}};
    RatingDataset ds(recs);
    TableSimilarity sim;
    sim.set(1, 2, 1.0);
    sim.set(1, 3, 1.0);
    KnnPredictor p(ds, sim, raw_config());
    auto pred = p.predict(1, 1);
    CHECK(pred.value == doctest::Approx(4.0));
    CHECK(pred.detail == PredictionDetail::full);
    CHECK(pred.neighbors_used == 2);
  }

  TEST_CASE("hand-evaluated weighted mean-centered prediction") {
    // u=1 rated j1=2 (5) and j2=3 (2). Means: item2 = 4, item3 = 3, item1 = 3.5.
    std::vector<RatingRecord> recs{{1, 2, 5, 0}, {1, 3, 2, 0}, {2, 2, 3, 0}, {2, 3, 4, 0},
                                   {3, 3, 3, 0}, {2, 1, 3, 0}, {3, 1, 4, 0}};
    RatingDataset ds(recs);
    REQUIRE(ds.item_mean(2) == 4.0);
    REQUIRE(ds.item_mean(3) == 3.0);
    REQUIRE(ds.item_mean(1) == 3.5);
    TableSimilarity sim;
    sim.set(1, 2, 0.8);
    sim.set(1, 3, 0.4);
    KnnPredictor p(ds, sim, raw_config());
    CHECK(std::abs(p.predict(1, 1).value - 3.833333333333) <= 1e-9);
  }

  TEST_CASE("fallback chain") {
    std::vector<RatingRecord> recs{{1, 1, 5, 0}, {2, 2, 1, 0}, {2, 1, 3, 0}};
    RatingDataset ds(recs);
    TableSimilarity sim;  // nothing similar
    KnnPredictor p(ds, sim, raw_config());

    auto item_fb = p.predict(1, 2);
    CHECK(item_fb.detail == PredictionDetail::item_mean_fallback);
    CHECK(item_fb.value == ds.item_mean(2));

    auto unknown_item = p.predict(1, 77);
    CHECK(unknown_item.detail == PredictionDetail::global_mean_fallback);
    CHECK(unknown_item.value == doctest::Approx(ds.global_mean()));

    auto unknown_both = p.predict(99, 77);
    CHECK(unknown_both.detail == PredictionDetail::global_mean_fallback);

    auto unknown_user = p.predict(99, 1);
    CHECK(unknown_user.detail == PredictionDetail::global_mean_fallback);
  }

  TEST_CASE("cold item uses global mean as anchor when neighbors exist") {
    std::vector<RatingRecord> recs{{1, 1, 5, 0}, {2, 1, 3, 0}, {2, 2, 2, 0}};
    RatingDataset ds(recs);
    TableSimilarity sim;
    sim.set(9, 1, 0.5);
    KnnPredictor p(ds, sim, raw_config());
    auto pred = p.predict(1, 9);
    CHECK(pred.detail == PredictionDetail::full);
    CHECK(pred.value == doctest::Approx(ds.global_mean() + (5.0 - 4.0)));
  }

  TEST_CASE("min_neighbors and clamping") {
    std::vector<RatingRecord> recs{{1, 2, 5, 0}, {2, 2, 1, 0}, {2, 1, 5, 0}, {3, 1, 5, 0}};
    RatingDataset ds(recs);
    TableSimilarity sim;
    sim.set(1, 2, 0.9);
    auto cfg = raw_config();
    cfg.min_neighbors = 2;
    CHECK(KnnPredictor(ds, sim, cfg).predict(1, 1).detail == PredictionDetail::item_mean_fallback);

    // mean(1) = 5, user is +2 above mean(2) = 3 -> 7 unclamped.
    auto raw = KnnPredictor(ds, sim, raw_config()).predict(1, 1);
    CHECK(raw.value == doctest::Approx(7.0));
    auto clamped_cfg = raw_config();
    clamped_cfg.clamp = true;
    CHECK(KnnPredictor(ds, sim, clamped_cfg).predict(1, 1).value == 5.0);

    auto bad = raw_config();
    bad.k = 0;
    CHECK_THROWS_AS(KnnPredictor(ds, sim, bad), ContractError);
  }

  TEST_CASE("ties broken by ascending item id and non-positive similarities ignored") {
    std::vector<RatingRecord> recs;
    for (ItemId j = 2; j <= 6; ++j) recs.push_back({1, j, double(j % 5 + 1), 0});
    recs.push_back({2, 1, 3, 0});
    RatingDataset ds(recs);
    TableSimilarity sim;
    sim.set(1, 2, 0.5);
    sim.set(1, 3, 0.7);
    sim.set(1, 4, 0.5);
    sim.set(1, 5, 0.0);
    sim.set(1, 6, -0.9);
    KnnPredictor p(ds, sim, raw_config(2));
    auto n = p.neighborhood(1, 1);
    REQUIRE(n.size() == 2);
    CHECK(n[0].item == 3);
    CHECK(n[1].item == 2);
    CHECK(KnnPredictor(ds, sim, raw_config()).neighborhood(1, 1).size() == 3);
  }

  TEST_CASE("prediction equals the naive evaluation on random dense 8x8 matrices") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 50; ++trial) {
      auto dense = oracle::random_dense(rng, 8, 8, 1.0);
      auto ds = oracle::to_dataset(dense);
      RatingSimilarity sim(ds);
      const std::size_t k = 1 + trial % 7;
      KnnPredictor p(ds, sim, raw_config(k));
      for (std::size_t u = 0; u < 8; ++u) {
        for (std::size_t i = 0; i < 8; ++i) {
          auto want = oracle::naive_predict(dense, u, i, k);
          auto got = p.predict(UserId(u + 1), ItemId(i + 1));
          REQUIRE(want.has_value());
          CHECK(got.detail == PredictionDetail::full);
          CHECK(std::abs(got.value - *want) <= 1e-12);
        }
      }
    }
  }

  TEST_CASE("property: neighborhoods are prefixes across k") {
    auto w = synthetic::movie_world({.users = 60, .items = 50, .seed = 5});
    RatingSimilarity sim(w.ratings);
    for (UserId u = 1; u <= 10; ++u) {
      for (ItemId i = 1; i <= 50; i += 7) {
        auto small = KnnPredictor(w.ratings, sim, raw_config(3)).neighborhood(u, i);
        auto large = KnnPredictor(w.ratings, sim, raw_config(9)).neighborhood(u, i);
        REQUIRE(small.size() <= large.size());
        for (std::size_t x = 0; x < small.size(); ++x) CHECK(small[x].item == large[x].item);
      }
    }
  }

  TEST_CASE("property: clamped predictions stay on the scale") {
    auto w = synthetic::movie_world({.users = 40, .items = 30, .seed = 6});
    RatingSimilarity sim(w.ratings);
    PredictionConfig cfg;
    cfg.k = 5;
    KnnPredictor p(w.ratings, sim, cfg);
    for (UserId u = 1; u <= 40; ++u) {
      for (ItemId i = 1; i <= 30; ++i) {
        auto v = p.predict(u, i).value;
        CHECK(v >= 1.0);
        CHECK(v <= 5.0);
      }
    }
  }

  TEST_CASE("property: removing a non-positive candidate never changes the output") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> val(-1, 1);
    for (int trial = 0; trial < 30; ++trial) {
      auto dense = oracle::random_dense(rng, 6, 6, 1.0);
      auto ds = oracle::to_dataset(dense);
      TableSimilarity sim;
      for (ItemId i = 1; i <= 6; ++i)
        for (ItemId j = i + 1; j <= 6; ++j) sim.set(i, j, val(rng));
      for (ItemId i = 1; i <= 6; ++i) {
        for (ItemId j = 1; j <= 6; ++j) {
          auto s = sim.similarity(i, j);
          if (i == j || !s || s->value > 0) continue;
          // Drop user 1's rating of j and compare.
          std::vector<RatingRecord> fewer;
          for (const auto& r : ds.records())
            if (!(r.user == 1 && r.item == j)) fewer.push_back(r);
          // Means must not move, so re-add j's rating under a fresh user.
          fewer.push_back({100, j, dense[0][static_cast<std::size_t>(j - 1)], 0});
          RatingDataset ds2(fewer);
          auto a = KnnPredictor(ds, sim, raw_config()).predict(1, i);
          auto b = KnnPredictor(ds2, sim, raw_config()).predict(1, i);
          CHECK(a.value == doctest::Approx(b.value).epsilon(1e-12));
          CHECK(a.detail == b.detail);
        }
      }
    }
  }

  TEST_CASE("provider swap coherence") {
    auto w = synthetic::movie_world({.users = 50, .items = 40, .seed = 8});
    RatingSimilarity rating(w.ratings);
    ItemVectorIndex empty_index;
    HybridSimilarity hybrid(w.ratings, empty_index, {1, 0});
    PredictionConfig cfg;
    cfg.k = 10;
    KnnPredictor cf(w.ratings, rating, cfg), hy(w.ratings, hybrid, cfg);
    for (UserId u = 1; u <= 50; u += 3)
      for (ItemId i = 1; i <= 40; ++i) CHECK(cf.predict(u, i) == hy.predict(u, i));
  }

  TEST_CASE("predict_batch") {
    auto w = synthetic::movie_world({.users = 80, .items = 60, .seed = 9});
    RatingSimilarity sim(w.ratings);
    KnnPredictor p(w.ratings, sim, PredictionConfig{});
    CHECK(predict_batch(p, {}).empty());
    std::vector<UserItem> one{{3, 4}};
    auto single = predict_batch(p, one);
    REQUIRE(single.size() == 1);
    CHECK(single[0] == p.predict(3, 4));

    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> uid(1, 85), iid(1, 65);
    std::vector<UserItem> pairs;
    for (int n = 0; n < 1000; ++n) pairs.emplace_back(uid(rng), iid(rng));
    auto serial = predict_batch(p, pairs, 1);
    auto parallel = predict_batch(p, pairs, 4);
    CHECK(serial == parallel);
  }

  TEST_CASE("recommend_top_n") {
    std::vector<RatingRecord> recs{{1, 1, 5, 0}, {2, 1, 4, 0}, {2, 2, 4, 0}, {2, 3, 4, 0}, {3, 2, 2, 0}, {3, 3, 2, 0}};
    RatingDataset ds(recs);
    TableSimilarity sim;
    sim.set(1, 2, 0.5);
    sim.set(1, 3, 0.5);
    KnnPredictor p(ds, sim, PredictionConfig{});
    std::vector<ItemId> universe{1, 2, 3, 4};

    auto recs1 = recommend_top_n(p, 1, 10, universe);
    REQUIRE(recs1.size() == 3);
    CHECK(recs1[0].item == 2);  // equal predictions: lower id first
    CHECK(recs1[1].item == 3);
    CHECK(recs1[0].prediction.value == recs1[1].prediction.value);
    CHECK(recs1[2].item == 4);  // fallback ranks last
    CHECK(recs1[2].prediction.detail != PredictionDetail::full);

    CHECK(recommend_top_n(p, 1, 1, universe).size() == 1);
    CHECK(recommend_top_n(p, 2, 5, std::vector<ItemId>{1, 2, 3}).empty());

    auto newbie = recommend_top_n(p, 42, 10, universe);
    REQUIRE(newbie.size() == 4);
    CHECK(newbie[0].item == 1);  // highest item mean
    CHECK(newbie.back().item == 4);
    CHECK_THROWS_AS(recommend_top_n(p, 1, 0, universe), ContractError);
  }
}
