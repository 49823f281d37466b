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

#include "relfsim/simcore.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "relfsim/error.hpp"
#include "text_util.hpp"

namespace relfsim {

namespace {

double clamp_unit(double v) { return std::clamp(v, -1.0, 1.0); }

}  // namespace

const char* to_string(SimilaritySource source) {
  return source == SimilaritySource::rating ? "rating" : "content";
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ContractError("cosine: dimension mismatch");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ab += a[k] * b[k];
    aa += a[k] * a[k];
    bb += b[k] * b[k];
  }
  if (aa == 0.0 || bb == 0.0) throw UndefinedSimilarityError("cosine of a zero vector");
  return clamp_unit(ab / (std::sqrt(aa) * std::sqrt(bb)));
}

std::optional<SimilarityValue> rating_cosine(ItemId i, ItemId j, const RatingDataset& ratings) {
  if (!ratings.has_item(i)) throw ContractError("rating_cosine: unknown item " + std::to_string(i));
  if (!ratings.has_item(j)) throw ContractError("rating_cosine: unknown item " + std::to_string(j));
  if (j < i) std::swap(i, j);
  auto a = ratings.item_ratings(i);
  auto b = ratings.item_ratings(j);
  double ab = 0.0, aa = 0.0, bb = 0.0;
  std::size_t support = 0;
  for (std::size_t x = 0, y = 0; x < a.size() && y < b.size();) {
    if (a[x].id < b[y].id) {
      ++x;
    } else if (b[y].id < a[x].id) {
      ++y;
    } else {
      ab += a[x].rating * b[y].rating;
      aa += a[x].rating * a[x].rating;
      bb += b[y].rating * b[y].rating;
      ++support;
      ++x;
      ++y;
    }
  }
  if (support == 0 || aa == 0.0 || bb == 0.0) return std::nullopt;
  return SimilarityValue{clamp_unit(ab / (std::sqrt(aa) * std::sqrt(bb))), support, SimilaritySource::rating};
}

const ItemVectorIndex::Entry* ItemVectorIndex::find(ItemId item) const {
  auto it = entries_.find(item);
  return it == entries_.end() ? nullptr : &it->second;
}

std::vector<ItemId> ItemVectorIndex::items() const {
  std::vector<ItemId> out;
  out.reserve(entries_.size());
  for (const auto& [item, e] : entries_) out.push_back(item);
  std::sort(out.begin(), out.end());
  return out;
}

ItemVectorIndex build_item_vectors(std::span<const FeatureSentence> sentences, const EmbeddingTable& table) {
  ItemVectorIndex index;
  const auto dim = static_cast<std::size_t>(table.dim());
  for (const auto& s : sentences) {
    ItemVectorIndex::Entry e;
    e.vector.assign(dim, 0.0);
    for (const auto& tok : s.tokens) {
      auto v = table.vector(tok);
      if (!v) continue;
      for (std::size_t k = 0; k < dim; ++k) e.vector[k] += (*v)[k];
      ++e.coverage;
    }
    if (e.coverage == 0) {
      ++index.excluded_;
      continue;
    }
    double sq = 0.0;
    for (auto& x : e.vector) {
      x /= static_cast<double>(e.coverage);
      sq += x * x;
    }
    e.norm = std::sqrt(sq);
    if (e.norm == 0.0) {
      ++index.excluded_;
      continue;
    }
    index.entries_.insert_or_assign(s.item, std::move(e));
  }
  return index;
}

std::optional<SimilarityValue> relf_sim(ItemId i, ItemId j, const ItemVectorIndex& index) {
  const auto* a = index.find(i);
  const auto* b = index.find(j);
  if (!a || !b) return std::nullopt;
  if (j < i) std::swap(a, b);
  double ab = 0.0;
  for (std::size_t k = 0; k < a->vector.size(); ++k) ab += a->vector[k] * b->vector[k];
  return SimilarityValue{clamp_unit(ab / (a->norm * b->norm)), std::min(a->coverage, b->coverage),
                         SimilaritySource::content};
}

void HybridPolicy::validate() const {
  if (tau_pair < 1) throw ContractError("tau_pair must be >= 1");
}

std::optional<SimilarityValue> hybrid_sim(ItemId i, ItemId j, const RatingDataset& ratings,
                                          const ItemVectorIndex& index, const HybridPolicy& policy) {
  if (policy.tau_item != HybridPolicy::kNever && ratings.has_item(i) && ratings.has_item(j) &&
      ratings.item_count(i) >= policy.tau_item && ratings.item_count(j) >= policy.tau_item) {
    auto r = rating_cosine(i, j, ratings);
    if (r && r->support >= policy.tau_pair) return r;
  }
  return relf_sim(i, j, index);
}

std::optional<SimilarityValue> RatingSimilarity::similarity(ItemId i, ItemId j) const {
  if (!ratings_.has_item(i) || !ratings_.has_item(j)) return std::nullopt;
  return rating_cosine(i, j, ratings_);
}

std::optional<SimilarityValue> ContentSimilarity::similarity(ItemId i, ItemId j) const {
  return relf_sim(i, j, index_);
}

HybridSimilarity::HybridSimilarity(const RatingDataset& ratings, const ItemVectorIndex& index, HybridPolicy policy)
    : ratings_(ratings), index_(index), policy_(policy) {
  policy_.validate();
}

std::optional<SimilarityValue> HybridSimilarity::similarity(ItemId i, ItemId j) const {
  return hybrid_sim(i, j, ratings_, index_, policy_);
}

std::size_t CachedSimilarity::PairHash::operator()(const std::pair<ItemId, ItemId>& p) const noexcept {
  auto h = static_cast<std::uint64_t>(p.first) * 0x9E3779B97F4A7C15ULL;
  h ^= static_cast<std::uint64_t>(p.second) + 0x7F4A7C159E3779B9ULL + (h << 6) + (h >> 2);
  h ^= h >> 31;
  return static_cast<std::size_t>(h);
}

CachedSimilarity::CachedSimilarity(std::unique_ptr<SimilarityProvider> inner, std::size_t capacity)
    : inner_(std::move(inner)), shard_capacity_(std::max<std::size_t>(1, capacity / kShards)) {
  if (!inner_) throw ContractError("CachedSimilarity needs a provider");
}

std::optional<SimilarityValue> CachedSimilarity::similarity(ItemId i, ItemId j) const {
  const std::pair<ItemId, ItemId> key{std::min(i, j), std::max(i, j)};
  const std::size_t h = PairHash{}(key);
  Shard& shard = shards_[(h >> 7) % kShards];
  {
    std::lock_guard lock(shard.mutex);
    auto it = shard.map.find(key);
    if (it != shard.map.end()) return it->second;
  }
  // Computed outside the lock; concurrent callers may compute the same value
  // and the second insert is a no-op.
  auto value = inner_->similarity(key.first, key.second);
  std::lock_guard lock(shard.mutex);
  if (shard.map.size() >= shard_capacity_) shard.map.clear();
  shard.map.emplace(key, value);
  return value;
}

std::size_t CachedSimilarity::cached() const {
  std::size_t n = 0;
  for (const auto& s : shards_) {
    std::lock_guard lock(s.mutex);
    n += s.map.size();
  }
  return n;
}

const char* to_string(SimilarityKind kind) {
  switch (kind) {
    case SimilarityKind::rating: return "rating";
    case SimilarityKind::content: return "content";
    case SimilarityKind::hybrid: return "hybrid";
  }
  return "?";
}

std::optional<SimilarityKind> parse_similarity_kind(std::string_view name) {
  if (name == "rating" || name == "cf") return SimilarityKind::rating;
  if (name == "content" || name == "cb") return SimilarityKind::content;
  if (name == "hybrid") return SimilarityKind::hybrid;
  return std::nullopt;
}

std::unique_ptr<SimilarityProvider> make_similarity(SimilarityKind kind, const RatingDataset& ratings,
                                                    const ItemVectorIndex* index, const HybridPolicy& policy,
                                                    std::size_t cache_capacity) {
  std::unique_ptr<SimilarityProvider> p;
  if (kind != SimilarityKind::rating && !index) {
    throw ContractError(std::string(to_string(kind)) + " similarity needs an item vector index");
  }
  switch (kind) {
    case SimilarityKind::rating: p = std::make_unique<RatingSimilarity>(ratings); break;
    case SimilarityKind::content: p = std::make_unique<ContentSimilarity>(*index); break;
    case SimilarityKind::hybrid: p = std::make_unique<HybridSimilarity>(ratings, *index, policy); break;
  }
  if (cache_capacity == 0) return p;
  return std::make_unique<CachedSimilarity>(std::move(p), cache_capacity);
}

std::vector<SimilarNeighbor> most_similar(ItemId item, std::span<const ItemId> candidates,
                                          const SimilarityProvider& provider, std::size_t n) {
  std::vector<SimilarNeighbor> out;
  for (ItemId c : candidates) {
    if (c == item) continue;
    if (auto s = provider.similarity(item, c)) out.push_back({c, *s});
  }
  auto better = [](const SimilarNeighbor& a, const SimilarNeighbor& b) {
    return a.sim.value != b.sim.value ? a.sim.value > b.sim.value : a.item < b.item;
  };
  const std::size_t keep = std::min(n, out.size());
  std::partial_sort(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(keep), out.end(), better);
  out.resize(keep);
  return out;
}

void dump_top_similar(std::span<const ItemId> items, const SimilarityProvider& provider, std::size_t n,
                      std::ostream& out) {
  out << "item,neighbor,value,source\n";
  for (ItemId i : items) {
    for (const auto& nb : most_similar(i, items, provider, n)) {
      out << i << ',' << nb.item << ',' << detail::format_real(nb.sim.value) << ',' << to_string(nb.sim.source)
          << '\n';
    }
  }
}

}  // namespace relfsim
