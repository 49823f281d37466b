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

#include <array>
#include <cstddef>
#include <iosfwd>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "relfsim/embed.hpp"
#include "relfsim/ingest.hpp"

namespace relfsim {

enum class SimilaritySource { rating, content };

struct SimilarityValue {
  double value = 0.0;
  /// |U_ij| for rating similarity; min token coverage for content similarity.
  std::size_t support = 0;
  SimilaritySource source = SimilaritySource::rating;

  friend bool operator==(const SimilarityValue&, const SimilarityValue&) = default;
};

const char* to_string(SimilaritySource source);

/// a.b / (|a| |b|). Throws UndefinedSimilarityError if either vector is zero
/// and ContractError on a dimension mismatch.
double cosine(std::span<const double> a, std::span<const double> b);

/// Cosine over raw ratings of the users who rated both items. nullopt when
/// no user rated both or a co-rated sub-vector is all zero. Throws
/// ContractError for an item without ratings.
std::optional<SimilarityValue> rating_cosine(ItemId i, ItemId j, const RatingDataset& ratings);

/// Item vector = mean of the input vectors of the item's in-vocabulary tokens.
class ItemVectorIndex {
 public:
  struct Entry {
    std::vector<double> vector;
    double norm = 0.0;
    std::size_t coverage = 0;
  };

  const Entry* find(ItemId item) const;
  bool contains(ItemId item) const { return entries_.contains(item); }
  std::size_t size() const { return entries_.size(); }
  /// Sorted ascending.
  std::vector<ItemId> items() const;
  /// Items dropped because none of their tokens are in the vocabulary, or
  /// because the mean vector came out exactly zero.
  std::size_t excluded() const { return excluded_; }

 private:
  friend ItemVectorIndex build_item_vectors(std::span<const FeatureSentence>, const EmbeddingTable&);
  std::unordered_map<ItemId, Entry> entries_;
  std::size_t excluded_ = 0;
};

ItemVectorIndex build_item_vectors(std::span<const FeatureSentence> sentences, const EmbeddingTable& table);

/// Cosine of the mean-pooled feature vectors; nullopt if either item is absent.
std::optional<SimilarityValue> relf_sim(ItemId i, ItemId j, const ItemVectorIndex& index);

/// When to trust rating similarity over content similarity.
struct HybridPolicy {
  /// Minimum number of co-rating users.
  std::size_t tau_pair = 2;
  /// Minimum ratings each item needs to count as warm.
  std::size_t tau_item = 5;

  static constexpr std::size_t kNever = std::numeric_limits<std::size_t>::max();
  void validate() const;
};

/// Rating similarity when both items are warm and the pair has enough
/// co-raters, content similarity otherwise.
std::optional<SimilarityValue> hybrid_sim(ItemId i, ItemId j, const RatingDataset& ratings,
                                          const ItemVectorIndex& index, const HybridPolicy& policy);

/// sim(i, j) for the predictor. Implementations are immutable after
/// construction and safe to call concurrently.
class SimilarityProvider {
 public:
  virtual ~SimilarityProvider() = default;
  virtual std::optional<SimilarityValue> similarity(ItemId i, ItemId j) const = 0;
};

class RatingSimilarity final : public SimilarityProvider {
 public:
  explicit RatingSimilarity(const RatingDataset& ratings) : ratings_(ratings) {}
  /// Items without ratings are undefined here rather than an error.
  std::optional<SimilarityValue> similarity(ItemId i, ItemId j) const override;

 private:
  const RatingDataset& ratings_;
};

class ContentSimilarity final : public SimilarityProvider {
 public:
  explicit ContentSimilarity(const ItemVectorIndex& index) : index_(index) {}
  std::optional<SimilarityValue> similarity(ItemId i, ItemId j) const override;

 private:
  const ItemVectorIndex& index_;
};

class HybridSimilarity final : public SimilarityProvider {
 public:
  HybridSimilarity(const RatingDataset& ratings, const ItemVectorIndex& index, HybridPolicy policy);
  std::optional<SimilarityValue> similarity(ItemId i, ItemId j) const override;

 private:
  const RatingDataset& ratings_;
  const ItemVectorIndex& index_;
  HybridPolicy policy_;
};

/// Memoizes another provider by unordered item pair. The cache is sharded
/// and bounded; a full shard is cleared before the next insert.
class CachedSimilarity final : public SimilarityProvider {
 public:
  CachedSimilarity(std::unique_ptr<SimilarityProvider> inner, std::size_t capacity);
  std::optional<SimilarityValue> similarity(ItemId i, ItemId j) const override;
  std::size_t cached() const;

 private:
  struct PairHash {
    std::size_t operator()(const std::pair<ItemId, ItemId>& p) const noexcept;
  };
  struct Shard {
    mutable std::mutex mutex;
    std::unordered_map<std::pair<ItemId, ItemId>, std::optional<SimilarityValue>, PairHash> map;
  };
  static constexpr std::size_t kShards = 64;

  std::unique_ptr<SimilarityProvider> inner_;
  std::size_t shard_capacity_;
  mutable std::array<Shard, kShards> shards_;
};

enum class SimilarityKind { rating, content, hybrid };

const char* to_string(SimilarityKind kind);
std::optional<SimilarityKind> parse_similarity_kind(std::string_view name);

/// Builds the provider for `kind`, wrapped in a cache when capacity > 0.
/// `index` is required for content and hybrid.
std::unique_ptr<SimilarityProvider> make_similarity(SimilarityKind kind, const RatingDataset& ratings,
                                                    const ItemVectorIndex* index, const HybridPolicy& policy,
                                                    std::size_t cache_capacity = 1 << 20);

struct SimilarNeighbor {
  ItemId item;
  SimilarityValue sim;
};

/// Top-n most similar candidates to `item` by value (descending, ties by id).
std::vector<SimilarNeighbor> most_similar(ItemId item, std::span<const ItemId> candidates,
                                          const SimilarityProvider& provider, std::size_t n);

/// CSV `item,neighbor,value,source` with the top-n neighbors of every item.
void dump_top_similar(std::span<const ItemId> items, const SimilarityProvider& provider, std::size_t n,
                      std::ostream& out);

}  // namespace relfsim
