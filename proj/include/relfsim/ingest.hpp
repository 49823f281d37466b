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
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace relfsim {

using UserId = std::int64_t;
using ItemId = std::int64_t;

/// Receives human-readable warnings (skipped lines, dropped rows).
using WarningSink = std::function<void(std::string_view)>;

struct RatingScale {
  double min = 1.0;
  double max = 5.0;

  bool contains(double r) const { return r >= min && r <= max; }
  double clamp(double r) const { return r < min ? min : (r > max ? max : r); }
};

struct RatingRecord {
  UserId user = 0;
  ItemId item = 0;
  double rating = 0.0;
  std::int64_t timestamp = 0;

  friend bool operator==(const RatingRecord&, const RatingRecord&) = default;
};

/// One entry of a sparse row or column: the other axis id and the rating.
struct IdRating {
  std::int64_t id;
  double rating;
};

/// Sparse user x item explicit ratings with lookup indices and means.
///
/// Item columns are sorted by user id and user rows by item id, so two
/// columns can be intersected with a linear merge.
class RatingDataset {
 public:
  RatingDataset() = default;
  explicit RatingDataset(std::vector<RatingRecord> records, RatingScale scale = {});

  const std::vector<RatingRecord>& records() const { return records_; }
  const RatingScale& scale() const { return scale_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  double global_mean() const { return global_mean_; }
  bool has_item(ItemId item) const { return columns_.contains(item); }
  bool has_user(UserId user) const { return rows_.contains(user); }

  /// Mean rating of `item`; throws UnknownIdError when the item has no ratings.
  double item_mean(ItemId item) const;
  std::size_t item_count(ItemId item) const;

  std::span<const IdRating> item_ratings(ItemId item) const;
  std::span<const IdRating> user_ratings(UserId user) const;

  /// Sorted ascending.
  std::vector<ItemId> items() const;
  std::vector<UserId> users() const;

  /// Lines skipped while parsing the source (0 for in-memory datasets).
  std::size_t skipped_lines() const { return skipped_lines_; }
  void set_skipped_lines(std::size_t n) { skipped_lines_ = n; }

 private:
  struct Column {
    std::vector<IdRating> entries;
    double mean = 0.0;
  };

  std::vector<RatingRecord> records_;
  RatingScale scale_;
  double global_mean_ = 0.0;
  std::unordered_map<ItemId, Column> columns_;
  std::unordered_map<UserId, std::vector<IdRating>> rows_;
  std::size_t skipped_lines_ = 0;
};

enum class RatingFormat {
  double_colon,    ///< MovieLens `.dat`: user::item::rating::timestamp
  comma_separated  ///< CSV with header userId,movieId,rating,timestamp
};

struct ParseOptions {
  RatingScale scale;
  WarningSink warn;
};

RatingDataset parse_ratings(std::istream& in, RatingFormat format, const ParseOptions& options = {});
RatingDataset parse_ratings(const std::filesystem::path& path, RatingFormat format,
                            const ParseOptions& options = {});

/// Guess the ratings format from the first non-empty line.
RatingFormat detect_rating_format(const std::filesystem::path& path);

void write_ratings_csv(const RatingDataset& ratings, std::ostream& out);

struct FeatureEntry {
  std::vector<std::string> directors;
  std::vector<std::string> screenwriters;
  std::vector<std::string> cast;

  bool empty() const { return directors.empty() && screenwriters.empty() && cast.empty(); }
  friend bool operator==(const FeatureEntry&, const FeatureEntry&) = default;
};

inline constexpr std::size_t kMaxCast = 12;

struct FeatureCatalog {
  std::map<ItemId, FeatureEntry> entries;
  std::size_t duplicate_rows = 0;
  std::size_t skipped_rows = 0;

  friend bool operator==(const FeatureCatalog& a, const FeatureCatalog& b) {
    return a.entries == b.entries;
  }
};

/// Canonical person token: numeric source ids are kept verbatim, names are
/// lowercased with whitespace runs collapsed to a single underscore.
std::string canonical_token(std::string_view raw);

FeatureCatalog parse_item_features(std::istream& in, const WarningSink& warn = {});
FeatureCatalog parse_item_features(const std::filesystem::path& path, const WarningSink& warn = {});
void write_item_features(const FeatureCatalog& catalog, std::ostream& out);

struct FeatureSentence {
  ItemId item = 0;
  std::vector<std::string> tokens;

  friend bool operator==(const FeatureSentence&, const FeatureSentence&) = default;
};

struct SentenceSet {
  std::vector<FeatureSentence> sentences;
  std::size_t excluded_items = 0;
};

/// directors ++ screenwriters ++ cast per item; featureless items are
/// excluded and counted.
SentenceSet build_sentences(const FeatureCatalog& catalog);

struct IngestReport {
  std::size_t n_input_ratings = 0;
  std::size_t n_ratings_kept = 0;
  std::size_t n_dropped_duplicates = 0;
  std::size_t n_dropped_unjoined = 0;
  std::size_t n_items_kept = 0;
  std::size_t n_items_without_features = 0;
  std::size_t n_catalog_duplicate_rows = 0;
  std::size_t n_sentences = 0;

  /// Single-line JSON object.
  std::string to_json() const;
};

/// Ratings restricted to items that have a sentence. Sentences also cover
/// items with metadata but no ratings, so `ratings.items()` is a subset of
/// the sentence items.
struct CorpusBundle {
  RatingDataset ratings;
  std::vector<FeatureSentence> sentences;
  FeatureCatalog catalog;
  IngestReport report;
};

/// Collapse duplicate (user, item) ratings keeping the latest timestamp
/// (input order breaks ties), drop ratings on items without features,
/// recompute means. Throws InputError when nothing survives the join.
CorpusBundle clean_and_join(const RatingDataset& ratings, const FeatureCatalog& features);

/// Bundle directory layout: ratings.csv, items.csv, report.json.
void save_bundle(const CorpusBundle& bundle, const std::filesystem::path& dir);
CorpusBundle load_bundle(const std::filesystem::path& dir, RatingScale scale = {});

}  // namespace relfsim
