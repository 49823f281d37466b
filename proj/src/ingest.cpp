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

#include "relfsim/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <unordered_map>

#include <json.hpp>

#include "relfsim/error.hpp"
#include "text_util.hpp"

namespace relfsim {

namespace {

bool by_id(const IdRating& a, const IdRating& b) { return a.id < b.id; }

std::vector<std::string> split_on(std::string_view s, std::string_view sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    auto next = s.find(sep, pos);
    out.emplace_back(s.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
    if (next == std::string_view::npos) break;
    pos = next + sep.size();
  }
  return out;
}

std::vector<std::string> split_tokens(std::string_view field) {
  std::vector<std::string> out;
  if (detail::trim(field).empty()) return out;
  for (const auto& part : split_on(field, "|")) {
    auto tok = canonical_token(part);
    if (!tok.empty()) out.push_back(std::move(tok));
  }
  return out;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back('|');
    out += tokens[i];
  }
  return out;
}

}  // namespace

RatingDataset::RatingDataset(std::vector<RatingRecord> records, RatingScale scale)
    : records_(std::move(records)), scale_(scale) {
  if (!(scale_.min < scale_.max)) throw ContractError("rating scale requires min < max");
  double total = 0.0;
  for (const auto& r : records_) {
    if (!scale_.contains(r.rating)) {
      throw ContractError("rating " + std::to_string(r.rating) + " outside scale");
    }
    columns_[r.item].entries.push_back({r.user, r.rating});
    rows_[r.user].push_back({r.item, r.rating});
    total += r.rating;
  }
  global_mean_ = records_.empty() ? 0.0 : total / static_cast<double>(records_.size());
  for (auto& [item, col] : columns_) {
    std::stable_sort(col.entries.begin(), col.entries.end(), by_id);
    double sum = 0.0;
    for (const auto& e : col.entries) sum += e.rating;
    col.mean = sum / static_cast<double>(col.entries.size());
  }
  for (auto& [user, row] : rows_) std::stable_sort(row.begin(), row.end(), by_id);
}

double RatingDataset::item_mean(ItemId item) const {
  auto it = columns_.find(item);
  if (it == columns_.end()) throw UnknownIdError("item has no ratings", std::to_string(item));
  return it->second.mean;
}

std::size_t RatingDataset::item_count(ItemId item) const {
  auto it = columns_.find(item);
  return it == columns_.end() ? 0 : it->second.entries.size();
}

std::span<const IdRating> RatingDataset::item_ratings(ItemId item) const {
  auto it = columns_.find(item);
  if (it == columns_.end()) return {};
  return it->second.entries;
}

std::span<const IdRating> RatingDataset::user_ratings(UserId user) const {
  auto it = rows_.find(user);
  if (it == rows_.end()) return {};
  return it->second;
}

std::vector<ItemId> RatingDataset::items() const {
  std::vector<ItemId> out;
  out.reserve(columns_.size());
  for (const auto& [item, col] : columns_) out.push_back(item);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<UserId> RatingDataset::users() const {
  std::vector<UserId> out;
  out.reserve(rows_.size());
  for (const auto& [user, row] : rows_) out.push_back(user);
  std::sort(out.begin(), out.end());
  return out;
}

RatingDataset parse_ratings(std::istream& in, RatingFormat format, const ParseOptions& options) {
  if (!in) throw InputError("ratings stream is not readable");
  std::vector<RatingRecord> records;
  std::size_t skipped = 0;
  std::size_t line_no = 0;
  std::string line;
  auto skip = [&](std::string_view why) {
    ++skipped;
    if (options.warn) {
      options.warn("ratings line " + std::to_string(line_no) + ": " + std::string(why) + ", skipped");
    }
  };
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = detail::trim(line);
    if (view.empty()) continue;
    std::vector<std::string> fields;
    if (format == RatingFormat::double_colon) {
      fields = split_on(view, "::");
    } else {
      fields = detail::split_csv(view);
      if (line_no == 1 && !fields.empty() && detail::trim(fields[0]) == "userId") continue;
    }
    if (fields.size() < 3 || fields.size() > 4) {
      skip("expected 3 or 4 fields");
      continue;
    }
    auto user = detail::parse_number<UserId>(fields[0]);
    auto item = detail::parse_number<ItemId>(fields[1]);
    auto rating = detail::parse_number<double>(fields[2]);
    std::optional<std::int64_t> ts = std::int64_t{0};
    if (fields.size() == 4 && !detail::trim(fields[3]).empty()) ts = detail::parse_number<std::int64_t>(fields[3]);
    if (!user || !item || !rating || !ts) {
      skip("malformed field");
      continue;
    }
    if (!options.scale.contains(*rating)) {
      skip("rating outside scale");
      continue;
    }
    records.push_back({*user, *item, *rating, *ts});
  }
  if (in.bad()) throw InputError("I/O error while reading ratings");
  if (records.empty()) throw InputError("ratings source has no valid records");
  RatingDataset out(std::move(records), options.scale);
  out.set_skipped_lines(skipped);
  return out;
}

RatingDataset parse_ratings(const std::filesystem::path& path, RatingFormat format, const ParseOptions& options) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open ratings file " + path.string());
  return parse_ratings(in, format, options);
}

RatingFormat detect_rating_format(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open ratings file " + path.string());
  std::string line;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    return line.find("::") != std::string::npos ? RatingFormat::double_colon : RatingFormat::comma_separated;
  }
  throw InputError("ratings file is empty: " + path.string());
}

void write_ratings_csv(const RatingDataset& ratings, std::ostream& out) {
  out << "userId,movieId,rating,timestamp\n";
  for (const auto& r : ratings.records()) {
    out << r.user << ',' << r.item << ',' << detail::format_real(r.rating) << ',' << r.timestamp << '\n';
  }
}

std::string canonical_token(std::string_view raw) {
  raw = detail::trim(raw);
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (char c : raw) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out.push_back('_');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

FeatureCatalog parse_item_features(std::istream& in, const WarningSink& warn) {
  if (!in) throw InputError("metadata stream is not readable");
  FeatureCatalog catalog;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_csv(line);
    if (!header_seen) {
      header_seen = true;
      if (!fields.empty() && detail::trim(fields[0]) == "itemId") continue;
    }
    auto item = fields.empty() ? std::nullopt : detail::parse_number<ItemId>(fields[0]);
    if (!item || fields.size() > 4) {
      ++catalog.skipped_rows;
      if (warn) warn("metadata line " + std::to_string(line_no) + ": invalid item row, skipped");
      continue;
    }
    fields.resize(4);
    FeatureEntry entry{split_tokens(fields[1]), split_tokens(fields[2]), split_tokens(fields[3])};
    if (entry.cast.size() > kMaxCast) entry.cast.resize(kMaxCast);
    auto [it, inserted] = catalog.entries.insert_or_assign(*item, std::move(entry));
    if (!inserted) {
      ++catalog.duplicate_rows;
      if (warn) warn("metadata line " + std::to_string(line_no) + ": duplicate item " + std::to_string(*item) + ", last row wins");
    }
  }
  if (in.bad()) throw InputError("I/O error while reading metadata");
  return catalog;
}

FeatureCatalog parse_item_features(const std::filesystem::path& path, const WarningSink& warn) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open metadata file " + path.string());
  return parse_item_features(in, warn);
}

void write_item_features(const FeatureCatalog& catalog, std::ostream& out) {
  out << "itemId,directors,screenwriters,cast\n";
  for (const auto& [item, e] : catalog.entries) {
    out << item << ',' << detail::quote_csv(join_tokens(e.directors)) << ','
        << detail::quote_csv(join_tokens(e.screenwriters)) << ',' << detail::quote_csv(join_tokens(e.cast)) << '\n';
  }
}

SentenceSet build_sentences(const FeatureCatalog& catalog) {
  SentenceSet out;
  for (const auto& [item, e] : catalog.entries) {
    if (e.empty()) {
      ++out.excluded_items;
      continue;
    }
    FeatureSentence s{item, {}};
    s.tokens.reserve(e.directors.size() + e.screenwriters.size() + e.cast.size());
    s.tokens.insert(s.tokens.end(), e.directors.begin(), e.directors.end());
    s.tokens.insert(s.tokens.end(), e.screenwriters.begin(), e.screenwriters.end());
    s.tokens.insert(s.tokens.end(), e.cast.begin(), e.cast.end());
    out.sentences.push_back(std::move(s));
  }
  return out;
}

std::string IngestReport::to_json() const {
  nlohmann::ordered_json j;
  j["n_input_ratings"] = n_input_ratings;
  j["n_ratings_kept"] = n_ratings_kept;
  j["n_dropped_duplicates"] = n_dropped_duplicates;
  j["n_dropped_unjoined"] = n_dropped_unjoined;
  j["n_items_kept"] = n_items_kept;
  j["n_items_without_features"] = n_items_without_features;
  j["n_catalog_duplicate_rows"] = n_catalog_duplicate_rows;
  j["n_sentences"] = n_sentences;
  return j.dump();
}

CorpusBundle clean_and_join(const RatingDataset& ratings, const FeatureCatalog& features) {
  CorpusBundle bundle;
  auto sentences = build_sentences(features);
  bundle.sentences = std::move(sentences.sentences);
  bundle.report.n_items_without_features = sentences.excluded_items;
  bundle.report.n_catalog_duplicate_rows = features.duplicate_rows;
  bundle.report.n_sentences = bundle.sentences.size();
  bundle.report.n_input_ratings = ratings.size();

  for (const auto& [item, e] : features.entries) {
    if (!e.empty()) bundle.catalog.entries.emplace(item, e);
  }

  // Latest timestamp wins; on equal timestamps the later record wins.
  const auto& recs = ratings.records();
  std::unordered_map<UserId, std::unordered_map<ItemId, std::size_t>> latest;
  std::vector<bool> keep(recs.size(), false);
  for (std::size_t idx = 0; idx < recs.size(); ++idx) {
    const auto& r = recs[idx];
    if (!bundle.catalog.entries.contains(r.item)) {
      ++bundle.report.n_dropped_unjoined;
      continue;
    }
    auto [it, inserted] = latest[r.user].try_emplace(r.item, idx);
    if (inserted) {
      keep[idx] = true;
      continue;
    }
    ++bundle.report.n_dropped_duplicates;
    if (r.timestamp >= recs[it->second].timestamp) {
      keep[it->second] = false;
      keep[idx] = true;
      it->second = idx;
    }
  }
  std::vector<RatingRecord> kept;
  kept.reserve(recs.size());
  for (std::size_t idx = 0; idx < recs.size(); ++idx) {
    if (keep[idx]) kept.push_back(recs[idx]);
  }
  if (kept.empty()) throw InputError("no ratings remain after joining with item metadata");
  bundle.ratings = RatingDataset(std::move(kept), ratings.scale());
  bundle.report.n_ratings_kept = bundle.ratings.size();
  bundle.report.n_items_kept = bundle.ratings.items().size();
  return bundle;
}

void save_bundle(const CorpusBundle& bundle, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw InputError("cannot create bundle directory " + dir.string() + ": " + ec.message());
  auto open = [&](const char* name) {
    std::ofstream out(dir / name);
    if (!out) throw InputError("cannot write " + (dir / name).string());
    return out;
  };
  {
    auto out = open("ratings.csv");
    write_ratings_csv(bundle.ratings, out);
  }
  {
    auto out = open("items.csv");
    write_item_features(bundle.catalog, out);
  }
  auto out = open("report.json");
  out << bundle.report.to_json() << '\n';
}

CorpusBundle load_bundle(const std::filesystem::path& dir, RatingScale scale) {
  if (!std::filesystem::is_directory(dir)) throw InputError("bundle directory not found: " + dir.string());
  ParseOptions opts;
  opts.scale = scale;
  auto ratings = parse_ratings(dir / "ratings.csv", RatingFormat::comma_separated, opts);
  if (ratings.skipped_lines() > 0) throw InputError("corrupt bundle: malformed lines in ratings.csv");
  auto catalog = parse_item_features(dir / "items.csv");
  if (catalog.skipped_rows > 0) throw InputError("corrupt bundle: malformed rows in items.csv");
  return clean_and_join(ratings, catalog);
}

}  // namespace relfsim
