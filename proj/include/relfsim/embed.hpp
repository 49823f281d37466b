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
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "relfsim/ingest.hpp"

namespace relfsim {

/// Tokens with count >= min_count, indexed 0..V-1 by descending count, then
/// lexicographically.
class Vocabulary {
 public:
  Vocabulary() = default;
  /// Builds from (token, count) pairs; reorders them into canonical order.
  explicit Vocabulary(std::vector<std::pair<std::string, std::uint64_t>> counts);

  std::size_t size() const { return tokens_.size(); }
  bool empty() const { return tokens_.empty(); }
  const std::string& token(std::size_t index) const { return tokens_.at(index); }
  std::uint64_t count(std::size_t index) const { return counts_.at(index); }
  std::optional<std::size_t> index_of(const std::string& token) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Throws InputError when no token reaches min_count.
Vocabulary build_vocabulary(std::span<const FeatureSentence> sentences, std::uint64_t min_count);

struct TrainConfig {
  int window = 8;
  int dim = 150;
  int negatives = 25;
  int min_count = 1;
  int epochs = 20;
  double initial_lr = 0.025;
  double final_lr = 0.0001;
  double ns_exponent = 0.75;
  std::uint64_t seed = 1;
  int workers = 1;

  /// Throws ContractError on an invalid combination.
  void validate() const;
};

/// Dense row-major V x dim matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct EmbeddingTable {
  Vocabulary vocab;
  Matrix input_vectors;   ///< published embeddings; used for all similarity queries
  Matrix output_vectors;  ///< context vectors; empty when loaded without sidecar

  int dim() const { return static_cast<int>(input_vectors.cols()); }
  std::optional<std::span<const double>> vector(const std::string& token) const;
};

/// Draws vocabulary indices with probability proportional to count^exponent.
class NegativeSampler {
 public:
  NegativeSampler(const Vocabulary& vocab, double exponent);

  std::size_t size() const { return cdf_.size(); }
  double probability(std::size_t index) const;
  /// `u` in [0, 1).
  std::size_t sample(double u) const;

 private:
  std::vector<double> cdf_;
};

/// mt19937_64 with hand-rolled real and bounded-int draws; the standard
/// distributions are implementation-defined, these are not.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  std::uint64_t next() { return engine_(); }
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  /// Uniform in [0, n).
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : engine_() % n; }

 private:
  std::mt19937_64 engine_;
};

/// One skip-gram negative-sampling step for the pair (center, context).
///
/// Minimizes  -log s(c.w) - sum_n log s(-n.w)  (s = logistic sigmoid) by one
/// gradient step of size `lr`; all gradients are taken at the incoming
/// values. Returns the loss before the step. Negatives are processed in
/// order, so a repeated negative row sees its own earlier update.
double sgns_pair_update(std::span<double> center, std::span<double> context,
                        std::span<const std::span<double>> negatives, double lr);

/// Called once per epoch with the mean per-pair loss.
using EpochCallback = std::function<void(int epoch, double mean_loss)>;

EmbeddingTable train_skipgram(std::span<const FeatureSentence> sentences, const TrainConfig& config,
                              const EpochCallback& on_epoch = {});

/// Learning rate for the given center-word visit out of `total` planned ones.
double decayed_lr(const TrainConfig& config, std::uint64_t visit, std::uint64_t total);

/// word2vec text format: "V dim" header, then "token x1 .. xdim" per row.
void save_embeddings(const EmbeddingTable& table, std::ostream& out);
/// Sidecar for exact resume: "V dim" header, then "token count y1 .. ydim"
/// with the output vectors.
void save_sidecar(const EmbeddingTable& table, std::ostream& out);
EmbeddingTable load_embeddings(std::istream& in);
/// Attaches output vectors and counts; tokens must match the table.
void load_sidecar(EmbeddingTable& table, std::istream& in);

void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path);
/// Loads `path` and, if present, `path` + ".ctx".
EmbeddingTable load_embeddings(const std::filesystem::path& path);

}  // namespace relfsim
