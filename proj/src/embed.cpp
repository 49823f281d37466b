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

#include "relfsim/embed.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include "relfsim/error.hpp"
#include "text_util.hpp"

namespace relfsim {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// log(sigmoid(x)) without overflow for large |x|.
double log_sigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

std::vector<std::vector<std::size_t>> encode(std::span<const FeatureSentence> sentences, const Vocabulary& vocab) {
  std::vector<std::vector<std::size_t>> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) {
    std::vector<std::size_t> ids;
    ids.reserve(s.tokens.size());
    for (const auto& tok : s.tokens) {
      if (auto idx = vocab.index_of(tok)) ids.push_back(*idx);
    }
    if (!ids.empty()) out.push_back(std::move(ids));
  }
  return out;
}

void check_finite(const EmbeddingTable& table, int epoch) {
  for (const Matrix* m : {&table.input_vectors, &table.output_vectors}) {
    for (std::size_t r = 0; r < m->rows(); ++r) {
      for (double x : m->row(r)) {
        if (!std::isfinite(x)) {
          throw NumericError("training diverged at epoch " + std::to_string(epoch) + ": non-finite vector for token '" +
                             table.vocab.token(r) + "'");
        }
      }
    }
  }
}

[[noreturn]] void parse_fail(std::size_t line_no, const std::string& why) {
  throw InputError("embedding file line " + std::to_string(line_no) + ": " + why);
}

}  // namespace

Vocabulary::Vocabulary(std::vector<std::pair<std::string, std::uint64_t>> counts) {
  std::sort(counts.begin(), counts.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  tokens_.reserve(counts.size());
  counts_.reserve(counts.size());
  for (auto& [tok, n] : counts) {
    if (!index_.emplace(tok, tokens_.size()).second) throw ContractError("duplicate vocabulary token '" + tok + "'");
    tokens_.push_back(std::move(tok));
    counts_.push_back(n);
  }
}

std::optional<std::size_t> Vocabulary::index_of(const std::string& token) const {
  auto it = index_.find(token);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Vocabulary build_vocabulary(std::span<const FeatureSentence> sentences, std::uint64_t min_count) {
  std::unordered_map<std::string, std::uint64_t> freq;
  for (const auto& s : sentences) {
    for (const auto& tok : s.tokens) ++freq[tok];
  }
  std::vector<std::pair<std::string, std::uint64_t>> kept;
  for (auto& [tok, n] : freq) {
    if (n >= min_count) kept.emplace_back(tok, n);
  }
  if (kept.empty()) throw InputError("vocabulary is empty at min_count " + std::to_string(min_count));
  return Vocabulary(std::move(kept));
}

void TrainConfig::validate() const {
  if (window < 1) throw ContractError("window must be >= 1");
  if (dim < 1) throw ContractError("dim must be >= 1");
  if (negatives < 0) throw ContractError("negatives must be >= 0");
  if (min_count < 1) throw ContractError("min_count must be >= 1");
  if (epochs < 1) throw ContractError("epochs must be >= 1");
  if (!(final_lr > 0.0 && final_lr <= initial_lr)) throw ContractError("learning rates need 0 < final_lr <= initial_lr");
  if (!(ns_exponent >= 0.0)) throw ContractError("ns_exponent must be >= 0");
  if (workers < 1) throw ContractError("workers must be >= 1");
}

std::optional<std::span<const double>> EmbeddingTable::vector(const std::string& token) const {
  auto idx = vocab.index_of(token);
  if (!idx) return std::nullopt;
  return input_vectors.row(*idx);
}

NegativeSampler::NegativeSampler(const Vocabulary& vocab, double exponent) {
  cdf_.resize(vocab.size());
  double total = 0.0;
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    total += std::pow(static_cast<double>(vocab.count(i)), exponent);
    cdf_[i] = total;
  }
  for (auto& c : cdf_) c /= total;
  if (!cdf_.empty()) cdf_.back() = 1.0;
}

double NegativeSampler::probability(std::size_t index) const {
  return index == 0 ? cdf_.at(0) : cdf_.at(index) - cdf_.at(index - 1);
}

std::size_t NegativeSampler::sample(double u) const {
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  if (it == cdf_.end()) --it;
  return static_cast<std::size_t>(it - cdf_.begin());
}

double sgns_pair_update(std::span<double> center, std::span<double> context,
                        std::span<const std::span<double>> negatives, double lr) {
  const std::size_t dim = center.size();
  if (context.size() != dim) throw ContractError("sgns_pair_update: context dimension mismatch");
  for (const auto& n : negatives) {
    if (n.size() != dim) throw ContractError("sgns_pair_update: negative dimension mismatch");
  }
  if (!(lr >= 0.0)) throw ContractError("sgns_pair_update: lr must be >= 0");

  std::vector<double> center_grad(dim, 0.0);
  auto step = [&](std::span<double> out, double label) {
    const double score = dot(out, center);
    const double g = label - sigmoid(score);
    for (std::size_t k = 0; k < dim; ++k) {
      center_grad[k] += g * out[k];
      out[k] += lr * g * center[k];
    }
    return label > 0.5 ? log_sigmoid(score) : log_sigmoid(-score);
  };

  double objective = step(context, 1.0);
  for (const auto& n : negatives) objective += step(n, 0.0);
  for (std::size_t k = 0; k < dim; ++k) center[k] += lr * center_grad[k];
  return -objective;
}

double decayed_lr(const TrainConfig& config, std::uint64_t visit, std::uint64_t total) {
  if (total <= 1) return config.initial_lr;
  if (visit >= total - 1) return config.final_lr;
  const double progress = static_cast<double>(visit) / static_cast<double>(total - 1);
  return config.initial_lr - (config.initial_lr - config.final_lr) * progress;
}

EmbeddingTable train_skipgram(std::span<const FeatureSentence> sentences, const TrainConfig& config,
                              const EpochCallback& on_epoch) {
  config.validate();
  EmbeddingTable table;
  table.vocab = build_vocabulary(sentences, static_cast<std::uint64_t>(config.min_count));
  const std::size_t vsize = table.vocab.size();
  const std::size_t dim = static_cast<std::size_t>(config.dim);
  table.input_vectors = Matrix(vsize, dim);
  table.output_vectors = Matrix(vsize, dim, 0.0);

  Rng init_rng(config.seed);
  for (double& x : table.input_vectors.data()) x = (init_rng.uniform() - 0.5) / static_cast<double>(dim);

  const auto corpus = encode(sentences, table.vocab);
  const NegativeSampler sampler(table.vocab, config.ns_exponent);
  std::uint64_t tokens_per_epoch = 0;
  for (const auto& s : corpus) tokens_per_epoch += s.size();
  const std::uint64_t total_visits = tokens_per_epoch * static_cast<std::uint64_t>(config.epochs);
  const int workers = std::max(1, std::min<int>(config.workers, static_cast<int>(corpus.size())));
  const bool can_sample = vsize > 1 && config.negatives > 0;

  std::vector<Rng> rngs;
  for (int w = 0; w < workers; ++w) rngs.emplace_back(config.seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(w + 1));

  std::atomic<std::uint64_t> visits{0};
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<double> loss_sum(static_cast<std::size_t>(workers), 0.0);
    std::vector<std::uint64_t> pair_count(static_cast<std::size_t>(workers), 0);

    // Workers share the matrices without locks; rows touched concurrently
    // may lose updates. Only workers == 1 is bit-reproducible.
    auto run = [&](int w) {
      Rng& rng = rngs[static_cast<std::size_t>(w)];
      std::vector<std::span<double>> negs(static_cast<std::size_t>(can_sample ? config.negatives : 0));
      for (std::size_t si = static_cast<std::size_t>(w); si < corpus.size(); si += static_cast<std::size_t>(workers)) {
        const auto& sent = corpus[si];
        const auto len = static_cast<std::ptrdiff_t>(sent.size());
        for (std::ptrdiff_t t = 0; t < len; ++t) {
          const double lr = decayed_lr(config, visits.fetch_add(1, std::memory_order_relaxed), total_visits);
          const auto reach = static_cast<std::ptrdiff_t>(1 + rng.below(static_cast<std::uint64_t>(config.window)));
          const std::size_t self = sent[static_cast<std::size_t>(t)];
          auto center = table.input_vectors.row(self);
          for (std::ptrdiff_t c = std::max<std::ptrdiff_t>(0, t - reach); c <= std::min(len - 1, t + reach); ++c) {
            if (c == t) continue;
            const std::size_t ctx = sent[static_cast<std::size_t>(c)];
            // Negatives equal to the context or the center are redrawn.
            for (auto& n : negs) {
              std::size_t draw;
              do {
                draw = sampler.sample(rng.uniform());
              } while (draw == ctx || (draw == self && vsize > 2));
              n = table.output_vectors.row(draw);
            }
            loss_sum[static_cast<std::size_t>(w)] += sgns_pair_update(center, table.output_vectors.row(ctx), negs, lr);
            ++pair_count[static_cast<std::size_t>(w)];
          }
        }
      }
    };

    if (workers == 1) {
      run(0);
    } else {
      std::vector<std::jthread> pool;
      for (int w = 0; w < workers; ++w) pool.emplace_back(run, w);
    }

    check_finite(table, epoch);
    if (on_epoch) {
      double loss = 0.0;
      std::uint64_t pairs = 0;
      for (int w = 0; w < workers; ++w) {
        loss += loss_sum[static_cast<std::size_t>(w)];
        pairs += pair_count[static_cast<std::size_t>(w)];
      }
      on_epoch(epoch, pairs ? loss / static_cast<double>(pairs) : 0.0);
    }
  }
  return table;
}

void save_embeddings(const EmbeddingTable& table, std::ostream& out) {
  const auto& vocab = table.vocab;
  for (const auto& tok : vocab.tokens()) {
    if (tok.empty() || tok.find_first_of(" \t\r\n") != std::string::npos) {
      throw ContractError("token '" + tok + "' contains whitespace and cannot be saved");
    }
  }
  out << vocab.size() << ' ' << table.dim() << '\n';
  for (std::size_t r = 0; r < vocab.size(); ++r) {
    out << vocab.token(r);
    for (double x : table.input_vectors.row(r)) out << ' ' << detail::format_real(x);
    out << '\n';
  }
  if (!out) throw InputError("failed writing embeddings");
}

void save_sidecar(const EmbeddingTable& table, std::ostream& out) {
  const auto& vocab = table.vocab;
  if (table.output_vectors.rows() != vocab.size()) throw ContractError("table has no output vectors to save");
  out << vocab.size() << ' ' << table.dim() << '\n';
  for (std::size_t r = 0; r < vocab.size(); ++r) {
    out << vocab.token(r) << ' ' << vocab.count(r);
    for (double x : table.output_vectors.row(r)) out << ' ' << detail::format_real(x);
    out << '\n';
  }
  if (!out) throw InputError("failed writing embedding sidecar");
}

namespace {

struct TextRows {
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::vector<std::string> tokens;
  std::vector<std::uint64_t> counts;
  std::vector<double> values;
};

TextRows read_rows(std::istream& in, bool with_counts) {
  if (!in) throw InputError("embedding stream is not readable");
  TextRows rows;
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) parse_fail(1, "missing header");
  {
    std::istringstream hs(line);
    long long v = -1, d = -1;
    std::string extra;
    if (!(hs >> v >> d) || (hs >> extra) || v < 0 || d < 1) parse_fail(1, "malformed header, expected 'V dim'");
    rows.rows = static_cast<std::size_t>(v);
    rows.dim = static_cast<std::size_t>(d);
  }
  rows.values.reserve(rows.rows * rows.dim);
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (rows.tokens.size() == rows.rows) parse_fail(line_no, "more rows than the header declares");
    if (with_counts) {
      std::string c;
      ls >> c;
      auto n = detail::parse_number<std::uint64_t>(c);
      if (!n) parse_fail(line_no, "malformed count");
      rows.counts.push_back(*n);
    }
    std::size_t k = 0;
    std::string field;
    while (ls >> field) {
      auto x = detail::parse_number<double>(field);
      if (!x) parse_fail(line_no, "malformed value '" + field + "'");
      rows.values.push_back(*x);
      ++k;
    }
    if (k != rows.dim) {
      parse_fail(line_no, "row has " + std::to_string(k) + " values, expected " + std::to_string(rows.dim));
    }
    rows.tokens.push_back(std::move(tok));
  }
  if (in.bad()) throw InputError("I/O error while reading embeddings");
  if (rows.tokens.size() != rows.rows) {
    parse_fail(line_no, "header declares " + std::to_string(rows.rows) + " rows, found " + std::to_string(rows.tokens.size()));
  }
  return rows;
}

}  // namespace

EmbeddingTable load_embeddings(std::istream& in) {
  auto rows = read_rows(in, false);
  std::vector<std::pair<std::string, std::uint64_t>> counts;
  counts.reserve(rows.rows);
  for (const auto& t : rows.tokens) counts.emplace_back(t, 0);

  EmbeddingTable table;
  // All counts are zero, so the canonical order is lexicographic; rows are
  // placed by lookup rather than file position.
  table.vocab = Vocabulary(std::move(counts));
  table.input_vectors = Matrix(rows.rows, rows.dim);
  for (std::size_t r = 0; r < rows.rows; ++r) {
    auto dst = table.input_vectors.row(*table.vocab.index_of(rows.tokens[r]));
    std::copy_n(rows.values.begin() + static_cast<std::ptrdiff_t>(r * rows.dim), rows.dim, dst.begin());
  }
  return table;
}

void load_sidecar(EmbeddingTable& table, std::istream& in) {
  auto rows = read_rows(in, true);
  if (rows.rows != table.vocab.size() || rows.dim != static_cast<std::size_t>(table.dim())) {
    throw InputError("sidecar shape does not match the embedding table");
  }
  std::vector<std::pair<std::string, std::uint64_t>> counts;
  for (std::size_t r = 0; r < rows.rows; ++r) {
    if (!table.vocab.index_of(rows.tokens[r])) throw InputError("sidecar token '" + rows.tokens[r] + "' not in embeddings");
    counts.emplace_back(rows.tokens[r], rows.counts[r]);
  }
  Vocabulary vocab(std::move(counts));
  Matrix input(rows.rows, rows.dim);
  Matrix output(rows.rows, rows.dim);
  for (std::size_t r = 0; r < rows.rows; ++r) {
    const std::size_t dst = *vocab.index_of(rows.tokens[r]);
    auto src_in = table.input_vectors.row(*table.vocab.index_of(rows.tokens[r]));
    std::copy(src_in.begin(), src_in.end(), input.row(dst).begin());
    std::copy_n(rows.values.begin() + static_cast<std::ptrdiff_t>(r * rows.dim), rows.dim, output.row(dst).begin());
  }
  table.vocab = std::move(vocab);
  table.input_vectors = std::move(input);
  table.output_vectors = std::move(output);
}

void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path) {
  {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    save_embeddings(table, out);
  }
  if (table.output_vectors.rows() == table.vocab.size() && table.vocab.size() > 0) {
    auto side = path;
    side += ".ctx";
    std::ofstream out(side);
    if (!out) throw InputError("cannot write " + side.string());
    save_sidecar(table, out);
  }
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open embeddings " + path.string());
  auto table = load_embeddings(in);
  auto side = path;
  side += ".ctx";
  if (std::filesystem::exists(side)) {
    std::ifstream sin(side);
    load_sidecar(table, sin);
  }
  return table;
}

}  // namespace relfsim
