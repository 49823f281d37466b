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

#include "relfsim/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

#include "relfsim/embed.hpp"
#include "relfsim/error.hpp"
#include "text_util.hpp"

namespace relfsim {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t n = v.size(); n > 1; --n) {
    std::swap(v[n - 1], v[static_cast<std::size_t>(rng.below(n))]);
  }
}

std::string format_fraction(double x) {
  std::ostringstream os;
  os << x;
  return os.str();
}

class KnnModel final : public RatingPredictor {
 public:
  KnnModel(std::unique_ptr<SimilarityProvider> provider, const RatingDataset& train, const PredictionConfig& config)
      : provider_(std::move(provider)), knn_(train, *provider_, config) {}
  Prediction predict(UserId user, ItemId item) const override { return knn_.predict(user, item); }

 private:
  std::unique_ptr<SimilarityProvider> provider_;
  KnnPredictor knn_;
};

FoldMetrics score(std::size_t fold, std::span<const RatingRecord> tests, std::span<const Prediction> preds) {
  std::vector<PredictedActual> pairs;
  pairs.reserve(tests.size());
  FoldMetrics m;
  m.fold = fold;
  for (std::size_t x = 0; x < tests.size(); ++x) {
    pairs.emplace_back(preds[x].value, tests[x].rating);
    if (preds[x].detail != PredictionDetail::full) ++m.n_fallbacks;
  }
  m.rmse = rmse(pairs);
  m.mae = mae(pairs);
  m.n_predictions = pairs.size();
  return m;
}

std::vector<UserItem> as_pairs(std::span<const RatingRecord> tests) {
  std::vector<UserItem> pairs;
  pairs.reserve(tests.size());
  for (const auto& r : tests) pairs.emplace_back(r.user, r.item);
  return pairs;
}

}  // namespace

double rmse(std::span<const PredictedActual> pairs) {
  if (pairs.empty()) throw ContractError("rmse of an empty set");
  double sq = 0.0;
  for (const auto& [p, a] : pairs) sq += (p - a) * (p - a);
  return std::sqrt(sq / static_cast<double>(pairs.size()));
}

double mae(std::span<const PredictedActual> pairs) {
  if (pairs.empty()) throw ContractError("mae of an empty set");
  double s = 0.0;
  for (const auto& [p, a] : pairs) s += std::abs(p - a);
  return s / static_cast<double>(pairs.size());
}

std::string split_label(const SplitKind& kind) {
  return std::visit(overloaded{
                        [](const KFold& k) { return "kfold-" + std::to_string(k.folds); },
                        [](const Holdout& h) { return "holdout-" + format_fraction(h.train_ratio); },
                        [](const ColdStart& c) { return "cold-start-" + format_fraction(c.item_fraction); },
                    },
                    kind);
}

SplitPlan::SplitPlan(SplitKind kind, std::uint64_t seed, std::vector<std::uint32_t> assignment,
                     std::vector<ItemId> cold_items)
    : kind_(kind), seed_(seed), assignment_(std::move(assignment)), cold_items_(std::move(cold_items)) {}

std::size_t SplitPlan::evaluations() const {
  if (const auto* k = std::get_if<KFold>(&kind_)) return k->folds;
  return 1;
}

bool SplitPlan::is_test(std::size_t record, std::size_t evaluation) const {
  if (std::holds_alternative<KFold>(kind_)) return assignment_.at(record) == evaluation;
  return assignment_.at(record) == 1;
}

SplitPlan make_split(const RatingDataset& ratings, const SplitKind& kind, std::uint64_t seed) {
  const std::size_t n = ratings.size();
  Rng rng(seed);
  std::vector<std::uint32_t> assignment(n, 0);

  if (const auto* kf = std::get_if<KFold>(&kind)) {
    if (kf->folds < 2) throw ContractError("k-fold needs at least 2 folds");
    if (kf->folds > n) throw ContractError("more folds than records");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    shuffle(order, rng);
    for (std::size_t pos = 0; pos < n; ++pos) assignment[order[pos]] = static_cast<std::uint32_t>(pos % kf->folds);
    return SplitPlan(kind, seed, std::move(assignment));
  }

  if (const auto* ho = std::get_if<Holdout>(&kind)) {
    if (!(ho->train_ratio > 0.0 && ho->train_ratio < 1.0)) throw ContractError("holdout ratio must be in (0, 1)");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    shuffle(order, rng);
    const auto n_train = static_cast<std::size_t>(std::llround(ho->train_ratio * static_cast<double>(n)));
    for (std::size_t pos = n_train; pos < n; ++pos) assignment[order[pos]] = 1;
    return SplitPlan(kind, seed, std::move(assignment));
  }

  const auto& cs = std::get<ColdStart>(kind);
  if (!(cs.item_fraction > 0.0 && cs.item_fraction < 1.0)) throw ContractError("cold-start fraction must be in (0, 1)");
  auto items = ratings.items();
  if (items.size() < 2) throw ContractError("cold-start split needs at least 2 items");
  auto n_cold = static_cast<std::size_t>(std::llround(cs.item_fraction * static_cast<double>(items.size())));
  n_cold = std::clamp<std::size_t>(n_cold, 1, items.size() - 1);
  shuffle(items, rng);
  items.resize(n_cold);
  std::sort(items.begin(), items.end());
  const auto& recs = ratings.records();
  for (std::size_t x = 0; x < n; ++x) {
    if (std::binary_search(items.begin(), items.end(), recs[x].item)) assignment[x] = 1;
  }
  return SplitPlan(kind, seed, std::move(assignment), std::move(items));
}

RatingDataset train_snapshot(const RatingDataset& all, const SplitPlan& plan, std::size_t evaluation) {
  std::vector<RatingRecord> train;
  const auto& recs = all.records();
  if (plan.assignment().size() != recs.size()) throw ContractError("split plan does not match the dataset");
  for (std::size_t x = 0; x < recs.size(); ++x) {
    if (!plan.is_test(x, evaluation)) train.push_back(recs[x]);
  }
  return RatingDataset(std::move(train), all.scale());
}

std::vector<RatingRecord> test_records(const RatingDataset& all, const SplitPlan& plan, std::size_t evaluation) {
  std::vector<RatingRecord> test;
  const auto& recs = all.records();
  if (plan.assignment().size() != recs.size()) throw ContractError("split plan does not match the dataset");
  for (std::size_t x = 0; x < recs.size(); ++x) {
    if (plan.is_test(x, evaluation)) test.push_back(recs[x]);
  }
  return test;
}

MetricReport evaluate(const PredictorFactory& factory, const RatingDataset& all, const SplitPlan& plan,
                      std::size_t workers) {
  MetricReport report;
  for (std::size_t e = 0; e < plan.evaluations(); ++e) {
    const auto train = train_snapshot(all, plan, e);
    const auto tests = test_records(all, plan, e);
    const auto predictor = factory(train);
    const auto pairs = as_pairs(tests);
    const auto preds = predict_batch(*predictor, pairs, workers);
    report.per_fold.push_back(score(e, tests, preds));
  }
  double rmse_sum = 0.0, mae_sum = 0.0;
  for (const auto& f : report.per_fold) {
    rmse_sum += f.rmse;
    mae_sum += f.mae;
    report.n_predictions += f.n_predictions;
    report.n_fallbacks += f.n_fallbacks;
  }
  report.rmse = rmse_sum / static_cast<double>(report.per_fold.size());
  report.mae = mae_sum / static_cast<double>(report.per_fold.size());
  return report;
}

std::unique_ptr<RatingPredictor> make_knn_model(SimilarityKind kind, const RatingDataset& train,
                                                const ItemVectorIndex* index, const PredictionConfig& config,
                                                const EvalOptions& options) {
  return std::make_unique<KnnModel>(make_similarity(kind, train, index, options.policy, options.cache_capacity), train,
                                    config);
}

MetricReport evaluate(SimilarityKind kind, const RatingDataset& all, const ItemVectorIndex* index,
                      const SplitPlan& plan, const PredictionConfig& config, const EvalOptions& options) {
  PredictionConfig cfg = config;
  cfg.similarity = kind;
  return evaluate([&](const RatingDataset& train) { return make_knn_model(kind, train, index, cfg, options); }, all,
                  plan, options.workers);
}

const char* predictor_label(SimilarityKind kind) {
  switch (kind) {
    case SimilarityKind::rating: return "cf";
    case SimilarityKind::content: return "cb";
    case SimilarityKind::hybrid: return "hybrid";
  }
  return "?";
}

std::vector<ResultRow> result_rows(SimilarityKind kind, const SplitPlan& plan, std::size_t k,
                                   const MetricReport& report) {
  std::vector<ResultRow> rows;
  const auto label = split_label(plan.kind());
  for (const auto& f : report.per_fold) {
    rows.push_back({predictor_label(kind), label, plan.seed(), k, std::to_string(f.fold), f.rmse, f.mae,
                    f.n_predictions, f.n_fallbacks});
  }
  if (std::holds_alternative<KFold>(plan.kind())) {
    rows.push_back({predictor_label(kind), label, plan.seed(), k, "mean", report.rmse, report.mae,
                    report.n_predictions, report.n_fallbacks});
  }
  return rows;
}

std::vector<ResultRow> sweep_k(std::span<const std::size_t> ks, std::span<const SimilarityKind> kinds,
                               const RatingDataset& all, const ItemVectorIndex* index, const SplitPlan& plan,
                               const PredictionConfig& config, const EvalOptions& options) {
  if (ks.empty()) throw ContractError("sweep_k needs at least one k");
  if (plan.evaluations() != 1) throw ContractError("sweep_k runs on a single train/test plan");
  const auto train = train_snapshot(all, plan, 0);
  const auto tests = test_records(all, plan, 0);
  const auto pairs = as_pairs(tests);
  std::vector<ResultRow> rows;
  for (SimilarityKind kind : kinds) {
    const auto provider = make_similarity(kind, train, index, options.policy, options.cache_capacity);
    for (std::size_t k : ks) {
      PredictionConfig cfg = config;
      cfg.k = k;
      cfg.similarity = kind;
      const KnnPredictor knn(train, *provider, cfg);
      const auto preds = predict_batch(knn, pairs, options.workers);
      MetricReport report;
      report.per_fold.push_back(score(0, tests, preds));
      report.rmse = report.per_fold[0].rmse;
      report.mae = report.per_fold[0].mae;
      report.n_predictions = report.per_fold[0].n_predictions;
      report.n_fallbacks = report.per_fold[0].n_fallbacks;
      auto r = result_rows(kind, plan, k, report);
      rows.insert(rows.end(), r.begin(), r.end());
    }
  }
  return rows;
}

void write_results_csv(std::span<const ResultRow> rows, std::ostream& out) {
  out << "predictor,split,seed,k,fold,rmse,mae,n_predictions,n_fallbacks\n";
  for (const auto& r : rows) {
    out << r.predictor << ',' << r.split << ',' << r.seed << ',' << r.k << ',' << r.fold << ','
        << detail::format_real(r.rmse) << ',' << detail::format_real(r.mae) << ',' << r.n_predictions << ','
        << r.n_fallbacks << '\n';
  }
}

}  // namespace relfsim
