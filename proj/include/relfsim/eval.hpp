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
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "relfsim/ingest.hpp"
#include "relfsim/predict.hpp"
#include "relfsim/simcore.hpp"

namespace relfsim {

/// (predicted, actual)
using PredictedActual = std::pair<double, double>;

double rmse(std::span<const PredictedActual> pairs);
double mae(std::span<const PredictedActual> pairs);

struct KFold {
  std::size_t folds = 5;
};
struct Holdout {
  double train_ratio = 0.8;
};
/// All ratings of a random `item_fraction` of the items go to test; every
/// other rating is training data.
struct ColdStart {
  double item_fraction = 0.05;
};
using SplitKind = std::variant<KFold, Holdout, ColdStart>;

/// Short label used in result files, e.g. "kfold-5", "holdout-0.8".
std::string split_label(const SplitKind& kind);

class SplitPlan {
 public:
  SplitPlan(SplitKind kind, std::uint64_t seed, std::vector<std::uint32_t> assignment,
            std::vector<ItemId> cold_items = {});

  const SplitKind& kind() const { return kind_; }
  std::uint64_t seed() const { return seed_; }
  /// Number of train/test evaluations: the fold count for k-fold, else 1.
  std::size_t evaluations() const;
  /// Fold index for k-fold; 0 = train, 1 = test otherwise.
  const std::vector<std::uint32_t>& assignment() const { return assignment_; }
  bool is_test(std::size_t record, std::size_t evaluation) const;
  /// Sorted; empty unless cold-start.
  const std::vector<ItemId>& cold_items() const { return cold_items_; }

 private:
  SplitKind kind_;
  std::uint64_t seed_;
  std::vector<std::uint32_t> assignment_;
  std::vector<ItemId> cold_items_;
};

/// Deterministic for a fixed seed. Throws ContractError for a ratio or
/// fraction outside (0, 1), fewer than 2 folds, or more folds than records.
SplitPlan make_split(const RatingDataset& ratings, const SplitKind& kind, std::uint64_t seed);

/// Training side of one evaluation, built only from train records.
RatingDataset train_snapshot(const RatingDataset& all, const SplitPlan& plan, std::size_t evaluation);
std::vector<RatingRecord> test_records(const RatingDataset& all, const SplitPlan& plan, std::size_t evaluation);

struct FoldMetrics {
  std::size_t fold = 0;
  double rmse = 0.0;
  double mae = 0.0;
  std::size_t n_predictions = 0;
  std::size_t n_fallbacks = 0;
};

struct MetricReport {
  /// Unweighted mean over folds for k-fold plans.
  double rmse = 0.0;
  double mae = 0.0;
  std::size_t n_predictions = 0;
  std::size_t n_fallbacks = 0;
  std::vector<FoldMetrics> per_fold;
};

/// Builds a predictor from a training snapshot. The returned object must stay
/// valid while the snapshot does.
using PredictorFactory = std::function<std::unique_ptr<RatingPredictor>(const RatingDataset& train)>;

struct EvalOptions {
  HybridPolicy policy;
  std::size_t workers = 1;
  std::size_t cache_capacity = std::size_t{1} << 21;
};

MetricReport evaluate(const PredictorFactory& factory, const RatingDataset& all, const SplitPlan& plan,
                      std::size_t workers = 1);

/// k-NN predictor over the `kind` similarity. `index` is needed for content
/// and hybrid and must not depend on ratings.
MetricReport evaluate(SimilarityKind kind, const RatingDataset& all, const ItemVectorIndex* index,
                      const SplitPlan& plan, const PredictionConfig& config, const EvalOptions& options = {});

/// Owns a similarity provider and the k-NN predictor reading it.
std::unique_ptr<RatingPredictor> make_knn_model(SimilarityKind kind, const RatingDataset& train,
                                                const ItemVectorIndex* index, const PredictionConfig& config,
                                                const EvalOptions& options = {});

/// Predictor label in result files: cf, cb, hybrid.
const char* predictor_label(SimilarityKind kind);

struct ResultRow {
  std::string predictor;
  std::string split;
  std::uint64_t seed = 0;
  std::size_t k = 0;
  std::string fold;  ///< fold index, or "mean" for the k-fold aggregate
  double rmse = 0.0;
  double mae = 0.0;
  std::size_t n_predictions = 0;
  std::size_t n_fallbacks = 0;
};

/// Per-fold rows, plus a "mean" row for k-fold plans.
std::vector<ResultRow> result_rows(SimilarityKind kind, const SplitPlan& plan, std::size_t k,
                                   const MetricReport& report);

/// One holdout evaluation per (predictor, k), reusing one training snapshot
/// and similarity cache per predictor.
std::vector<ResultRow> sweep_k(std::span<const std::size_t> ks, std::span<const SimilarityKind> kinds,
                               const RatingDataset& all, const ItemVectorIndex* index, const SplitPlan& plan,
                               const PredictionConfig& config, const EvalOptions& options = {});

/// Header `predictor,split,seed,k,fold,rmse,mae,n_predictions,n_fallbacks`.
void write_results_csv(std::span<const ResultRow> rows, std::ostream& out);

}  // namespace relfsim
