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

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "relfsim/cli.hpp"
#include "relfsim/embed.hpp"
#include "relfsim/error.hpp"
#include "relfsim/eval.hpp"
#include "relfsim/ingest.hpp"
#include "relfsim/predict.hpp"
#include "relfsim/simcore.hpp"
#include "relfsim/synthetic.hpp"

namespace py = pybind11;
using namespace relfsim;

namespace {

/// KNN predictor that owns its similarity provider. The train set and item
/// index are borrowed and pinned from Python with keep_alive.
class Model {
 public:
  Model(SimilarityKind kind, const RatingDataset& train, const ItemVectorIndex* index, PredictionConfig config,
        HybridPolicy policy, std::size_t cache_capacity)
      : provider_(make_similarity(kind, train, index, policy, cache_capacity)),
        knn_(train, *provider_, with_kind(config, kind)) {}

  Prediction predict(UserId u, ItemId i) const { return knn_.predict(u, i); }
  std::vector<Prediction> predict_many(const std::vector<UserItem>& pairs, std::size_t workers) const {
    return predict_batch(knn_, pairs, workers);
  }
  std::vector<Neighbor> neighborhood(UserId u, ItemId i) const { return knn_.neighborhood(u, i); }
  std::vector<Recommendation> recommend(UserId u, std::size_t n, const std::vector<ItemId>& universe) const {
    return recommend_top_n(knn_, u, n, universe);
  }
  std::optional<SimilarityValue> similarity(ItemId i, ItemId j) const { return provider_->similarity(i, j); }

 private:
  static PredictionConfig with_kind(PredictionConfig c, SimilarityKind kind) {
    c.similarity = kind;
    return c;
  }
  std::unique_ptr<SimilarityProvider> provider_;
  KnnPredictor knn_;
};

py::array_t<double> to_numpy(const Matrix& m) {
  py::array_t<double> out({m.rows(), m.cols()});
  auto data = m.data();
  std::copy(data.begin(), data.end(), out.mutable_data());
  return out;
}

SplitKind split_from(const std::string& name, double param) {
  if (name == "kfold") return KFold{static_cast<std::size_t>(param)};
  if (name == "holdout") return Holdout{param};
  if (name == "cold-start") return ColdStart{param};
  throw ContractError("unknown split '" + name + "' (kfold, holdout, cold-start)");
}

}  // namespace

PYBIND11_MODULE(_relfsim, m) {
  m.doc() = "Hybrid item-KNN recommender with feature-embedding content similarity";

  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<UnknownIdError>(m, "UnknownIdError", PyExc_KeyError);
  py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);

  py::class_<RatingScale>(m, "RatingScale")
      .def(py::init<double, double>(), py::arg("min") = 1.0, py::arg("max") = 5.0)
      .def_readwrite("min", &RatingScale::min)
      .def_readwrite("max", &RatingScale::max);

  py::class_<RatingRecord>(m, "RatingRecord")
      .def(py::init<UserId, ItemId, double, std::int64_t>(), py::arg("user"), py::arg("item"), py::arg("rating"),
           py::arg("timestamp") = 0)
      .def_readwrite("user", &RatingRecord::user)
      .def_readwrite("item", &RatingRecord::item)
      .def_readwrite("rating", &RatingRecord::rating)
      .def_readwrite("timestamp", &RatingRecord::timestamp)
      .def("__repr__", [](const RatingRecord& r) {
        std::ostringstream s;
        s << "RatingRecord(" << r.user << ", " << r.item << ", " << r.rating << ", " << r.timestamp << ")";
        return s.str();
      });

  py::class_<RatingDataset>(m, "RatingDataset")
      .def(py::init<std::vector<RatingRecord>, RatingScale>(), py::arg("records"), py::arg("scale") = RatingScale{})
      .def("__len__", &RatingDataset::size)
      .def_property_readonly("records", &RatingDataset::records)
      .def_property_readonly("global_mean", &RatingDataset::global_mean)
      .def("item_mean", &RatingDataset::item_mean)
      .def("item_count", &RatingDataset::item_count)
      .def("has_item", &RatingDataset::has_item)
      .def("has_user", &RatingDataset::has_user)
      .def("items", &RatingDataset::items)
      .def("users", &RatingDataset::users)
      .def("user_ratings", [](const RatingDataset& d, UserId u) {
        std::vector<std::pair<ItemId, double>> out;
        for (const auto& e : d.user_ratings(u)) out.emplace_back(e.id, e.rating);
        return out;
      });

  m.def(
      "parse_ratings",
      [](const std::filesystem::path& path, RatingScale scale) {
        ParseOptions opts;
        opts.scale = scale;
        return parse_ratings(path, detect_rating_format(path.string()), opts);
      },
      py::arg("path"), py::arg("scale") = RatingScale{}, "Read a MovieLens .dat or CSV ratings file.");

  py::class_<FeatureEntry>(m, "FeatureEntry")
      .def(py::init<>())
      .def(py::init([](std::vector<std::string> d, std::vector<std::string> s, std::vector<std::string> c) {
             return FeatureEntry{std::move(d), std::move(s), std::move(c)};
           }),
           py::arg("directors"), py::arg("screenwriters") = std::vector<std::string>{},
           py::arg("cast") = std::vector<std::string>{})
      .def_readwrite("directors", &FeatureEntry::directors)
      .def_readwrite("screenwriters", &FeatureEntry::screenwriters)
      .def_readwrite("cast", &FeatureEntry::cast);

  py::class_<FeatureCatalog>(m, "FeatureCatalog")
      .def(py::init<>())
      .def_readwrite("entries", &FeatureCatalog::entries);

  m.def(
      "parse_item_features", [](const std::filesystem::path& path) { return parse_item_features(path); },
      py::arg("path"));
  m.def("canonical_token", &canonical_token);

  py::class_<FeatureSentence>(m, "FeatureSentence")
      .def(py::init<ItemId, std::vector<std::string>>(), py::arg("item"), py::arg("tokens"))
      .def_readwrite("item", &FeatureSentence::item)
      .def_readwrite("tokens", &FeatureSentence::tokens);

  m.def("build_sentences", [](const FeatureCatalog& c) { return build_sentences(c).sentences; });

  py::class_<CorpusBundle>(m, "CorpusBundle")
      .def_readonly("ratings", &CorpusBundle::ratings)
      .def_readonly("sentences", &CorpusBundle::sentences)
      .def_readonly("catalog", &CorpusBundle::catalog)
      .def_property_readonly("report", [](const CorpusBundle& b) {
        return py::module_::import("json").attr("loads")(b.report.to_json());
      });

  m.def("clean_and_join", &clean_and_join, py::arg("ratings"), py::arg("catalog"));
  m.def("save_bundle", &save_bundle, py::arg("bundle"), py::arg("dir"));
  m.def("load_bundle", &load_bundle, py::arg("dir"), py::arg("scale") = RatingScale{});

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("window", &TrainConfig::window)
      .def_readwrite("dim", &TrainConfig::dim)
      .def_readwrite("negatives", &TrainConfig::negatives)
      .def_readwrite("min_count", &TrainConfig::min_count)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("initial_lr", &TrainConfig::initial_lr)
      .def_readwrite("final_lr", &TrainConfig::final_lr)
      .def_readwrite("ns_exponent", &TrainConfig::ns_exponent)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("workers", &TrainConfig::workers);

  py::class_<EmbeddingTable>(m, "EmbeddingTable")
      .def_property_readonly("dim", &EmbeddingTable::dim)
      .def_property_readonly("tokens", [](const EmbeddingTable& t) { return t.vocab.tokens(); })
      .def_property_readonly("input_vectors", [](const EmbeddingTable& t) { return to_numpy(t.input_vectors); })
      .def_property_readonly("output_vectors", [](const EmbeddingTable& t) { return to_numpy(t.output_vectors); })
      .def("vector",
           [](const EmbeddingTable& t, const std::string& token) -> std::optional<std::vector<double>> {
             auto v = t.vector(token);
             if (!v) return std::nullopt;
             return std::vector<double>(v->begin(), v->end());
           })
      .def("__len__", [](const EmbeddingTable& t) { return t.vocab.size(); });

  m.def(
      "train_skipgram",
      [](const std::vector<FeatureSentence>& sentences, const TrainConfig& config, py::object on_epoch) {
        EpochCallback cb;
        if (!on_epoch.is_none()) {
          cb = [on_epoch](int epoch, double loss) {
            py::gil_scoped_acquire gil;
            on_epoch(epoch, loss);
          };
        }
        py::gil_scoped_release release;
        return train_skipgram(sentences, config, cb);
      },
      py::arg("sentences"), py::arg("config") = TrainConfig{}, py::arg("on_epoch") = py::none());
  m.def("save_embeddings", py::overload_cast<const EmbeddingTable&, const std::filesystem::path&>(&save_embeddings));
  m.def("load_embeddings", py::overload_cast<const std::filesystem::path&>(&load_embeddings));

  py::enum_<SimilaritySource>(m, "SimilaritySource")
      .value("rating", SimilaritySource::rating)
      .value("content", SimilaritySource::content);

  py::class_<SimilarityValue>(m, "SimilarityValue")
      .def_readonly("value", &SimilarityValue::value)
      .def_readonly("support", &SimilarityValue::support)
      .def_readonly("source", &SimilarityValue::source);

  py::class_<ItemVectorIndex>(m, "ItemVectorIndex")
      .def("__len__", &ItemVectorIndex::size)
      .def("__contains__", &ItemVectorIndex::contains)
      .def("items", &ItemVectorIndex::items)
      .def_property_readonly("excluded", &ItemVectorIndex::excluded);

  m.def(
      "build_item_vectors",
      [](const std::vector<FeatureSentence>& sentences, const EmbeddingTable& table) {
        return build_item_vectors(sentences, table);
      },
      py::arg("sentences"), py::arg("table"));
  m.def("relf_sim", &relf_sim, py::arg("i"), py::arg("j"), py::arg("index"));
  m.def("rating_cosine", &rating_cosine, py::arg("i"), py::arg("j"), py::arg("ratings"));
  m.def(
      "cosine", [](const std::vector<double>& a, const std::vector<double>& b) { return cosine(a, b); },
      py::arg("a"), py::arg("b"));

  py::enum_<SimilarityKind>(m, "SimilarityKind")
      .value("rating", SimilarityKind::rating)
      .value("content", SimilarityKind::content)
      .value("hybrid", SimilarityKind::hybrid);

  py::class_<HybridPolicy>(m, "HybridPolicy")
      .def(py::init<>())
      .def_readwrite("tau_pair", &HybridPolicy::tau_pair)
      .def_readwrite("tau_item", &HybridPolicy::tau_item);

  py::class_<PredictionConfig>(m, "PredictionConfig")
      .def(py::init<>())
      .def_readwrite("k", &PredictionConfig::k)
      .def_readwrite("min_neighbors", &PredictionConfig::min_neighbors)
      .def_readwrite("clamp", &PredictionConfig::clamp);

  py::enum_<PredictionDetail>(m, "PredictionDetail")
      .value("full", PredictionDetail::full)
      .value("item_mean_fallback", PredictionDetail::item_mean_fallback)
      .value("global_mean_fallback", PredictionDetail::global_mean_fallback);

  py::class_<Prediction>(m, "Prediction")
      .def_readonly("value", &Prediction::value)
      .def_readonly("detail", &Prediction::detail)
      .def_readonly("neighbors_used", &Prediction::neighbors_used);

  py::class_<Neighbor>(m, "Neighbor")
      .def_readonly("item", &Neighbor::item)
      .def_readonly("similarity", &Neighbor::similarity)
      .def_readonly("rating", &Neighbor::rating);

  py::class_<Recommendation>(m, "Recommendation")
      .def_readonly("item", &Recommendation::item)
      .def_readonly("prediction", &Recommendation::prediction);

  py::class_<Model>(m, "Model")
      .def(py::init<SimilarityKind, const RatingDataset&, const ItemVectorIndex*, PredictionConfig, HybridPolicy,
                    std::size_t>(),
           py::arg("kind"), py::arg("train"), py::arg("index") = nullptr, py::arg("config") = PredictionConfig{},
           py::arg("policy") = HybridPolicy{}, py::arg("cache_capacity") = std::size_t{1} << 20, py::keep_alive<1, 3>(),
           py::keep_alive<1, 4>())
      .def("predict", &Model::predict, py::arg("user"), py::arg("item"))
      .def("predict_many", &Model::predict_many, py::arg("pairs"), py::arg("workers") = 1,
           py::call_guard<py::gil_scoped_release>())
      .def("neighborhood", &Model::neighborhood, py::arg("user"), py::arg("item"))
      .def("recommend", &Model::recommend, py::arg("user"), py::arg("n"), py::arg("universe"))
      .def("similarity", &Model::similarity, py::arg("i"), py::arg("j"));

  m.def(
      "rmse", [](const std::vector<PredictedActual>& p) { return rmse(p); }, py::arg("pairs"));
  m.def(
      "mae", [](const std::vector<PredictedActual>& p) { return mae(p); }, py::arg("pairs"));

  py::class_<SplitPlan>(m, "SplitPlan")
      .def_property_readonly("evaluations", &SplitPlan::evaluations)
      .def_property_readonly("cold_items", &SplitPlan::cold_items)
      .def_property_readonly("label", [](const SplitPlan& p) { return split_label(p.kind()); })
      .def("train", [](const SplitPlan& p, const RatingDataset& all, std::size_t e) { return train_snapshot(all, p, e); })
      .def("test", [](const SplitPlan& p, const RatingDataset& all, std::size_t e) { return test_records(all, p, e); });

  m.def(
      "make_split",
      [](const RatingDataset& ratings, const std::string& kind, double param, std::uint64_t seed) {
        return make_split(ratings, split_from(kind, param), seed);
      },
      py::arg("ratings"), py::arg("kind") = "kfold", py::arg("param") = 5.0, py::arg("seed") = 42,
      "kind is kfold (param = folds), holdout (param = train ratio) or cold-start (param = item fraction).");

  py::class_<FoldMetrics>(m, "FoldMetrics")
      .def_readonly("fold", &FoldMetrics::fold)
      .def_readonly("rmse", &FoldMetrics::rmse)
      .def_readonly("mae", &FoldMetrics::mae)
      .def_readonly("n_predictions", &FoldMetrics::n_predictions)
      .def_readonly("n_fallbacks", &FoldMetrics::n_fallbacks);

  py::class_<MetricReport>(m, "MetricReport")
      .def_readonly("rmse", &MetricReport::rmse)
      .def_readonly("mae", &MetricReport::mae)
      .def_readonly("n_predictions", &MetricReport::n_predictions)
      .def_readonly("n_fallbacks", &MetricReport::n_fallbacks)
      .def_readonly("per_fold", &MetricReport::per_fold);

  m.def(
      "evaluate",
      [](SimilarityKind kind, const RatingDataset& all, const ItemVectorIndex* index, const SplitPlan& plan,
         const PredictionConfig& config, const HybridPolicy& policy, std::size_t workers) {
        EvalOptions opts;
        opts.policy = policy;
        opts.workers = workers;
        return evaluate(kind, all, index, plan, config, opts);
      },
      py::arg("kind"), py::arg("ratings"), py::arg("index"), py::arg("plan"), py::arg("config") = PredictionConfig{},
      py::arg("policy") = HybridPolicy{}, py::arg("workers") = 1, py::call_guard<py::gil_scoped_release>());

  auto synth = m.def_submodule("synthetic", "Synthetic corpora for demos and tests");
  py::class_<synthetic::MovieWorld>(synth, "MovieWorld")
      .def_readonly("ratings", &synthetic::MovieWorld::ratings)
      .def_readonly("catalog", &synthetic::MovieWorld::catalog)
      .def_readonly("item_genre", &synthetic::MovieWorld::item_genre);
  synth.def(
      "movie_world",
      [](std::size_t users, std::size_t items, std::uint64_t seed) {
        synthetic::MovieWorldConfig c;
        c.users = users;
        c.items = items;
        c.seed = seed;
        return synthetic::movie_world(c);
      },
      py::arg("users") = 500, py::arg("items") = 300, py::arg("seed") = 7);
  synth.def("two_clique_corpus", &synthetic::two_clique_corpus, py::arg("tokens_per_clique"), py::arg("sentences"),
            py::arg("seed"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = cli::run(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run the command-line tool in process; returns (exit_code, stdout, stderr).");
}
