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

#include "relfsim/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "relfsim/error.hpp"
#include "relfsim/eval.hpp"
#include "relfsim/ingest.hpp"
#include "relfsim/synthetic.hpp"
#include "text_util.hpp"

namespace relfsim::cli {

namespace fs = std::filesystem;

namespace {

/// Reads either a JSON run manifest (flat "config" object, or a flat object)
/// or the usual `key = value` file.
class ManifestOrIniConfig : public CLI::ConfigINI {
 public:
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    std::string text((std::istreambuf_iterator<char>(input)), std::istreambuf_iterator<char>());
    auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string::npos || text[first] != '{') {
      std::istringstream is(text);
      return CLI::ConfigINI::from_config(is);
    }
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw CLI::ConversionError(std::string("invalid JSON config: ") + e.what());
    }
    const auto& cfg = doc.contains("config") ? doc["config"] : doc;
    std::vector<CLI::ConfigItem> items;
    for (const auto& [key, value] : cfg.items()) {
      CLI::ConfigItem item;
      item.name = key;
      auto scalar = [](const nlohmann::json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(value));
      }
      items.push_back(std::move(item));
    }
    return items;
  }
};

struct Loaded {
  CorpusBundle bundle;
  std::optional<EmbeddingTable> table;
  std::optional<ItemVectorIndex> index;
};

RatingScale scale_of(const RunConfig& cfg) { return {cfg.rating_min, cfg.rating_max}; }

Loaded load(const RunConfig& cfg, bool need_embeddings) {
  Loaded l{load_bundle(cfg.bundle, scale_of(cfg)), std::nullopt, std::nullopt};
  if (need_embeddings) {
    l.table = load_embeddings(fs::path(cfg.embeddings));
    l.index = build_item_vectors(l.bundle.sentences, *l.table);
  }
  return l;
}

std::vector<SimilarityKind> parse_predictors(const std::string& list) {
  std::vector<SimilarityKind> kinds;
  std::stringstream ss(list);
  std::string name;
  while (std::getline(ss, name, ',')) {
    auto kind = parse_similarity_kind(std::string(detail::trim(name)));
    if (!kind) throw InputError("unknown predictor '" + name + "' (expected cf, cb or hybrid)");
    kinds.push_back(*kind);
  }
  if (kinds.empty()) throw InputError("no predictor selected");
  return kinds;
}

bool needs_content(const std::vector<SimilarityKind>& kinds) {
  return std::any_of(kinds.begin(), kinds.end(), [](auto k) { return k != SimilarityKind::rating; });
}

SplitKind split_of(const RunConfig& cfg) {
  if (cfg.split == "kfold") return KFold{cfg.folds};
  if (cfg.split == "holdout") return Holdout{cfg.ratio};
  if (cfg.split == "cold-start") return ColdStart{cfg.cold_fraction};
  throw InputError("unknown split '" + cfg.split + "' (expected kfold, holdout or cold-start)");
}

EvalOptions eval_options(const RunConfig& cfg) {
  EvalOptions o;
  o.policy = cfg.policy;
  o.workers = static_cast<std::size_t>(cfg.train.workers);
  o.cache_capacity = cfg.cache_capacity;
  return o;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  return out;
}

void write_manifest(const RunConfig& cfg, const std::string& command, const Loaded& l, const fs::path& csv) {
  nlohmann::ordered_json m;
  m["tool"] = "relfsim";
  m["command"] = command;
  m["config"] = to_json(cfg);
  m["dataset"] = nlohmann::json::parse(l.bundle.report.to_json());
  m["results"] = csv.filename().string();
  auto out = open_out(fs::path(cfg.out) / "manifest.json");
  out << m.dump(2) << '\n';
}

void print_prediction(std::ostream& out, UserId u, ItemId i, const Prediction& p) {
  out << u << ',' << i << ',' << detail::format_real(p.value) << ',' << to_string(p.detail) << ','
      << p.neighbors_used << '\n';
}

std::vector<ItemId> item_universe(const Loaded& l) {
  auto items = l.bundle.ratings.items();
  for (const auto& s : l.bundle.sentences) items.push_back(s.item);
  std::sort(items.begin(), items.end());
  items.erase(std::unique(items.begin(), items.end()), items.end());
  return items;
}

void check_item_known(const Loaded& l, ItemId item) {
  if (!l.bundle.ratings.has_item(item) && !(l.index && l.index->contains(item))) {
    throw UnknownIdError("unknown item", std::to_string(item));
  }
}

}  // namespace

nlohmann::ordered_json to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["ratings"] = c.ratings;
  j["metadata"] = c.metadata;
  j["bundle"] = c.bundle;
  j["embeddings"] = c.embeddings;
  j["out"] = c.out;
  j["window"] = c.train.window;
  j["dim"] = c.train.dim;
  j["negatives"] = c.train.negatives;
  j["min-count"] = c.train.min_count;
  j["epochs"] = c.train.epochs;
  j["initial-lr"] = c.train.initial_lr;
  j["final-lr"] = c.train.final_lr;
  j["ns-exponent"] = c.train.ns_exponent;
  j["train-seed"] = c.train.seed;
  j["workers"] = c.train.workers;
  j["k"] = c.predict.k;
  j["min-neighbors"] = c.predict.min_neighbors;
  j["clamp"] = c.predict.clamp;
  j["tau-pair"] = c.policy.tau_pair;
  j["tau-item"] = c.policy.tau_item;
  j["predictors"] = c.predictors;
  j["split"] = c.split;
  j["folds"] = c.folds;
  j["ratio"] = c.ratio;
  j["cold-fraction"] = c.cold_fraction;
  j["seed"] = c.seed;
  j["ks"] = c.ks;
  j["rating-min"] = c.rating_min;
  j["rating-max"] = c.rating_max;
  j["cache-capacity"] = c.cache_capacity;
  return j;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  CLI::App app{"relfsim: feature-embedding content similarity and hybrid item-based collaborative filtering"};
  app.name("relfsim");
  app.require_subcommand(1);
  app.fallthrough();
  app.config_formatter(std::make_shared<ManifestOrIniConfig>());
  app.set_config("--config", "", "key = value file or JSON run manifest; explicit flags override it");

  const char* paths = "Paths";
  app.add_option("--ratings", cfg.ratings, "Ratings file (MovieLens ::-separated .dat or CSV)")->group(paths);
  app.add_option("--metadata", cfg.metadata, "Item metadata CSV: itemId,directors,screenwriters,cast")->group(paths);
  app.add_option("--bundle", cfg.bundle, "Cleaned corpus directory")->capture_default_str()->group(paths);
  app.add_option("--embeddings", cfg.embeddings, "Embedding text file (sidecar at <file>.ctx)")
      ->capture_default_str()
      ->group(paths);
  app.add_option("--out", cfg.out, "Output directory for results and manifests")->capture_default_str()->group(paths);

  const char* emb = "Embedding training";
  app.add_option("--window", cfg.train.window, "Maximum context window")->capture_default_str()->group(emb);
  app.add_option("--dim", cfg.train.dim, "Vector dimension")->capture_default_str()->group(emb);
  app.add_option("--negatives", cfg.train.negatives, "Negative samples per pair")->capture_default_str()->group(emb);
  app.add_option("--min-count", cfg.train.min_count, "Minimum token count")->capture_default_str()->group(emb);
  app.add_option("--epochs", cfg.train.epochs, "Training epochs")->capture_default_str()->group(emb);
  app.add_option("--initial-lr", cfg.train.initial_lr, "Initial learning rate")->capture_default_str()->group(emb);
  app.add_option("--final-lr", cfg.train.final_lr, "Final learning rate")->capture_default_str()->group(emb);
  app.add_option("--ns-exponent", cfg.train.ns_exponent, "Negative sampling exponent")
      ->capture_default_str()
      ->group(emb);
  app.add_option("--train-seed", cfg.train.seed, "Embedding RNG seed")->capture_default_str()->group(emb);
  app.add_option("--workers", cfg.train.workers, "Worker threads for training and evaluation")
      ->capture_default_str()
      ->group(emb);

  const char* pred = "Prediction";
  app.add_option("--k", cfg.predict.k, "Neighborhood size")->capture_default_str()->group(pred);
  app.add_option("--min-neighbors", cfg.predict.min_neighbors, "Neighbors required before falling back to means")
      ->capture_default_str()
      ->group(pred);
  app.add_option("--clamp", cfg.predict.clamp, "Clamp predictions to the rating scale")
      ->capture_default_str()
      ->group(pred);
  app.add_option("--tau-pair", cfg.policy.tau_pair, "Hybrid: minimum co-rating users for rating similarity")
      ->capture_default_str()
      ->group(pred);
  app.add_option("--tau-item", cfg.policy.tau_item, "Hybrid: minimum ratings for an item to count as warm")
      ->capture_default_str()
      ->group(pred);
  app.add_option("--rating-min", cfg.rating_min, "Rating scale lower bound")->capture_default_str()->group(pred);
  app.add_option("--rating-max", cfg.rating_max, "Rating scale upper bound")->capture_default_str()->group(pred);
  app.add_option("--cache-capacity", cfg.cache_capacity, "Similarity cache entries (0 disables)")
      ->capture_default_str()
      ->group(pred);

  const char* ev = "Evaluation";
  app.add_option("--predictors", cfg.predictors, "Comma list of cf, cb, hybrid")->capture_default_str()->group(ev);
  app.add_option("--split", cfg.split, "kfold, holdout or cold-start")
      ->capture_default_str()
      ->check(CLI::IsMember({"kfold", "holdout", "cold-start"}))
      ->group(ev);
  app.add_option("--folds", cfg.folds, "Folds for kfold")->capture_default_str()->group(ev);
  app.add_option("--ratio", cfg.ratio, "Train fraction for holdout")->capture_default_str()->group(ev);
  app.add_option("--cold-fraction", cfg.cold_fraction, "Item fraction made cold for cold-start")
      ->capture_default_str()
      ->group(ev);
  app.add_option("--seed", cfg.seed, "Split seed")->capture_default_str()->group(ev);
  app.add_option("--ks", cfg.ks, "k values for sweep-k")->delimiter(',')->capture_default_str()->group(ev);

  auto* ingest = app.add_subcommand("ingest", "Clean and join ratings with metadata into a bundle");
  auto* train = app.add_subcommand("train-embed", "Train skip-gram feature embeddings on the bundle sentences");
  auto* evaluate = app.add_subcommand("evaluate", "RMSE/MAE of the selected predictors on one split");
  auto* sweep = app.add_subcommand("sweep-k", "RMSE/MAE over several k on one holdout split");

  UserId user = 0;
  ItemId item = 0;
  std::string model = "hybrid";
  std::string pairs_file;
  auto* predict = app.add_subcommand("predict", "Predict ratings for a user/item pair or a CSV of pairs");
  auto* user_opt = predict->add_option("--user", user, "User id");
  auto* item_opt = predict->add_option("--item", item, "Item id");
  predict->add_option("--model", model, "cf, cb or hybrid")
      ->capture_default_str()
      ->check(CLI::IsMember({"cf", "cb", "hybrid"}));
  auto* pairs_opt = predict->add_option("--pairs", pairs_file, "CSV of user,item pairs (header optional)");
  user_opt->needs(item_opt);
  item_opt->needs(user_opt);
  pairs_opt->excludes(user_opt)->excludes(item_opt);

  std::string feature;
  ItemId sim_item = 0;
  std::size_t top_n = 10;
  std::string dump_file;
  std::string sim_model = "cb";
  auto* similar = app.add_subcommand("similar", "Nearest features by embedding cosine or items by similarity");
  auto* feature_opt = similar->add_option("--feature", feature, "Feature token (canonicalized)");
  auto* sim_item_opt = similar->add_option("--item", sim_item, "Item id");
  similar->add_option("--n", top_n, "Number of neighbors")->capture_default_str();
  similar->add_option("--model", sim_model, "Item similarity: cf, cb or hybrid")
      ->capture_default_str()
      ->check(CLI::IsMember({"cf", "cb", "hybrid"}));
  auto* dump_opt = similar->add_option("--dump", dump_file, "Write top-n neighbors of every item as CSV");
  feature_opt->excludes(sim_item_opt)->excludes(dump_opt);
  sim_item_opt->excludes(dump_opt);

  UserId rec_user = 0;
  std::size_t rec_n = 10;
  auto* recommend = app.add_subcommand("recommend", "Top-n unrated items for a user");
  recommend->add_option("--user", rec_user, "User id")->required();
  recommend->add_option("--n", rec_n, "List length")->capture_default_str();
  recommend->add_option("--model", model, "cf, cb or hybrid")
      ->capture_default_str()
      ->check(CLI::IsMember({"cf", "cb", "hybrid"}));

  synthetic::MovieWorldConfig world;
  std::string synth_dir = "synthetic";
  auto* synth = app.add_subcommand("synth", "Write a synthetic ratings + metadata pair for demos");
  synth->add_option("--dir", synth_dir, "Output directory")->capture_default_str();
  synth->add_option("--users", world.users)->capture_default_str();
  synth->add_option("--items", world.items)->capture_default_str();
  synth->add_option("--world-seed", world.seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*ingest) {
      if (cfg.ratings.empty() || cfg.metadata.empty()) throw InputError("ingest needs --ratings and --metadata");
      ParseOptions opts;
      opts.scale = scale_of(cfg);
      opts.warn = [&](std::string_view msg) { err << "warning: " << msg << '\n'; };
      auto ratings = parse_ratings(fs::path(cfg.ratings), detect_rating_format(cfg.ratings), opts);
      auto catalog = parse_item_features(fs::path(cfg.metadata), opts.warn);
      auto bundle = clean_and_join(ratings, catalog);
      save_bundle(bundle, cfg.bundle);
      err << bundle.report.to_json() << '\n';
      return 0;
    }

    if (*train) {
      auto bundle = load_bundle(cfg.bundle, scale_of(cfg));
      auto table = train_skipgram(bundle.sentences, cfg.train, [&](int epoch, double loss) {
        err << "epoch " << epoch << " mean loss " << loss << '\n';
      });
      save_embeddings(table, fs::path(cfg.embeddings));
      err << "wrote " << table.vocab.size() << " vectors of dimension " << table.dim() << " to " << cfg.embeddings
          << '\n';
      return 0;
    }

    if (*evaluate || *sweep) {
      const auto kinds = parse_predictors(cfg.predictors);
      const auto loaded = load(cfg, needs_content(kinds));
      const auto* index = loaded.index ? &*loaded.index : nullptr;
      const auto& ratings = loaded.bundle.ratings;
      std::vector<ResultRow> rows;
      fs::path csv;
      if (*evaluate) {
        const auto plan = make_split(ratings, split_of(cfg), cfg.seed);
        for (auto kind : kinds) {
          auto report = relfsim::evaluate(kind, ratings, index, plan, cfg.predict, eval_options(cfg));
          auto r = result_rows(kind, plan, cfg.predict.k, report);
          rows.insert(rows.end(), r.begin(), r.end());
          err << predictor_label(kind) << ": rmse " << report.rmse << " mae " << report.mae << " fallbacks "
              << report.n_fallbacks << "/" << report.n_predictions << '\n';
        }
        csv = fs::path(cfg.out) / "results.csv";
      } else {
        if (cfg.split == "kfold") throw InputError("sweep-k needs --split holdout or cold-start");
        const auto plan = make_split(ratings, split_of(cfg), cfg.seed);
        rows = sweep_k(cfg.ks, kinds, ratings, index, plan, cfg.predict, eval_options(cfg));
        csv = fs::path(cfg.out) / "sweep_k.csv";
      }
      {
        auto f = open_out(csv);
        write_results_csv(rows, f);
      }
      write_manifest(cfg, *evaluate ? "evaluate" : "sweep-k", loaded, csv);
      write_results_csv(rows, out);
      return 0;
    }

    if (*predict || *recommend) {
      const auto kind = *parse_similarity_kind(model);
      const auto loaded = load(cfg, kind != SimilarityKind::rating);
      const auto& ratings = loaded.bundle.ratings;
      const auto* index = loaded.index ? &*loaded.index : nullptr;
      auto provider = make_similarity(kind, ratings, index, cfg.policy, cfg.cache_capacity);
      KnnPredictor knn(ratings, *provider, cfg.predict);

      if (*recommend) {
        if (!ratings.has_user(rec_user)) throw UnknownIdError("unknown user", std::to_string(rec_user));
        const auto universe = item_universe(loaded);
        out << "rank,item,value,detail\n";
        std::size_t rank = 1;
        for (const auto& r : recommend_top_n(knn, rec_user, rec_n, universe)) {
          out << rank++ << ',' << r.item << ',' << detail::format_real(r.prediction.value) << ','
              << to_string(r.prediction.detail) << '\n';
        }
        return 0;
      }

      std::vector<UserItem> pairs;
      if (!pairs_file.empty()) {
        std::ifstream in(pairs_file);
        if (!in) throw InputError("cannot open pairs file " + pairs_file);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
          ++line_no;
          if (detail::trim(line).empty()) continue;
          auto f = detail::split_csv(line);
          auto u = f.size() >= 2 ? detail::parse_number<UserId>(f[0]) : std::nullopt;
          auto i = f.size() >= 2 ? detail::parse_number<ItemId>(f[1]) : std::nullopt;
          if (!u || !i) {
            if (line_no == 1) continue;
            throw InputError("pairs file line " + std::to_string(line_no) + ": expected user,item");
          }
          pairs.emplace_back(*u, *i);
        }
      } else if (*user_opt) {
        pairs.emplace_back(user, item);
      } else {
        throw InputError("predict needs --user/--item or --pairs");
      }
      for (const auto& [u, i] : pairs) {
        if (!ratings.has_user(u)) throw UnknownIdError("unknown user", std::to_string(u));
        check_item_known(loaded, i);
      }
      const auto preds = predict_batch(knn, pairs, static_cast<std::size_t>(cfg.train.workers));
      out << "user,item,value,detail,neighbors\n";
      for (std::size_t x = 0; x < pairs.size(); ++x) print_prediction(out, pairs[x].first, pairs[x].second, preds[x]);
      return 0;
    }

    if (*similar) {
      if (*feature_opt) {
        const auto table = load_embeddings(fs::path(cfg.embeddings));
        const auto token = canonical_token(feature);
        const auto query = table.vector(token);
        if (!query) throw UnknownIdError("unknown feature", token);
        std::vector<std::pair<double, std::string>> scored;
        for (std::size_t r = 0; r < table.vocab.size(); ++r) {
          if (table.vocab.token(r) == token) continue;
          try {
            scored.emplace_back(cosine(*query, table.input_vectors.row(r)), table.vocab.token(r));
          } catch (const UndefinedSimilarityError&) {
          }
        }
        std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
          return a.first != b.first ? a.first > b.first : a.second < b.second;
        });
        if (scored.size() > top_n) scored.resize(top_n);
        out << "feature,cosine\n";
        for (const auto& [c, t] : scored) out << t << ',' << detail::format_real(c) << '\n';
        return 0;
      }
      const auto kind = *parse_similarity_kind(sim_model);
      const auto loaded = load(cfg, kind != SimilarityKind::rating);
      const auto* index = loaded.index ? &*loaded.index : nullptr;
      auto provider = make_similarity(kind, loaded.bundle.ratings, index, cfg.policy, cfg.cache_capacity);
      const auto universe = item_universe(loaded);
      if (*dump_opt) {
        auto f = open_out(dump_file);
        dump_top_similar(universe, *provider, top_n, f);
        return 0;
      }
      if (!*sim_item_opt) throw InputError("similar needs --feature, --item or --dump");
      check_item_known(loaded, sim_item);
      out << "item,neighbor,value,source\n";
      for (const auto& nb : most_similar(sim_item, universe, *provider, top_n)) {
        out << sim_item << ',' << nb.item << ',' << detail::format_real(nb.sim.value) << ','
            << to_string(nb.sim.source) << '\n';
      }
      return 0;
    }

    if (*synth) {
      const auto w = synthetic::movie_world(world);
      fs::create_directories(synth_dir);
      {
        auto f = open_out(fs::path(synth_dir) / "ratings.csv");
        write_ratings_csv(w.ratings, f);
      }
      auto f = open_out(fs::path(synth_dir) / "metadata.csv");
      write_item_features(w.catalog, f);
      err << "wrote " << w.ratings.size() << " ratings and " << w.catalog.entries.size() << " items to " << synth_dir
          << '\n';
      return 0;
    }
  } catch (const UnknownIdError& e) {
    err << "error: " << e.what() << '\n';
    return 4;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const ContractError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("relfsim");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace relfsim::cli
