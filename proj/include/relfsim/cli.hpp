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
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "relfsim/embed.hpp"
#include "relfsim/predict.hpp"
#include "relfsim/simcore.hpp"

namespace relfsim::cli {

/// Every knob of the pipeline. Each field is a long option of the `relfsim`
/// command and a key of its config file.
struct RunConfig {
  std::string ratings;
  std::string metadata;
  std::string bundle = "bundle";
  std::string embeddings = "embeddings.txt";
  std::string out = "results";

  TrainConfig train;
  PredictionConfig predict;
  HybridPolicy policy;

  std::string predictors = "cf,cb,hybrid";
  std::string split = "kfold";
  std::size_t folds = 5;
  double ratio = 0.8;
  double cold_fraction = 0.05;
  std::uint64_t seed = 42;
  std::vector<std::size_t> ks = {5, 10, 15, 20, 25, 30, 35, 40, 45, 50, 55, 60};
  double rating_min = 1.0;
  double rating_max = 5.0;
  std::size_t cache_capacity = std::size_t{1} << 21;
};

/// Flat object keyed by option name; loadable with `--config`.
nlohmann::ordered_json to_json(const RunConfig& config);

/// Runs the command line; returns the process exit code
/// (0 ok, 2 input error, 3 numeric error, 4 unknown id).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace relfsim::cli
