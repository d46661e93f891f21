// Copyright 2026 The histoexpr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "histoexpr/error.hpp"
#include "histoexpr/regressor.hpp"
#include "histoexpr/subtype.hpp"

namespace histoexpr::cli {

struct Globals {
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = ".";
  bool strict = false;
};

// Where progress and warnings go. Reports always go to files.
struct Streams {
  std::ostream& out;
  std::ostream& err;
};

struct PreprocessOptions {
  std::filesystem::path images;
  std::optional<std::filesystem::path> masks;
  std::optional<std::filesystem::path> reference_profile;
  double alpha = 1.0;
  double beta = 0.15;
  double tissue_threshold = 0.5;
};

struct AggregateOptions {
  std::filesystem::path features;
};

struct TrainOptions {
  std::filesystem::path features;  // slide feature CSV
  std::filesystem::path expression;
  std::filesystem::path panel;
  bool log_scale = false;  // expression already log2(1+x)
  TrainConfig config;
};

struct PredictOptions {
  std::filesystem::path model;
  std::filesystem::path features;
  std::filesystem::path panel;
};

struct EvaluateOptions {
  std::optional<std::filesystem::path> model;
  std::optional<std::filesystem::path> predictions;
  std::filesystem::path features;
  std::filesystem::path expression;
  std::filesystem::path panel;
  bool log_scale = false;
  int top_genes = 20;
};

struct SubtypeOptions {
  std::filesystem::path panel;
  std::optional<std::filesystem::path> expression;
  std::optional<std::filesystem::path> predictions;
  bool log_scale = false;
  std::optional<std::filesystem::path> labels;
  std::optional<std::filesystem::path> centroids;
  std::optional<std::filesystem::path> features;          // voting classifier training set
  std::optional<std::filesystem::path> predict_features;  // defaults to `features`
  VotingConfig voting;
};

struct SurvivalOptions {
  std::filesystem::path clinical;
  std::optional<std::filesystem::path> subtypes;
  std::optional<std::filesystem::path> centroids;
  std::optional<std::filesystem::path> predictions;
  std::optional<std::filesystem::path> panel;
  double size_cutoff_mm = 20.0;
  double age_cutoff_years = 55.0;
};

struct BenchmarkOptions {
  std::optional<std::filesystem::path> h2rf_dir;
  std::optional<std::filesystem::path> expression;
  std::optional<std::filesystem::path> panel;
  bool log_scale = false;
  std::size_t patients = 300;
  std::uint32_t patches = 100;
  std::uint32_t features = 64;
  std::uint32_t genes = 8;
  double noise_sigma = 0.01;
  std::uint32_t aggregated_epochs = 3;
  std::uint32_t patchwise_epochs = 1;
  double watts = 300.0;
  int devices = 4;
  TrainConfig config;
};

// Subcommands. Each throws histoexpr::Error on failure; run() maps codes
// to exit statuses.
void cmd_preprocess(const Globals& g, const PreprocessOptions& o, Streams io);
void cmd_aggregate(const Globals& g, const AggregateOptions& o, Streams io);
void cmd_train(const Globals& g, const TrainOptions& o, Streams io);
void cmd_predict(const Globals& g, const PredictOptions& o, Streams io);
void cmd_evaluate(const Globals& g, const EvaluateOptions& o, Streams io);
void cmd_subtype(const Globals& g, const SubtypeOptions& o, Streams io);
void cmd_survival(const Globals& g, const SurvivalOptions& o, Streams io);
void cmd_benchmark(const Globals& g, const BenchmarkOptions& o, Streams io);

/// 0 success, 1 validation or statistical failure, 2 I/O or usage error.
int exit_code(ErrorCode code) noexcept;

/// kWh for `devices` running `hours` at `watts` each.
double energy_kwh(int devices, double hours, double watts);

/// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace histoexpr::cli
