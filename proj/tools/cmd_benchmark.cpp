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

#include <algorithm>
#include <numeric>
#include <ostream>
#include <unordered_map>

#include "cli.hpp"
#include "histoexpr/expression.hpp"
#include "histoexpr/features.hpp"
#include "histoexpr/regressor.hpp"
#include "histoexpr/synthetic.hpp"
#include "util.hpp"

namespace histoexpr::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct BenchData {
  std::string source;
  Eigen::MatrixXd slides;
  PatchDataset patches;
  std::size_t total_patches = 0;
};

RowMatrix to_rows(const PatchFeatureSet& p) {
  RowMatrix m(p.n_patches, p.n_features);
  for (std::size_t i = 0; i < p.values.size(); ++i) m.data()[i] = p.values[i];
  return m;
}

BenchData from_files(const Globals& g, const BenchmarkOptions& o, Streams io) {
  if (!o.expression || !o.panel) throw Error(ErrorCode::Usage, "--h2rf-dir needs --expression and --panel");
  const GenePanel panel = load_panel(*o.panel);
  const ExpressionMatrix expr = load_log_expression(*o.expression, panel, o.log_scale);
  std::unordered_map<std::string, Eigen::Index> expr_row;
  for (std::size_t i = 0; i < expr.patient_ids.size(); ++i) expr_row[expr.patient_ids[i]] = static_cast<Eigen::Index>(i);

  std::vector<std::pair<std::string, PatchFeatureSet>> sets;
  for (const auto& path : list_files(*o.h2rf_dir, {".h2rf"})) {
    try {
      auto set = read_features(path);
      if (expr_row.count(set.patient_id)) sets.emplace_back(set.patient_id, std::move(set));
    } catch (const Error& e) {
      if (g.strict) throw;
      io.err << "warning: skipping " << path.filename().string() << ": " << e.what() << "\n";
    }
  }
  std::sort(sets.begin(), sets.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  BenchData d;
  d.source = fs::absolute(*o.h2rf_dir).lexically_normal().generic_string();
  if (sets.empty()) throw Error(ErrorCode::EmptyIntersection, "no .h2rf file matches a patient with expression");
  const auto width = sets.front().second.n_features;
  d.slides.resize(static_cast<Eigen::Index>(sets.size()), width);
  d.patches.targets.resize(static_cast<Eigen::Index>(sets.size()), expr.values.cols());
  for (std::size_t i = 0; i < sets.size(); ++i) {
    const auto& set = sets[i].second;
    if (set.n_features != width) throw Error(ErrorCode::ShapeMismatch, set.patient_id + ": feature width differs");
    const auto z = aggregate(set).z;
    const auto r = static_cast<Eigen::Index>(i);
    for (std::uint32_t k = 0; k < width; ++k) d.slides(r, k) = z[k];
    d.patches.targets.row(r) = expr.values.row(expr_row.at(set.patient_id));
    d.patches.patches.push_back(to_rows(set));
    d.total_patches += set.n_patches;
  }
  return d;
}

json timing(const TrainResult& r) {
  std::vector<double> secs;
  std::size_t samples = 0;
  for (const auto& h : r.history) {
    secs.push_back(h.wall_clock_seconds);
    samples = h.samples;
  }
  const double mean = std::accumulate(secs.begin(), secs.end(), 0.0) / static_cast<double>(secs.size());
  return {{"epochs", secs.size()}, {"samples_per_epoch", samples}, {"epoch_seconds", secs},
          {"mean_epoch_seconds", mean}, {"final_val_mse", r.history.back().val_mse}};
}

}  // namespace

void cmd_benchmark(const Globals& g, const BenchmarkOptions& o, Streams io) {
  if (o.aggregated_epochs == 0 || o.patchwise_epochs == 0)
    throw Error(ErrorCode::InvalidConfig, "epoch counts must be >= 1");
  if (!(o.watts > 0.0) || o.devices < 1) throw Error(ErrorCode::InvalidConfig, "watts and devices must be positive");
  BenchData d;
  if (o.h2rf_dir) {
    d = from_files(g, o, io);
  } else {
    if (o.patients < 2) throw Error(ErrorCode::DatasetTooSmall, "benchmark needs at least two patients");
    LinearTaskSpec spec;
    spec.patients = o.patients;
    spec.patches = o.patches;
    spec.features = o.features;
    spec.genes = o.genes;
    spec.noise_sigma = o.noise_sigma;
    spec.seed = g.seed;
    const LinearTask task = make_linear_task(spec);
    d.source = "synthetic";
    d.slides = task.slide_matrix();
    d.patches = task.patch_dataset();
    d.total_patches = static_cast<std::size_t>(o.patients) * o.patches;
  }
  const auto n = static_cast<std::size_t>(d.slides.rows());
  if (n < 2) throw Error(ErrorCode::DatasetTooSmall, "benchmark needs at least two patients, got " + std::to_string(n));

  // Fixed epoch counts: early stopping is disabled so both modes run the
  // requested number of full passes.
  TrainConfig agg_cfg = o.config;
  agg_cfg.seed = g.seed;
  agg_cfg.max_epochs = o.aggregated_epochs;
  agg_cfg.patience = o.aggregated_epochs + 1;
  TrainConfig patch_cfg = agg_cfg;
  patch_cfg.max_epochs = o.patchwise_epochs;
  patch_cfg.patience = o.patchwise_epochs + 1;

  io.out << "timing " << o.aggregated_epochs << " aggregated epoch(s)\n";
  const TrainResult agg = train(d.slides, d.patches.targets, agg_cfg);
  io.out << "timing " << o.patchwise_epochs << " patch-based epoch(s)\n";
  const TrainResult patch = train_patchwise(d.patches, patch_cfg);

  json a = timing(agg), p = timing(patch);
  const double agg_s = a["mean_epoch_seconds"].get<double>();
  const double patch_s = p["mean_epoch_seconds"].get<double>();
  const double speedup = patch_s / agg_s;
  const double agg_kwh = energy_kwh(o.devices, agg_s / 3600.0, o.watts);
  const double patch_kwh = energy_kwh(o.devices, patch_s / 3600.0, o.watts);
  const double example = energy_kwh(4, 8.48, 300.0);

  json report = {
      {"dataset",
       {{"source", d.source},
        {"patients", n},
        {"total_patches", d.total_patches},
        {"feature_width", d.slides.cols()},
        {"genes", d.patches.targets.cols()},
        {"seed", g.seed}}},
      {"head", {{"kernel", o.config.shape.kernel}, {"c1", o.config.shape.c1}, {"c2", o.config.shape.c2},
                {"c3", o.config.shape.c3}}},
      {"batch_size", o.config.batch_size},
      {"aggregated", a},
      {"patchwise", p},
      {"sample_ratio", static_cast<double>(p["samples_per_epoch"].get<std::size_t>()) /
                           static_cast<double>(a["samples_per_epoch"].get<std::size_t>())},
      {"speedup", speedup},
      {"energy",
       {{"formula", "devices * hours * watts / 1000"},
        {"watts", o.watts},
        {"devices", o.devices},
        {"aggregated_kwh_per_epoch", agg_kwh},
        {"patchwise_kwh_per_epoch", patch_kwh},
        {"worked_example", {{"devices", 4}, {"hours", 8.48}, {"watts", 300.0}, {"kwh", example},
                            {"expected_kwh", 10.176}, {"matches", example == 10.176}}}}}};
  const fs::path out = prepare_output(g.output_dir);
  write_json(out / "benchmark_report.json", report);
  io.out << "aggregated " << agg_s << " s/epoch, patch-based " << patch_s << " s/epoch, speedup " << speedup << "x\n";
}

}  // namespace histoexpr::cli
