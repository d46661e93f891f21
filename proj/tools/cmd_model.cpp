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
#include <cstdio>
#include <ostream>
#include <unordered_map>

#include "cli.hpp"
#include "histoexpr/expression.hpp"
#include "histoexpr/features.hpp"
#include "histoexpr/metrics.hpp"
#include "histoexpr/regressor.hpp"
#include "histoexpr/svg.hpp"
#include "util.hpp"

namespace histoexpr::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json config_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"patience", c.patience},
          {"max_epochs", c.max_epochs},
          {"validation_fraction", c.validation_fraction},
          {"seed", c.seed},
          {"kernel", c.shape.kernel},
          {"c1", c.shape.c1},
          {"c2", c.shape.c2},
          {"c3", c.shape.c3}};
}

std::vector<std::string> pick(const std::vector<std::string>& ids, const std::vector<std::size_t>& rows) {
  std::vector<std::string> out;
  for (auto r : rows) out.push_back(ids[r]);
  return out;
}

ExpressionMatrix predict_slides(const RegressorModel& model, const std::vector<SlideFeature>& features) {
  if (features.empty()) throw Error(ErrorCode::EmptyIntersection, "no slide features");
  ExpressionMatrix m;
  for (const auto& f : features) m.patient_ids.push_back(f.patient_id);
  const Eigen::MatrixXd x = feature_rows(features, m.patient_ids);
  if (x.cols() != model.n_features())
    throw Error(ErrorCode::ShapeMismatch, "model expects " + std::to_string(model.n_features()) +
                                              " features, slide file has " + std::to_string(x.cols()));
  m.values = predict(model, x);
  m.transformed = true;
  return m;
}

}  // namespace

void cmd_train(const Globals& g, const TrainOptions& o, Streams io) {
  const GenePanel panel = load_panel(o.panel);
  const auto features = load_slide_features(o.features);
  std::vector<std::string> rejected;
  const ExpressionMatrix expr = load_log_expression(o.expression, panel, o.log_scale, &rejected);
  const AlignedDataset ds = assemble_dataset(features, expr);

  TrainConfig config = o.config;
  config.seed = g.seed;
  TrainResult result = train(ds.x, ds.y, config);
  result.model.set_panel_hash(panel_hash(panel));

  const fs::path out = prepare_output(g.output_dir);
  const auto bytes = encode_model(result.model);
  save_model(result.model, out / "model.h2rm");
  save_history(result.history, out / "history.csv");
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(panel_hash(panel)));
  json summary = {{"patients", ds.patient_ids.size()},
                  {"genes", panel.size()},
                  {"feature_width", ds.x.cols()},
                  {"train_patients", pick(ds.patient_ids, result.train_rows)},
                  {"validation_patients", pick(ds.patient_ids, result.val_rows)},
                  {"dropped_without_expression", ds.dropped_features},
                  {"dropped_without_features", ds.dropped_expression},
                  {"rejected_expression_rows", rejected},
                  {"epochs_run", result.history.size()},
                  {"best_epoch", result.best_epoch},
                  {"best_val_mse", result.best_val_mse},
                  {"model_fnv1a", fnv1a_hex(bytes)},
                  {"panel_hash", hash},
                  {"config", config_json(config)}};
  write_json(out / "train_summary.json", summary);
  io.out << "trained on " << result.train_rows.size() << " patients, best epoch " << result.best_epoch
         << ", validation MSE " << result.best_val_mse << "\n";
}

void cmd_predict(const Globals& g, const PredictOptions& o, Streams io) {
  const GenePanel panel = load_panel(o.panel);
  require_file(o.model, "model file");
  const RegressorModel model = load_model(o.model, panel);
  const ExpressionMatrix pred = predict_slides(model, load_slide_features(o.features));
  const fs::path out = prepare_output(g.output_dir);
  save_expression(pred, panel, out / "predictions.csv");
  io.out << "predicted " << pred.patient_ids.size() << " patients\n";
}

void cmd_evaluate(const Globals& g, const EvaluateOptions& o, Streams io) {
  const GenePanel panel = load_panel(o.panel);
  ExpressionMatrix pred;
  if (o.model) {
    require_file(*o.model, "model file");
    if (o.features.empty()) throw Error(ErrorCode::Usage, "--model needs --features");
    const RegressorModel model = load_model(*o.model, panel);
    pred = predict_slides(model, load_slide_features(o.features));
  } else if (o.predictions) {
    require_file(*o.predictions, "predictions file");
    pred = load_expression(*o.predictions, panel).matrix;
  } else {
    throw Error(ErrorCode::Usage, "evaluate needs --model or --predictions");
  }
  if (o.top_genes < 1) throw Error(ErrorCode::InvalidConfig, "--top-genes must be >= 1");
  const ExpressionMatrix truth = load_log_expression(o.expression, panel, o.log_scale);

  std::unordered_map<std::string, Eigen::Index> truth_row;
  for (std::size_t i = 0; i < truth.patient_ids.size(); ++i)
    truth_row[truth.patient_ids[i]] = static_cast<Eigen::Index>(i);
  std::vector<std::pair<std::string, Eigen::Index>> joined;
  for (std::size_t i = 0; i < pred.patient_ids.size(); ++i)
    if (truth_row.count(pred.patient_ids[i])) joined.emplace_back(pred.patient_ids[i], static_cast<Eigen::Index>(i));
  if (joined.empty()) throw Error(ErrorCode::EmptyIntersection, "no patient has both predictions and expression");
  std::sort(joined.begin(), joined.end());

  const auto n = static_cast<Eigen::Index>(joined.size());
  Eigen::MatrixXd p(n, pred.values.cols()), t(n, truth.values.cols());
  std::vector<std::string> patients;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& [id, row] = joined[static_cast<std::size_t>(i)];
    patients.push_back(id);
    p.row(i) = pred.values.row(row);
    t.row(i) = truth.values.row(truth_row.at(id));
  }
  const EvalReport report = evaluate(p, t, panel.genes, patients);
  const fs::path out = prepare_output(g.output_dir);
  save_report(report, panel.pam50_flags, out, "eval");

  // Scatter grid of the best-correlated genes; PAM50 panels are highlighted.
  std::vector<std::size_t> order;
  for (std::size_t k = 0; k < report.per_gene.size(); ++k)
    if (report.per_gene[k].defined) order.push_back(k);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return report.per_gene[a].rho > report.per_gene[b].rho; });
  order.resize(std::min<std::size_t>(order.size(), static_cast<std::size_t>(o.top_genes)));
  std::vector<ScatterPanel> panels;
  for (auto k : order) {
    char title[128];
    std::snprintf(title, sizeof title, "%s rho=%.2f", panel.genes[k].c_str(), report.per_gene[k].rho);
    const auto col = static_cast<Eigen::Index>(k);
    ScatterPanel sp{title, {}, {}, panel.pam50_flags[k]};
    for (Eigen::Index i = 0; i < n; ++i) {
      sp.x.push_back(t(i, col));
      sp.y.push_back(p(i, col));
    }
    panels.push_back(std::move(sp));
  }
  write_file(out / "eval_scatter.svg", scatter_grid_svg(panels));
  io.out << "median rho across genes " << report.median_gene_rho << ", across patients "
         << report.median_patient_rho << " (" << n << " patients)\n";
}

}  // namespace histoexpr::cli
