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
#include <ostream>
#include <set>
#include <unordered_map>

#include "cli.hpp"
#include "csv.hpp"
#include "histoexpr/expression.hpp"
#include "histoexpr/features.hpp"
#include "histoexpr/subtype.hpp"
#include "util.hpp"

namespace histoexpr::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::unordered_map<std::string, Subtype> load_subtype_labels(const fs::path& csv) {
  std::unordered_map<std::string, Subtype> out;
  for (const auto& [id, name] : read_labels(csv, "subtype")) {
    const auto s = parse_subtype(name);
    if (!s) throw Error(ErrorCode::ParseError, csv.string() + ": unknown subtype '" + name + "' for " + id);
    if (!out.emplace(id, *s).second) throw Error(ErrorCode::DuplicatePatient, id + " in " + csv.string());
  }
  return out;
}

json report_json(const ClassificationReport& r, std::size_t n) {
  json f1 = json::object(), auc = json::object(), confusion = json::array();
  for (std::size_t c = 0; c < kSubtypeCount; ++c) {
    const std::string name(to_string(kAllSubtypes[c]));
    f1[name] = number_or_null(r.f1[c]);
    auc[name] = number_or_null(r.auroc[c]);
    confusion.push_back(r.confusion[c]);
  }
  return {{"n", n}, {"accuracy", r.accuracy}, {"macro_f1", number_or_null(r.macro_f1)}, {"f1", f1},
          {"auroc", auc}, {"confusion_true_by_pred", confusion},
          {"class_order", {"LumA", "LumB", "Basal", "HER2"}}};
}

// Report over the rows whose truth is known; null when fewer than two
// classes are present.
json maybe_report(const std::vector<std::string>& ids, const std::vector<int>& predicted,
                  const Eigen::MatrixXd& scores, const std::unordered_map<std::string, Subtype>& labels) {
  std::vector<int> pred, truth;
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto it = labels.find(ids[i]);
    if (it == labels.end()) continue;
    pred.push_back(predicted[i]);
    truth.push_back(static_cast<int>(it->second));
    rows.push_back(static_cast<Eigen::Index>(i));
  }
  if (std::set<int>(truth.begin(), truth.end()).size() < 2) return nullptr;
  Eigen::MatrixXd s(static_cast<Eigen::Index>(rows.size()), scores.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) s.row(static_cast<Eigen::Index>(i)) = scores.row(rows[i]);
  return report_json(classification_report(pred, truth, s), rows.size());
}

void centroid_calls(const Globals& g, const SubtypeOptions& o, const GenePanel& panel,
                    const std::unordered_map<std::string, Subtype>* labels, const fs::path& out, Streams io) {
  ExpressionMatrix m;
  if (o.predictions) {
    m = load_expression(*o.predictions, panel).matrix;
  } else {
    m = load_log_expression(*o.expression, panel, o.log_scale);
  }
  const auto idx = panel.pam50_indices();
  if (idx.empty()) throw Error(ErrorCode::InvalidConfig, "panel has no PAM50-flagged genes");
  std::vector<std::string> genes;
  Eigen::MatrixXd x(m.values.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) {
    genes.push_back(panel.genes[idx[k]]);
    x.col(static_cast<Eigen::Index>(k)) = m.values.col(static_cast<Eigen::Index>(idx[k]));
  }

  CentroidModel model;
  if (o.centroids) {
    model = load_centroid_model(*o.centroids);
    if (model.gene_order != genes)
      throw Error(ErrorCode::PanelMismatch, "centroid gene order differs from the panel's PAM50 genes");
  } else {
    if (!labels) throw Error(ErrorCode::Usage, "fitting centroids needs --labels (or pass --centroids)");
    std::vector<Subtype> y;
    std::vector<Eigen::Index> rows;
    for (std::size_t i = 0; i < m.patient_ids.size(); ++i) {
      auto it = labels->find(m.patient_ids[i]);
      if (it == labels->end()) continue;
      y.push_back(it->second);
      rows.push_back(static_cast<Eigen::Index>(i));
    }
    Eigen::MatrixXd train(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) train.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
    model = fit_centroids(train, y, genes);
    save_centroid_model(model, out / "centroids.json");
  }

  std::string csv = "patient_id,subtype";
  for (auto s : model.subtypes) csv += ",sim_" + std::string(to_string(s));
  csv += "\n";
  std::vector<int> called;
  // Similarities laid out in the fixed class order; classes without a
  // centroid score below any Spearman value.
  Eigen::MatrixXd scores = Eigen::MatrixXd::Constant(x.rows(), kSubtypeCount, -2.0);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Eigen::VectorXd row = x.row(i).transpose();
    const SubtypeCall call = call_subtype(model, std::span<const double>(row.data(), static_cast<std::size_t>(row.size())));
    csv += m.patient_ids[static_cast<std::size_t>(i)] + "," + std::string(to_string(call.subtype));
    for (std::size_t k = 0; k < call.similarity.size(); ++k) {
      csv += "," + detail::format_double(call.similarity[k]);
      scores(i, static_cast<Eigen::Index>(model.subtypes[k])) = call.similarity[k];
    }
    csv += "\n";
    called.push_back(static_cast<int>(call.subtype));
  }
  write_file(out / "subtype_calls.csv", csv);
  if (labels) {
    const json rep = maybe_report(m.patient_ids, called, scores, *labels);
    if (!rep.is_null()) write_json(out / "centroid_report.json", rep);
  }
  io.out << "called subtypes for " << called.size() << " patients\n";
  (void)g;
}

void voting(const Globals& g, const SubtypeOptions& o, const std::unordered_map<std::string, Subtype>& labels,
            const fs::path& out, Streams io) {
  const auto train_rows = load_slide_features(*o.features);
  std::vector<std::string> ids;
  std::vector<int> y;
  for (const auto& f : train_rows) {
    auto it = labels.find(f.patient_id);
    if (it == labels.end()) continue;
    ids.push_back(f.patient_id);
    y.push_back(static_cast<int>(it->second));
  }
  if (ids.empty()) throw Error(ErrorCode::EmptyIntersection, "no labelled patient has slide features");
  VotingConfig config = o.voting;
  config.seed = g.seed;
  const VotingModel model = fit_voting(feature_rows(train_rows, ids), y, config);

  const auto target = o.predict_features ? load_slide_features(*o.predict_features) : train_rows;
  std::vector<std::string> target_ids;
  for (const auto& f : target) target_ids.push_back(f.patient_id);
  const Eigen::MatrixXd tx = feature_rows(target, target_ids);
  if (tx.cols() != static_cast<Eigen::Index>(train_rows.front().z.size()))
    throw Error(ErrorCode::ShapeMismatch, "prediction features differ in width from training features");
  const VotingPrediction pred = predict_voting(model, tx);

  std::string csv = "patient_id,subtype,p_luma,p_lumb,p_basal,p_her2\n";
  for (std::size_t i = 0; i < target_ids.size(); ++i) {
    csv += target_ids[i] + "," + std::string(to_string(static_cast<Subtype>(pred.labels[i])));
    for (Eigen::Index c = 0; c < pred.proba.cols(); ++c)
      csv += "," + detail::format_double(pred.proba(static_cast<Eigen::Index>(i), c));
    csv += "\n";
  }
  write_file(out / "voting_predictions.csv", csv);
  const json rep = maybe_report(target_ids, pred.labels, pred.proba, labels);
  if (!rep.is_null()) write_json(out / "voting_report.json", rep);
  io.out << "voting classifier trained on " << ids.size() << ", predicted " << target_ids.size() << " patients\n";
}

}  // namespace

void cmd_subtype(const Globals& g, const SubtypeOptions& o, Streams io) {
  if (o.expression && o.predictions) throw Error(ErrorCode::Usage, "give --expression or --predictions, not both");
  const bool centroid_mode = o.expression || o.predictions;
  if (!centroid_mode && !o.features)
    throw Error(ErrorCode::Usage, "subtype needs --expression/--predictions, --features, or both");
  if (o.features && !o.labels) throw Error(ErrorCode::Usage, "--features needs --labels to train the voting classifier");
  const GenePanel panel = load_panel(o.panel);
  std::optional<std::unordered_map<std::string, Subtype>> labels;
  if (o.labels) labels = load_subtype_labels(*o.labels);
  const fs::path out = prepare_output(g.output_dir);
  if (centroid_mode) centroid_calls(g, o, panel, labels ? &*labels : nullptr, out, io);
  if (o.features) voting(g, o, *labels, out, io);
}

}  // namespace histoexpr::cli
