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

#include "histoexpr/subtype.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "csv.hpp"
#include "histoexpr/error.hpp"
#include "histoexpr/metrics.hpp"

namespace histoexpr {

using json = nlohmann::json;

namespace {

constexpr std::array<std::string_view, kSubtypeCount> kNames = {"LumA", "LumB", "Basal", "HER2"};

std::size_t index_of(Subtype s) { return static_cast<std::size_t>(s); }

double column_median(const Eigen::MatrixXd& m, Eigen::Index col) {
  std::vector<double> v(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) v[static_cast<std::size_t>(i)] = m(i, col);
  return median(std::move(v));
}

}  // namespace

std::string_view to_string(Subtype s) { return kNames[index_of(s)]; }

std::optional<Subtype> parse_subtype(std::string_view s) {
  for (std::size_t i = 0; i < kSubtypeCount; ++i)
    if (kNames[i] == s) return kAllSubtypes[i];
  return std::nullopt;
}

CentroidModel fit_centroids(const Eigen::MatrixXd& expr, std::span<const Subtype> labels,
                            std::vector<std::string> genes, std::span<const Subtype> required) {
  if (static_cast<std::size_t>(expr.rows()) != labels.size())
    throw Error(ErrorCode::LengthMismatch, "expression rows differ from label count");
  if (static_cast<std::size_t>(expr.cols()) != genes.size())
    throw Error(ErrorCode::LengthMismatch, "expression columns differ from gene count");

  std::array<std::size_t, kSubtypeCount> counts{};
  for (Subtype s : labels) ++counts[index_of(s)];
  for (Subtype s : required)
    if (counts[index_of(s)] < 2)
      throw Error(ErrorCode::MissingSubtype,
                  std::string(to_string(s)) + " has " + std::to_string(counts[index_of(s)]) + " samples, need 2");

  CentroidModel model;
  model.gene_order = std::move(genes);
  model.medians.resize(expr.cols());
  for (Eigen::Index j = 0; j < expr.cols(); ++j) model.medians[j] = column_median(expr, j);
  const Eigen::MatrixXd centered = expr.rowwise() - model.medians.transpose();

  for (Subtype s : kAllSubtypes) {
    const bool wanted = std::find(required.begin(), required.end(), s) != required.end();
    if (wanted || counts[index_of(s)] >= 2) model.subtypes.push_back(s);
  }
  model.centroids = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(model.subtypes.size()), expr.cols());
  for (std::size_t k = 0; k < model.subtypes.size(); ++k) {
    const auto row = static_cast<Eigen::Index>(k);
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == model.subtypes[k]) model.centroids.row(row) += centered.row(static_cast<Eigen::Index>(i));
    model.centroids.row(row) /= static_cast<double>(counts[index_of(model.subtypes[k])]);
  }
  return model;
}

SubtypeCall call_subtype(const CentroidModel& model, std::span<const double> sample) {
  const auto g = static_cast<std::size_t>(model.centroids.cols());
  if (sample.size() != g)
    throw Error(ErrorCode::LengthMismatch,
                "sample has " + std::to_string(sample.size()) + " genes, model has " + std::to_string(g));
  std::vector<double> centered(g);
  for (std::size_t j = 0; j < g; ++j) centered[j] = sample[j] - model.medians[static_cast<Eigen::Index>(j)];

  SubtypeCall call;
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> centroid(g);
  for (std::size_t k = 0; k < model.subtypes.size(); ++k) {
    for (std::size_t j = 0; j < g; ++j)
      centroid[j] = model.centroids(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j));
    double sim = 0.0;
    try {
      sim = spearman(centered, centroid).rho;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ConstantInput) throw;
    }
    call.similarity.push_back(sim);
    if (sim > best) {
      best = sim;
      call.subtype = model.subtypes[k];
    }
  }
  return call;
}

std::string centroid_model_to_json(const CentroidModel& model) {
  json doc;
  doc["gene_order"] = model.gene_order;
  doc["medians"] = std::vector<double>(model.medians.data(), model.medians.data() + model.medians.size());
  json c = json::object();
  for (std::size_t k = 0; k < model.subtypes.size(); ++k) {
    std::vector<double> row(static_cast<std::size_t>(model.centroids.cols()));
    for (std::size_t j = 0; j < row.size(); ++j)
      row[j] = model.centroids(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j));
    c[std::string(to_string(model.subtypes[k]))] = row;
  }
  doc["centroids"] = c;
  json order = json::array();
  for (Subtype s : model.subtypes) order.push_back(std::string(to_string(s)));
  doc["subtypes"] = order;
  return doc.dump(2) + "\n";
}

CentroidModel centroid_model_from_json(const std::string& text) {
  CentroidModel model;
  try {
    const json doc = json::parse(text);
    model.gene_order = doc.at("gene_order").get<std::vector<std::string>>();
    const auto med = doc.at("medians").get<std::vector<double>>();
    const std::size_t g = model.gene_order.size();
    if (med.size() != g) throw Error(ErrorCode::ShapeMismatch, "medians length differs from gene_order");
    model.medians = Eigen::Map<const Eigen::VectorXd>(med.data(), static_cast<Eigen::Index>(g));
    for (const auto& name : doc.at("subtypes")) {
      auto s = parse_subtype(name.get<std::string>());
      if (!s) throw Error(ErrorCode::ParseError, "unknown subtype " + name.dump());
      model.subtypes.push_back(*s);
    }
    model.centroids.resize(static_cast<Eigen::Index>(model.subtypes.size()), static_cast<Eigen::Index>(g));
    for (std::size_t k = 0; k < model.subtypes.size(); ++k) {
      const auto row = doc.at("centroids").at(std::string(to_string(model.subtypes[k]))).get<std::vector<double>>();
      if (row.size() != g) throw Error(ErrorCode::ShapeMismatch, "centroid length differs from gene_order");
      for (std::size_t j = 0; j < g; ++j)
        model.centroids(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = row[j];
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("centroid json: ") + e.what());
  }
  return model;
}

void save_centroid_model(const CentroidModel& model, const std::filesystem::path& path) {
  detail::write_text(path, centroid_model_to_json(model));
}

CentroidModel load_centroid_model(const std::filesystem::path& path) {
  return centroid_model_from_json(detail::read_text(path));
}

Eigen::MatrixXd soft_vote(const std::vector<Eigen::MatrixXd>& simplices) {
  if (simplices.empty()) throw Error(ErrorCode::InvalidConfig, "soft vote needs at least one learner");
  for (const auto& s : simplices)
    if (s.rows() != simplices[0].rows() || s.cols() != simplices[0].cols())
      throw Error(ErrorCode::ShapeMismatch, "learner outputs differ in shape");
  // Pairwise reduction; with a power-of-two count of identical inputs every
  // partial sum is an exact doubling, so the mean reproduces the input.
  std::vector<Eigen::MatrixXd> level = simplices;
  while (level.size() > 1) {
    std::vector<Eigen::MatrixXd> next;
    for (std::size_t i = 0; i + 1 < level.size(); i += 2) next.push_back(level[i] + level[i + 1]);
    if (level.size() % 2) next.push_back(level.back());
    level = std::move(next);
  }
  return level[0] / static_cast<double>(simplices.size());
}

VotingModel fit_voting(const Eigen::MatrixXd& features, std::span<const int> labels, const VotingConfig& config) {
  if (static_cast<std::size_t>(features.rows()) != labels.size())
    throw Error(ErrorCode::LengthMismatch, "feature rows differ from label count");
  std::array<std::size_t, kSubtypeCount> counts{};
  for (int y : labels) {
    if (y < 0 || y >= static_cast<int>(kSubtypeCount)) throw Error(ErrorCode::OutOfRange, "class label outside 0..3");
    ++counts[static_cast<std::size_t>(y)];
  }
  for (std::size_t k = 0; k < kSubtypeCount; ++k)
    if (counts[k] < 5)
      throw Error(ErrorCode::ClassTooSmall,
                  std::string(kNames[k]) + " has " + std::to_string(counts[k]) + " samples, need 5");

  VotingModel model;
  model.learners.push_back(make_logistic_regression(config));
  model.learners.push_back(make_lda());
  model.learners.push_back(make_mlp(config));
  model.learners.push_back(std::make_unique<RandomForest>(config.rf_trees));
  for (std::size_t i = 0; i < model.learners.size(); ++i)
    model.learners[i]->fit(features, labels, config.seed + 0x9e3779b97f4a7c15ULL * (i + 1));
  return model;
}

VotingPrediction predict_voting(const VotingModel& model, const Eigen::MatrixXd& features) {
  std::vector<Eigen::MatrixXd> outputs;
  for (const auto& learner : model.learners) outputs.push_back(learner->predict_proba(features));
  VotingPrediction out;
  out.proba = soft_vote(outputs);
  out.labels = argmax_rows(out.proba);
  return out;
}

std::vector<int> argmax_rows(const Eigen::MatrixXd& proba) {
  std::vector<int> out(static_cast<std::size_t>(proba.rows()));
  for (Eigen::Index i = 0; i < proba.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < proba.cols(); ++k)
      if (proba(i, k) > proba(i, best)) best = k;
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

ClassificationReport classification_report(std::span<const int> predicted, std::span<const int> truth,
                                           const Eigen::MatrixXd& proba) {
  if (predicted.size() != truth.size() || static_cast<std::size_t>(proba.rows()) != truth.size() ||
      proba.cols() != static_cast<Eigen::Index>(kSubtypeCount))
    throw Error(ErrorCode::ShapeMismatch, "predictions, truth and probabilities are not aligned");
  ClassificationReport r;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i], p = predicted[i];
    if (t < 0 || t >= static_cast<int>(kSubtypeCount) || p < 0 || p >= static_cast<int>(kSubtypeCount))
      throw Error(ErrorCode::OutOfRange, "class label outside 0..3");
    ++r.confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
    if (t == p) ++correct;
  }
  std::size_t present = 0;
  for (std::size_t k = 0; k < kSubtypeCount; ++k) {
    std::size_t row = 0;
    for (std::size_t j = 0; j < kSubtypeCount; ++j) row += r.confusion[k][j];
    if (row > 0) ++present;
  }
  if (present < 2) throw Error(ErrorCode::SingleClass, "at least two true classes are required");

  r.accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());
  const double nan = std::numeric_limits<double>::quiet_NaN();
  double f1_sum = 0.0;
  std::size_t f1_count = 0;
  for (std::size_t k = 0; k < kSubtypeCount; ++k) {
    const double tp = static_cast<double>(r.confusion[k][k]);
    double fp = 0.0, fn = 0.0;
    for (std::size_t j = 0; j < kSubtypeCount; ++j) {
      if (j == k) continue;
      fp += static_cast<double>(r.confusion[j][k]);
      fn += static_cast<double>(r.confusion[k][j]);
    }
    const double denom = 2.0 * tp + fp + fn;
    r.f1[k] = denom > 0.0 ? 2.0 * tp / denom : nan;
    if (denom > 0.0) {
      f1_sum += r.f1[k];
      ++f1_count;
    }

    std::vector<double> scores(truth.size());
    std::vector<int> binary(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i) {
      scores[i] = proba(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
      binary[i] = truth[i] == static_cast<int>(k) ? 1 : 0;
    }
    try {
      r.auroc[k] = auroc(scores, binary);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::SingleClass) throw;
      r.auroc[k] = nan;
    }
  }
  r.macro_f1 = f1_sum / static_cast<double>(f1_count);
  return r;
}

}  // namespace histoexpr
