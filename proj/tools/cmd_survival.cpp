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
#include <array>
#include <ostream>
#include <unordered_map>

#include "cli.hpp"
#include "csv.hpp"
#include "histoexpr/expression.hpp"
#include "histoexpr/subtype.hpp"
#include "histoexpr/survival.hpp"
#include "histoexpr/svg.hpp"
#include "util.hpp"

namespace histoexpr::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Variable {
  std::string name;
  std::string cutoff;  // Table-style group description
  std::optional<RiskParameter> parameter;  // empty: the subtype indicator
  std::optional<double> cut;
};

std::unordered_map<std::string, Subtype> subtypes_from_file(const fs::path& csv) {
  std::unordered_map<std::string, Subtype> out;
  for (const auto& [id, name] : read_labels(csv, "subtype")) {
    const auto s = parse_subtype(name);
    if (!s) throw Error(ErrorCode::ParseError, csv.string() + ": unknown subtype '" + name + "' for " + id);
    if (!out.emplace(id, *s).second) throw Error(ErrorCode::DuplicatePatient, id + " in " + csv.string());
  }
  return out;
}

std::unordered_map<std::string, Subtype> subtypes_from_predictions(const SurvivalOptions& o) {
  if (!o.panel) throw Error(ErrorCode::Usage, "--predictions needs --panel");
  const GenePanel panel = load_panel(*o.panel);
  const CentroidModel model = load_centroid_model(*o.centroids);
  const ExpressionMatrix m = load_expression(*o.predictions, panel).matrix;
  std::vector<std::string> genes;
  for (auto k : panel.pam50_indices()) genes.push_back(panel.genes[k]);
  if (model.gene_order != genes)
    throw Error(ErrorCode::PanelMismatch, "centroid gene order differs from the panel's PAM50 genes");
  const auto idx = panel.pam50_indices();
  std::unordered_map<std::string, Subtype> out;
  std::vector<double> sample(idx.size());
  for (std::size_t i = 0; i < m.patient_ids.size(); ++i) {
    for (std::size_t k = 0; k < idx.size(); ++k)
      sample[k] = m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(idx[k]));
    out.emplace(m.patient_ids[i], call_subtype(model, sample).subtype);
  }
  return out;
}

// 1/0 indicator of the risk group, empty when the covariate is missing.
std::optional<double> indicator(const ClinicalRecord& r, Subtype s, const Variable& v) {
  if (!v.parameter) return s == Subtype::LumB ? 1.0 : 0.0;
  try {
    const auto d = dichotomize(std::span<const ClinicalRecord>(&r, 1), *v.parameter, v.cut);
    return d.positive.empty() ? 0.0 : 1.0;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::MissingValue) return std::nullopt;
    throw;
  }
}

json cox_row(const CoxFit& fit, Eigen::Index k) {
  return {{"hr", fit.hr(k)}, {"ci_low", fit.ci_low(k)}, {"ci_high", fit.ci_high(k)}, {"p", fit.p(k)},
          {"beta", fit.beta(k)}, {"se", fit.se(k)}};
}

json error_cell(const Error& e) {
  return {{"error_code", std::string(to_string(e.code()))}, {"message", e.what()}};
}

}  // namespace

void cmd_survival(const Globals& g, const SurvivalOptions& o, Streams io) {
  std::unordered_map<std::string, Subtype> subtypes;
  if (o.subtypes) {
    subtypes = subtypes_from_file(*o.subtypes);
  } else if (o.centroids && o.predictions) {
    subtypes = subtypes_from_predictions(o);
  } else {
    throw Error(ErrorCode::Usage, "survival needs --subtypes, or --centroids with --predictions");
  }
  const auto all = load_clinical(o.clinical);

  std::vector<ClinicalRecord> cohort;
  std::vector<Subtype> labels;
  std::size_t unlabelled = 0, non_luminal = 0;
  for (const auto& r : all) {
    auto it = subtypes.find(r.patient_id);
    if (it == subtypes.end()) {
      ++unlabelled;
    } else if (it->second != Subtype::LumA && it->second != Subtype::LumB) {
      ++non_luminal;
    } else {
      cohort.push_back(r);
      labels.push_back(it->second);
    }
  }
  if (cohort.empty()) throw Error(ErrorCode::EmptyCohort, "no LumA or LumB patient has clinical data");
  const SurvivalData data = SurvivalData::from_records(cohort);
  const auto events = static_cast<std::size_t>(std::count(data.event.begin(), data.event.end(), true));
  if (events == 0) throw Error(ErrorCode::NoEvents, "no deaths among " + std::to_string(cohort.size()) + " patients");

  const std::vector<Variable> vars = {
      {"grade", "3 vs 1 & 2", RiskParameter::Grade, std::nullopt},
      {"size", ">" + detail::format_double(o.size_cutoff_mm) + " vs <=" + detail::format_double(o.size_cutoff_mm) + " (mm)",
       RiskParameter::Size, o.size_cutoff_mm},
      {"age", ">" + detail::format_double(o.age_cutoff_years) + " vs <=" + detail::format_double(o.age_cutoff_years),
       RiskParameter::Age, o.age_cutoff_years},
      {"lymph_node", "pos vs neg", RiskParameter::LymphNode, std::nullopt},
      {"subtype", "LumB vs LumA", std::nullopt, std::nullopt},
  };

  // Indicator table; rows with any missing covariate drop out of the
  // multivariate fit only.
  std::vector<std::vector<std::optional<double>>> ind(cohort.size());
  for (std::size_t i = 0; i < cohort.size(); ++i)
    for (const auto& v : vars) ind[i].push_back(indicator(cohort[i], labels[i], v));

  auto fit_on = [&](const std::vector<std::size_t>& rows, const std::vector<std::size_t>& cols) {
    SurvivalData d;
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    std::vector<std::string> names;
    for (auto c : cols) names.push_back(vars[c].name);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      d.time.push_back(data.time[rows[i]]);
      d.event.push_back(data.event[rows[i]]);
      for (std::size_t k = 0; k < cols.size(); ++k)
        x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = *ind[rows[i]][cols[k]];
    }
    return std::pair{cox_fit(d, x, names), x};
  };

  json univariate = json::array();
  for (std::size_t c = 0; c < vars.size(); ++c) {
    std::vector<std::size_t> rows;
    std::size_t positive = 0;
    for (std::size_t i = 0; i < cohort.size(); ++i)
      if (ind[i][c]) {
        rows.push_back(i);
        positive += *ind[i][c] == 1.0;
      }
    json row = {{"variable", vars[c].name}, {"cutoff", vars[c].cutoff}, {"n", rows.size()},
                {"n_positive", positive}, {"n_reference", rows.size() - positive}};
    try {
      const auto [fit, x] = fit_on(rows, {c});
      row.update(cox_row(fit, 0));
      row["events"] = fit.events;
      row["converged"] = fit.converged;
    } catch (const Error& e) {
      if (g.strict) throw;
      io.err << "warning: univariate " << vars[c].name << ": " << e.what() << "\n";
      row.update(error_cell(e));
    }
    univariate.push_back(std::move(row));
  }

  std::vector<std::size_t> complete;
  for (std::size_t i = 0; i < cohort.size(); ++i)
    if (std::all_of(ind[i].begin(), ind[i].end(), [](const auto& v) { return v.has_value(); })) complete.push_back(i);
  json multivariate = {{"n", complete.size()}};
  json c_index_cell = nullptr;
  try {
    std::vector<std::size_t> cols(vars.size());
    for (std::size_t c = 0; c < cols.size(); ++c) cols[c] = c;
    const auto [fit, x] = fit_on(complete, cols);
    json rows = json::array();
    for (std::size_t c = 0; c < vars.size(); ++c) {
      json row = {{"variable", vars[c].name}, {"cutoff", vars[c].cutoff}};
      row.update(cox_row(fit, static_cast<Eigen::Index>(c)));
      rows.push_back(std::move(row));
    }
    multivariate["events"] = fit.events;
    multivariate["converged"] = fit.converged;
    multivariate["iterations"] = fit.iterations;
    multivariate["log_likelihood"] = fit.log_likelihood;
    multivariate["low_events_per_covariate"] = fit.low_events_per_covariate;
    multivariate["rows"] = rows;
    const Eigen::VectorXd risk = x * fit.beta;
    SurvivalData d;
    for (auto i : complete) {
      d.time.push_back(data.time[i]);
      d.event.push_back(data.event[i]);
    }
    c_index_cell = c_index(std::span<const double>(risk.data(), static_cast<std::size_t>(risk.size())), d);
  } catch (const Error& e) {
    if (g.strict) throw;
    io.err << "warning: multivariate fit: " << e.what() << "\n";
    multivariate.update(error_cell(e));
  }

  // Kaplan-Meier per luminal group and the log-rank comparison.
  std::array<SurvivalData, 2> groups;
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    auto& grp = groups[labels[i] == Subtype::LumB ? 1 : 0];
    grp.time.push_back(data.time[i]);
    grp.event.push_back(data.event[i]);
  }
  const fs::path out = prepare_output(g.output_dir);
  std::string km_csv = "group,time_months,survival,at_risk,events\n";
  std::vector<KmSeries> series;
  const std::array<std::string, 2> names = {"LumA", "LumB"};
  for (std::size_t k = 0; k < 2; ++k) {
    if (groups[k].size() == 0) continue;
    KmCurve curve = kaplan_meier(groups[k]);
    km_csv += names[k] + ",0,1," + std::to_string(curve.n) + ",0\n";
    for (std::size_t t = 0; t < curve.event_times.size(); ++t)
      km_csv += names[k] + "," + detail::format_double(curve.event_times[t]) + "," +
                detail::format_double(curve.survival_prob[t]) + "," + std::to_string(curve.at_risk[t]) + "," +
                std::to_string(curve.events[t]) + "\n";
    series.push_back({names[k], std::move(curve)});
  }
  json logrank_cell;
  try {
    const LogRankResult lr = logrank(groups[1], groups[0]);
    logrank_cell = {{"chi2", lr.chi2}, {"p", lr.p_value}, {"observed_lumb", lr.observed_a},
                    {"expected_lumb", lr.expected_a}};
  } catch (const Error& e) {
    if (g.strict) throw;
    io.err << "warning: log-rank: " << e.what() << "\n";
    logrank_cell = error_cell(e);
  }
  write_file(out / "km.csv", km_csv);
  write_file(out / "km.svg", km_svg(series, "Overall survival by luminal subtype"));

  json table = {{"cohort",
                 {{"n", cohort.size()},
                  {"events", events},
                  {"lum_a", groups[0].size()},
                  {"lum_b", groups[1].size()},
                  {"excluded_non_luminal", non_luminal},
                  {"excluded_without_subtype", unlabelled}}},
                {"univariate", univariate},
                {"multivariate", multivariate},
                {"logrank_lumb_vs_luma", logrank_cell},
                {"c_index_multivariate", c_index_cell}};
  write_json(out / "survival_table.json", table);
  io.out << "survival analysis on " << cohort.size() << " luminal patients, " << events << " events\n";
}

}  // namespace histoexpr::cli
