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

#include "histoexpr/expression.hpp"

#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "csv.hpp"
#include "histoexpr/error.hpp"

namespace histoexpr {

using json = nlohmann::json;

std::size_t GenePanel::pam50_count() const {
  std::size_t n = 0;
  for (bool f : pam50_flags) n += f ? 1 : 0;
  return n;
}

std::vector<std::size_t> GenePanel::pam50_indices() const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < pam50_flags.size(); ++i)
    if (pam50_flags[i]) idx.push_back(i);
  return idx;
}

void GenePanel::validate() const {
  if (genes.empty()) throw Error(ErrorCode::InvalidConfig, "empty gene panel");
  if (assay_tags.size() != genes.size() || pam50_flags.size() != genes.size())
    throw Error(ErrorCode::InvalidConfig, "panel field lengths differ");
  std::unordered_set<std::string> seen;
  for (const auto& g : genes) {
    if (g.empty()) throw Error(ErrorCode::InvalidConfig, "empty gene symbol");
    if (!seen.insert(g).second) throw Error(ErrorCode::DuplicateGene, g);
  }
  if (pam50_count() > 50)
    throw Error(ErrorCode::InvalidConfig, "more than 50 pam50-flagged genes");
}

GenePanel parse_panel_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("panel json: ") + e.what());
  }
  if (!doc.is_array()) throw Error(ErrorCode::ParseError, "panel json must be an array");
  GenePanel panel;
  for (const auto& entry : doc) {
    if (!entry.is_object() || !entry.contains("symbol") || !entry["symbol"].is_string())
      throw Error(ErrorCode::ParseError, "panel entry without a string symbol");
    panel.genes.push_back(entry["symbol"].get<std::string>());
    std::vector<std::string> assays;
    if (entry.contains("assays")) assays = entry["assays"].get<std::vector<std::string>>();
    panel.assay_tags.push_back(std::move(assays));
    panel.pam50_flags.push_back(entry.value("pam50", false));
  }
  panel.validate();
  return panel;
}

std::string panel_to_json(const GenePanel& panel) {
  json doc = json::array();
  for (std::size_t i = 0; i < panel.size(); ++i) {
    doc.push_back({{"symbol", panel.genes[i]},
                   {"assays", panel.assay_tags[i]},
                   {"pam50", static_cast<bool>(panel.pam50_flags[i])}});
  }
  return doc.dump(2) + "\n";
}

GenePanel load_panel(const std::filesystem::path& path) {
  return parse_panel_json(detail::read_text(path));
}

void save_panel(const GenePanel& panel, const std::filesystem::path& path) {
  detail::write_text(path, panel_to_json(panel));
}

std::uint64_t panel_hash(const GenePanel& panel) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](unsigned char c) {
    h ^= c;
    h *= 0x100000001b3ULL;
  };
  for (std::size_t i = 0; i < panel.genes.size(); ++i) {
    if (i > 0) mix(',');
    for (unsigned char c : panel.genes[i]) mix(c);
  }
  return h;
}

Eigen::MatrixXd log_transform(const Eigen::MatrixXd& raw) {
  Eigen::MatrixXd out(raw.rows(), raw.cols());
  for (Eigen::Index r = 0; r < raw.rows(); ++r) {
    for (Eigen::Index c = 0; c < raw.cols(); ++c) {
      const double x = raw(r, c);
      if (!(x >= 0.0))
        throw Error(ErrorCode::NegativeExpression,
                    "entry (" + std::to_string(r) + ", " + std::to_string(c) + ")");
      out(r, c) = std::log2(1.0 + x);
    }
  }
  return out;
}

Eigen::MatrixXd inverse_transform(const Eigen::MatrixXd& t) {
  Eigen::MatrixXd out(t.rows(), t.cols());
  for (Eigen::Index r = 0; r < t.rows(); ++r) {
    for (Eigen::Index c = 0; c < t.cols(); ++c) {
      const double x = t(r, c);
      if (!(x >= 0.0))
        throw Error(ErrorCode::NegativeExpression,
                    "entry (" + std::to_string(r) + ", " + std::to_string(c) + ")");
      out(r, c) = std::exp2(x) - 1.0;
    }
  }
  return out;
}

ExpressionMatrix log_transform(const ExpressionMatrix& raw) {
  if (raw.transformed)
    throw Error(ErrorCode::InvalidConfig, "expression matrix is already transformed");
  return ExpressionMatrix{raw.patient_ids, log_transform(raw.values), true};
}

ExpressionLoad parse_expression(const std::string& text, const GenePanel& panel) {
  const auto lines = detail::split_lines(text);
  if (lines.empty()) throw Error(ErrorCode::ParseError, "line 1: empty expression file");
  const auto header = detail::split_fields(lines[0]);
  if (header.empty() || header[0] != "patient_id")
    throw Error(ErrorCode::ParseError, "line 1: first column must be patient_id");

  std::unordered_map<std::string, std::size_t> column_of;
  for (std::size_t c = 1; c < header.size(); ++c) {
    if (!column_of.emplace(header[c], c).second)
      throw Error(ErrorCode::ParseError, "line 1: duplicate column " + header[c]);
  }
  std::vector<std::size_t> source_col(panel.size());
  for (std::size_t g = 0; g < panel.size(); ++g) {
    auto it = column_of.find(panel.genes[g]);
    if (it == column_of.end()) throw Error(ErrorCode::MissingGene, panel.genes[g]);
    source_col[g] = it->second;
  }

  ExpressionLoad result;
  std::vector<std::vector<double>> rows;
  std::unordered_set<std::string> seen;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    const auto fields = detail::split_fields(lines[ln]);
    const std::string where = "line " + std::to_string(ln + 1);
    if (fields.size() != header.size())
      throw Error(ErrorCode::ParseError, where + ": expected " + std::to_string(header.size()) +
                                             " fields, got " + std::to_string(fields.size()));
    const std::string& id = fields[0];
    if (id.empty()) throw Error(ErrorCode::ParseError, where + ": empty patient_id");
    if (!seen.insert(id).second) throw Error(ErrorCode::DuplicatePatient, id);

    std::vector<double> row(panel.size());
    bool missing = false;
    for (std::size_t g = 0; g < panel.size(); ++g) {
      const std::string& cell = fields[source_col[g]];
      if (cell.empty() || cell == "NA") {
        missing = true;
        continue;
      }
      auto v = detail::parse_double(cell);
      if (!v || !std::isfinite(*v))
        throw Error(ErrorCode::ParseError, where + ": bad value '" + cell + "'");
      row[g] = *v;
    }
    if (missing) {
      result.rejected_patients.push_back(id);
      continue;
    }
    result.matrix.patient_ids.push_back(id);
    rows.push_back(std::move(row));
  }

  result.matrix.values.resize(static_cast<Eigen::Index>(rows.size()),
                              static_cast<Eigen::Index>(panel.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t g = 0; g < panel.size(); ++g)
      result.matrix.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(g)) = rows[r][g];
  result.matrix.transformed = false;
  return result;
}

ExpressionLoad load_expression(const std::filesystem::path& csv, const GenePanel& panel) {
  return parse_expression(detail::read_text(csv), panel);
}

void save_expression(const ExpressionMatrix& m, const GenePanel& panel,
                     const std::filesystem::path& csv) {
  if (static_cast<std::size_t>(m.values.cols()) != panel.size())
    throw Error(ErrorCode::ShapeMismatch, "matrix width differs from panel size");
  std::string out = "patient_id";
  for (const auto& g : panel.genes) out += "," + g;
  out += "\n";
  for (std::size_t r = 0; r < m.patient_ids.size(); ++r) {
    out += m.patient_ids[r];
    for (Eigen::Index c = 0; c < m.values.cols(); ++c)
      out += "," + detail::format_double(m.values(static_cast<Eigen::Index>(r), c));
    out += "\n";
  }
  detail::write_text(csv, out);
}

}  // namespace histoexpr
