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
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace histoexpr {

/// Ordered gene list. The order defines the output-neuron index of the
/// regressor, so it is persisted verbatim and hashed into model files.
struct GenePanel {
  std::vector<std::string> genes;
  std::vector<std::vector<std::string>> assay_tags;
  std::vector<bool> pam50_flags;

  std::size_t size() const { return genes.size(); }
  std::size_t pam50_count() const;
  /// Indices of pam50-flagged genes, in panel order.
  std::vector<std::size_t> pam50_indices() const;
  /// Throws DuplicateGene / InvalidConfig on a broken panel.
  void validate() const;
};

GenePanel load_panel(const std::filesystem::path& path);
void save_panel(const GenePanel& panel, const std::filesystem::path& path);
GenePanel parse_panel_json(const std::string& text);
std::string panel_to_json(const GenePanel& panel);

/// 64-bit FNV-1a over the gene symbols joined by commas.
std::uint64_t panel_hash(const GenePanel& panel);

struct ExpressionMatrix {
  std::vector<std::string> patient_ids;
  Eigen::MatrixXd values;  // patients x genes
  bool transformed = false;
};

/// log2(1 + x) entrywise. Throws NegativeExpression naming the first
/// offending (row, col) in row-major order.
Eigen::MatrixXd log_transform(const Eigen::MatrixXd& raw);
Eigen::MatrixXd inverse_transform(const Eigen::MatrixXd& transformed);

ExpressionMatrix log_transform(const ExpressionMatrix& raw);

struct ExpressionLoad {
  ExpressionMatrix matrix;
  /// Patients dropped because at least one panel gene had no value.
  std::vector<std::string> rejected_patients;
};

/// Reads `patient_id,GENE1,...`, reorders columns to panel order and drops
/// non-panel columns. Empty cells and "NA" count as missing.
ExpressionLoad load_expression(const std::filesystem::path& csv,
                               const GenePanel& panel);
ExpressionLoad parse_expression(const std::string& text,
                                const GenePanel& panel);

void save_expression(const ExpressionMatrix& m, const GenePanel& panel,
                     const std::filesystem::path& csv);

}  // namespace histoexpr
