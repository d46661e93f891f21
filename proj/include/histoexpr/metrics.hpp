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

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace histoexpr {

// Two-sided tail probabilities. All p-values in this module are two-sided.
double student_t_two_sided(double t, double df);
double f_upper_tail(double f, double df1, double df2);
double chi2_upper_tail(double x, double df);
double normal_two_sided(double z);

struct CorrelationResult {
  double rho = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
};

/// Average ranks (1-based); tied values share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> x);

/// Spearman rank correlation with a t-approximation p-value on n - 2 df.
/// Throws LengthMismatch (sizes differ or n < 3) and ConstantInput.
CorrelationResult spearman(std::span<const double> x, std::span<const double> y);
CorrelationResult pearson(std::span<const double> x, std::span<const double> y);

/// Benjamini-Hochberg step-up adjusted p-values, in input order.
std::vector<double> bh_fdr(std::span<const double> p);

/// 1 - SS_res / SS_tot. Throws ConstantTruth.
double r2(std::span<const double> pred, std::span<const double> truth);

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  double df1 = 0.0;
  double df2 = 0.0;  // unused for t-tests
};

/// Welch's unequal-variance t-test.
TestResult welch_t(std::span<const double> a, std::span<const double> b);
/// One-way ANOVA; df1 = k - 1, df2 = N - k.
TestResult anova_oneway(const std::vector<std::vector<double>>& groups);

/// Area under the ROC curve as normalized Mann-Whitney U, ties count half.
/// `labels` are 0/1. Throws SingleClass.
double auroc(std::span<const double> scores, std::span<const int> labels);

struct GeneStat {
  double rho = 0.0;
  double p = 1.0;
  double fdr_p = 1.0;
  double r2 = 0.0;
  bool defined = true;  // false: zero variance in pred or truth
};

struct PatientStat {
  double rho = 0.0;
  double p = 1.0;
  double fdr_p = 1.0;
  bool defined = true;
};

struct EvalReport {
  std::vector<std::string> genes;
  std::vector<std::string> patients;
  std::vector<GeneStat> per_gene;
  std::vector<PatientStat> per_patient;
  double median_gene_rho = 0.0;
  double median_patient_rho = 0.0;
  std::size_t significant_genes = 0;  // fdr_p < 0.05
  std::size_t undefined_genes = 0;
  std::size_t undefined_patients = 0;
};

/// Median of the values; NaN for an empty input.
double median(std::vector<double> values);

/// Per-gene statistics run across patients (columns); per-patient statistics
/// run across genes (rows). BH is applied separately to each family.
EvalReport evaluate(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth,
                    std::vector<std::string> genes = {}, std::vector<std::string> patients = {});

/// Writes <prefix>_genes.csv, <prefix>_patients.csv and <prefix>_summary.json.
/// `pam50` flags genes for the summary's top-gene list (may be empty).
void save_report(const EvalReport& report, const std::vector<bool>& pam50,
                 const std::filesystem::path& dir, const std::string& prefix);

}  // namespace histoexpr
