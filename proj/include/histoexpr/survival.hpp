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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace histoexpr {

enum class Marker { Negative, Positive };

struct ClinicalRecord {
  std::string patient_id;
  double time = 0.0;  // months, > 0
  bool event = false;
  std::optional<int> grade;
  std::optional<double> size_mm;
  std::optional<double> age_years;
  std::optional<bool> ln_positive;
  std::optional<Marker> er, pr, her2;
  std::optional<double> ki67_percent;
};

/// `patient_id,time_months,event,grade,size_mm,age_years,ln_positive,er,pr,her2,ki67_percent`
/// Empty cells and NA are missing values.
std::vector<ClinicalRecord> load_clinical(const std::filesystem::path& csv);
std::vector<ClinicalRecord> parse_clinical(const std::string& text);
std::string clinical_to_csv(std::span<const ClinicalRecord> records);
void save_clinical(std::span<const ClinicalRecord> records, const std::filesystem::path& csv);

/// Observed times and event flags; the survival routines below take these
/// so callers can build cohorts without full clinical records.
struct SurvivalData {
  std::vector<double> time;
  std::vector<bool> event;

  std::size_t size() const { return time.size(); }
  static SurvivalData from_records(std::span<const ClinicalRecord> records);
};

struct KmCurve {
  std::vector<double> event_times;    // ascending, distinct
  std::vector<double> survival_prob;  // value after each step
  std::vector<std::size_t> at_risk;   // at each event time
  std::vector<std::size_t> events;    // deaths at each event time
  std::size_t n = 0;

  /// S(t); 1 before the first event time.
  double at(double t) const;
};

KmCurve kaplan_meier(const SurvivalData& data);

struct LogRankResult {
  double chi2 = 0.0;
  double p_value = 1.0;
  double observed_a = 0.0;
  double expected_a = 0.0;
};

LogRankResult logrank(const SurvivalData& a, const SurvivalData& b);

enum class TieMethod { Efron, Breslow };

struct CoxOptions {
  TieMethod ties = TieMethod::Efron;
  int max_iterations = 100;
  double tolerance = 1e-9;  // on max |delta beta|
  double separation_bound = 20.0;  // on beta * sd(covariate)
};

struct CoxFit {
  std::vector<std::string> names;
  Eigen::VectorXd beta;
  Eigen::MatrixXd covariance;
  Eigen::VectorXd se, hr, ci_low, ci_high, p;
  double log_likelihood = 0.0;
  std::vector<double> log_likelihood_trace;  // after each accepted step
  std::size_t n = 0;
  std::size_t events = 0;
  bool converged = false;
  int iterations = 0;
  bool low_events_per_covariate = false;  // n < 10 * covariates
};

/// Partial log-likelihood at `beta`.
double cox_log_likelihood(const SurvivalData& data, const Eigen::MatrixXd& x,
                          const Eigen::VectorXd& beta, TieMethod ties = TieMethod::Efron);

/// Newton-Raphson with step-halving on the tie-corrected partial likelihood.
/// Throws ConstantCovariate, Separation, NotConverged, NoEvents.
CoxFit cox_fit(const SurvivalData& data, const Eigen::MatrixXd& x, std::vector<std::string> names = {},
               const CoxOptions& options = {});

/// Harrell's concordance over comparable pairs; risk ties count half.
double c_index(std::span<const double> risk, const SurvivalData& data);

enum class RiskParameter { Grade, Size, Age, LymphNode };

struct Dichotomy {
  std::vector<std::size_t> positive;   // grade 3, size > cut, age > cut, LN pos
  std::vector<std::size_t> reference;  // grade 1&2, size <= cut, age <= cut, LN neg
};

/// Default cutoffs: grade 3, 20 mm, 55 years. Throws MissingValue.
Dichotomy dichotomize(std::span<const ClinicalRecord> records, RiskParameter parameter,
                      std::optional<double> cutoff = std::nullopt);

std::string to_string(RiskParameter p);

}  // namespace histoexpr
