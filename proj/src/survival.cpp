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

#include "histoexpr/survival.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "csv.hpp"
#include "histoexpr/error.hpp"
#include "histoexpr/metrics.hpp"

namespace histoexpr {

namespace {

constexpr double kZ975 = 1.959964;

bool is_missing(const std::string& s) { return s.empty() || s == "NA"; }

std::optional<double> opt_number(const std::string& s, const std::string& where) {
  if (is_missing(s)) return std::nullopt;
  auto v = detail::parse_double(s);
  if (!v || !std::isfinite(*v)) throw Error(ErrorCode::ParseError, where + ": bad number '" + s + "'");
  return v;
}

std::optional<Marker> opt_marker(const std::string& s, const std::string& where) {
  if (is_missing(s)) return std::nullopt;
  if (s == "pos") return Marker::Positive;
  if (s == "neg") return Marker::Negative;
  throw Error(ErrorCode::ParseError, where + ": marker must be pos, neg or NA, got '" + s + "'");
}

std::optional<bool> opt_flag(const std::string& s, const std::string& where) {
  if (is_missing(s)) return std::nullopt;
  if (s == "1" || s == "pos") return true;
  if (s == "0" || s == "neg") return false;
  throw Error(ErrorCode::ParseError, where + ": expected 0/1, got '" + s + "'");
}

// Indices sorted by ascending time.
std::vector<std::size_t> time_order(const SurvivalData& d) {
  std::vector<std::size_t> idx(d.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return d.time[a] < d.time[b]; });
  return idx;
}

void check_data(const SurvivalData& d) {
  if (d.time.size() != d.event.size())
    throw Error(ErrorCode::LengthMismatch, "time and event vectors differ in length");
  for (double t : d.time)
    if (!(t > 0.0) || !std::isfinite(t)) throw Error(ErrorCode::OutOfRange, "survival times must be > 0");
}

}  // namespace

std::vector<ClinicalRecord> parse_clinical(const std::string& text) {
  static const std::vector<std::string> kHeader = {"patient_id", "time_months", "event",  "grade",
                                                   "size_mm",    "age_years",   "ln_positive", "er",
                                                   "pr",         "her2",        "ki67_percent"};
  const auto lines = detail::split_lines(text);
  if (lines.empty() || detail::split_fields(lines[0]) != kHeader)
    throw Error(ErrorCode::ParseError, "line 1: unexpected clinical header");
  std::vector<ClinicalRecord> out;
  std::unordered_set<std::string> seen;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    const std::string where = "line " + std::to_string(ln + 1);
    const auto f = detail::split_fields(lines[ln]);
    if (f.size() != kHeader.size()) throw Error(ErrorCode::ParseError, where + ": field count");
    ClinicalRecord r;
    r.patient_id = f[0];
    if (r.patient_id.empty()) throw Error(ErrorCode::ParseError, where + ": empty patient_id");
    if (!seen.insert(r.patient_id).second) throw Error(ErrorCode::DuplicatePatient, r.patient_id);
    const auto time = opt_number(f[1], where);
    if (!time || !(*time > 0.0)) throw Error(ErrorCode::ParseError, where + ": time_months must be > 0");
    r.time = *time;
    const auto ev = opt_flag(f[2], where);
    if (!ev) throw Error(ErrorCode::ParseError, where + ": event must be 0 or 1");
    r.event = *ev;
    if (auto g = opt_number(f[3], where)) {
      if (*g != 1.0 && *g != 2.0 && *g != 3.0) throw Error(ErrorCode::ParseError, where + ": grade must be 1-3");
      r.grade = static_cast<int>(*g);
    }
    r.size_mm = opt_number(f[4], where);
    r.age_years = opt_number(f[5], where);
    r.ln_positive = opt_flag(f[6], where);
    r.er = opt_marker(f[7], where);
    r.pr = opt_marker(f[8], where);
    r.her2 = opt_marker(f[9], where);
    r.ki67_percent = opt_number(f[10], where);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<ClinicalRecord> load_clinical(const std::filesystem::path& csv) {
  return parse_clinical(detail::read_text(csv));
}

std::string clinical_to_csv(std::span<const ClinicalRecord> records) {
  auto num = [](const std::optional<double>& v) { return v ? detail::format_double(*v) : std::string("NA"); };
  auto flag = [](const std::optional<bool>& v) { return v ? std::string(*v ? "1" : "0") : std::string("NA"); };
  auto marker = [](const std::optional<Marker>& v) {
    return v ? std::string(*v == Marker::Positive ? "pos" : "neg") : std::string("NA");
  };
  std::string out = "patient_id,time_months,event,grade,size_mm,age_years,ln_positive,er,pr,her2,ki67_percent\n";
  for (const auto& r : records) {
    out += r.patient_id + "," + detail::format_double(r.time) + "," + (r.event ? "1" : "0") + "," +
           (r.grade ? std::to_string(*r.grade) : std::string("NA")) + "," + num(r.size_mm) + "," +
           num(r.age_years) + "," + flag(r.ln_positive) + "," + marker(r.er) + "," + marker(r.pr) + "," +
           marker(r.her2) + "," + num(r.ki67_percent) + "\n";
  }
  return out;
}

void save_clinical(std::span<const ClinicalRecord> records, const std::filesystem::path& csv) {
  detail::write_text(csv, clinical_to_csv(records));
}

SurvivalData SurvivalData::from_records(std::span<const ClinicalRecord> records) {
  SurvivalData d;
  for (const auto& r : records) {
    d.time.push_back(r.time);
    d.event.push_back(r.event);
  }
  return d;
}

double KmCurve::at(double t) const {
  auto it = std::upper_bound(event_times.begin(), event_times.end(), t);
  if (it == event_times.begin()) return 1.0;
  return survival_prob[static_cast<std::size_t>(it - event_times.begin()) - 1];
}

KmCurve kaplan_meier(const SurvivalData& data) {
  check_data(data);
  if (data.size() == 0) throw Error(ErrorCode::EmptyCohort, "no subjects");
  const auto idx = time_order(data);
  KmCurve km;
  km.n = data.size();
  std::size_t at_risk = data.size();
  double s = 1.0;
  std::size_t i = 0;
  while (i < idx.size()) {
    const double t = data.time[idx[i]];
    std::size_t deaths = 0, leaving = 0;
    while (i < idx.size() && data.time[idx[i]] == t) {
      deaths += data.event[idx[i]] ? 1 : 0;
      ++leaving;
      ++i;
    }
    if (deaths > 0) {
      s *= 1.0 - static_cast<double>(deaths) / static_cast<double>(at_risk);
      km.event_times.push_back(t);
      km.survival_prob.push_back(s);
      km.at_risk.push_back(at_risk);
      km.events.push_back(deaths);
    }
    at_risk -= leaving;
  }
  return km;
}

LogRankResult logrank(const SurvivalData& a, const SurvivalData& b) {
  check_data(a);
  check_data(b);
  if (a.size() == 0 || b.size() == 0) throw Error(ErrorCode::EmptyCohort, "log-rank needs two non-empty groups");

  struct Obs {
    double time;
    bool event;
    bool in_a;
  };
  std::vector<Obs> all;
  for (std::size_t i = 0; i < a.size(); ++i) all.push_back({a.time[i], a.event[i], true});
  for (std::size_t i = 0; i < b.size(); ++i) all.push_back({b.time[i], b.event[i], false});
  std::stable_sort(all.begin(), all.end(), [](const Obs& x, const Obs& y) { return x.time < y.time; });

  double n = static_cast<double>(all.size());
  double n_a = static_cast<double>(a.size());
  LogRankResult r;
  double variance = 0.0;
  std::size_t total_events = 0;
  std::size_t i = 0;
  while (i < all.size()) {
    const double t = all[i].time;
    double d = 0.0, d_a = 0.0, leave = 0.0, leave_a = 0.0;
    while (i < all.size() && all[i].time == t) {
      if (all[i].event) {
        d += 1.0;
        if (all[i].in_a) d_a += 1.0;
      }
      leave += 1.0;
      if (all[i].in_a) leave_a += 1.0;
      ++i;
    }
    if (d > 0.0) {
      total_events += static_cast<std::size_t>(d);
      r.observed_a += d_a;
      r.expected_a += d * n_a / n;
      if (n > 1.0) variance += d * (n_a / n) * (1.0 - n_a / n) * (n - d) / (n - 1.0);
    }
    n -= leave;
    n_a -= leave_a;
  }
  if (total_events == 0) throw Error(ErrorCode::NoEvents, "no events in either group");
  const double diff = r.observed_a - r.expected_a;
  if (variance > 0.0) {
    r.chi2 = diff * diff / variance;
    r.p_value = chi2_upper_tail(r.chi2, 1.0);
  }
  return r;
}

namespace {

struct CoxEval {
  double loglik = 0.0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd info;  // observed information (negative Hessian)
};

// Risk-set sums accumulated from the longest time downwards.
CoxEval cox_evaluate(const SurvivalData& data, const Eigen::MatrixXd& x, const Eigen::VectorXd& beta,
                     TieMethod ties, const std::vector<std::size_t>& order, bool derivatives) {
  const Eigen::Index p = x.cols();
  CoxEval out;
  out.grad = Eigen::VectorXd::Zero(p);
  out.info = Eigen::MatrixXd::Zero(p, p);
  const Eigen::VectorXd eta = x * beta;

  double s0 = 0.0;
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);

  std::size_t k = order.size();
  while (k > 0) {
    const double t = data.time[order[k - 1]];
    double d0 = 0.0;
    Eigen::VectorXd d1 = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd d2 = Eigen::MatrixXd::Zero(p, p);
    double deaths = 0.0;
    while (k > 0 && data.time[order[k - 1]] == t) {
      const std::size_t i = order[--k];
      const double w = std::exp(eta[static_cast<Eigen::Index>(i)]);
      const auto xi = x.row(static_cast<Eigen::Index>(i)).transpose();
      s0 += w;
      if (derivatives) {
        s1 += w * xi;
        s2.noalias() += w * xi * xi.transpose();
      }
      if (data.event[i]) {
        deaths += 1.0;
        d0 += w;
        out.loglik += eta[static_cast<Eigen::Index>(i)];
        if (derivatives) {
          d1 += w * xi;
          d2.noalias() += w * xi * xi.transpose();
          out.grad += xi;
        }
      }
    }
    for (int l = 0; l < static_cast<int>(deaths); ++l) {
      const double frac = ties == TieMethod::Efron ? l / deaths : 0.0;
      const double den = s0 - frac * d0;
      out.loglik -= std::log(den);
      if (derivatives) {
        const Eigen::VectorXd num1 = s1 - frac * d1;
        out.grad -= num1 / den;
        out.info += (s2 - frac * d2) / den - num1 * num1.transpose() / (den * den);
      }
    }
  }
  return out;
}

}  // namespace

double cox_log_likelihood(const SurvivalData& data, const Eigen::MatrixXd& x, const Eigen::VectorXd& beta,
                          TieMethod ties) {
  check_data(data);
  if (static_cast<std::size_t>(x.rows()) != data.size() || x.cols() != beta.size())
    throw Error(ErrorCode::ShapeMismatch, "design matrix does not match data / coefficients");
  return cox_evaluate(data, x, beta, ties, time_order(data), false).loglik;
}

CoxFit cox_fit(const SurvivalData& data, const Eigen::MatrixXd& x, std::vector<std::string> names,
               const CoxOptions& options) {
  check_data(data);
  const Eigen::Index p = x.cols();
  if (static_cast<std::size_t>(x.rows()) != data.size())
    throw Error(ErrorCode::ShapeMismatch, "design matrix rows differ from subject count");
  if (p == 0) throw Error(ErrorCode::ShapeMismatch, "no covariates");
  if (names.empty())
    for (Eigen::Index j = 0; j < p; ++j) names.push_back("x" + std::to_string(j));
  if (names.size() != static_cast<std::size_t>(p))
    throw Error(ErrorCode::ShapeMismatch, "covariate name count differs from columns");
  const std::size_t events = static_cast<std::size_t>(std::count(data.event.begin(), data.event.end(), true));
  if (events == 0) throw Error(ErrorCode::NoEvents, "no events in cohort");
  for (Eigen::Index j = 0; j < p; ++j) {
    if (x.col(j).maxCoeff() == x.col(j).minCoeff())
      throw Error(ErrorCode::ConstantCovariate, names[static_cast<std::size_t>(j)]);
  }

  // Centering leaves the partial likelihood unchanged and keeps exp() tame.
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd xc = x.rowwise() - mean;
  // Separation is judged on beta per standard deviation of its covariate so
  // that rescaling a column cannot trigger it.
  const Eigen::VectorXd sd = (xc.array().square().colwise().sum() / static_cast<double>(x.rows())).sqrt().transpose();
  const auto order = time_order(data);

  CoxFit fit;
  fit.names = std::move(names);
  fit.n = data.size();
  fit.events = events;
  fit.low_events_per_covariate = data.size() < 10 * static_cast<std::size_t>(p);

  auto separation = [&](const std::string& why) {
    return Error(ErrorCode::Separation, why + " (monotone likelihood)");
  };

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  CoxEval cur = cox_evaluate(data, xc, beta, options.ties, order, true);
  fit.log_likelihood_trace.push_back(cur.loglik);

  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    fit.iterations = iter;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(cur.info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
      throw Error(ErrorCode::NotConverged, "information matrix is not positive definite");
    const Eigen::VectorXd newton = ldlt.solve(cur.grad);
    Eigen::VectorXd delta = newton;

    CoxEval next;
    Eigen::VectorXd candidate;
    bool accepted = false;
    for (int half = 0; half < 60; ++half) {
      candidate = beta + delta;
      next = cox_evaluate(data, xc, candidate, options.ties, order, true);
      if (std::isfinite(next.loglik) && next.loglik >= cur.loglik) {
        accepted = true;
        break;
      }
      delta *= 0.5;
    }
    if (!accepted) {
      // No representable ascent along the Newton direction. At an optimum the
      // full step is negligible; a sizeable step pushing |beta| outward means
      // the likelihood is still rising towards infinity.
      const Eigen::ArrayXd step = newton.array() * sd.array();
      if (step.abs().maxCoeff() < 1e-6) {
        fit.converged = true;
        break;
      }
      if ((step * (beta.array() * sd.array())).maxCoeff() > 0.0)
        throw separation("likelihood still increasing at the limit of precision");
      throw Error(ErrorCode::NotConverged, "no ascent along the Newton direction");
    }
    beta = candidate;
    cur = std::move(next);
    fit.log_likelihood_trace.push_back(cur.loglik);

    if ((beta.array() * sd.array()).abs().maxCoeff() > options.separation_bound)
      throw separation("coefficient per standard deviation exceeded " +
                       detail::format_double(options.separation_bound));
    if (delta.cwiseAbs().maxCoeff() < options.tolerance) {
      fit.converged = true;
      break;
    }
  }
  if (!fit.converged)
    throw Error(ErrorCode::NotConverged, "no convergence after " + std::to_string(options.max_iterations) +
                                             " iterations");

  fit.beta = beta;
  fit.log_likelihood = cur.loglik;
  fit.covariance = cur.info.inverse();
  fit.covariance = 0.5 * (fit.covariance + fit.covariance.transpose()).eval();
  fit.se = fit.covariance.diagonal().cwiseSqrt();
  // Gradient and curvature both underflow once a monotone likelihood has run
  // far enough; what remains visible is the collapsed information.
  if (!((fit.se.array() * sd.array()).maxCoeff() < 1e6))
    throw separation("information vanished along a coefficient");
  fit.hr = beta.array().exp();
  fit.ci_low = (beta.array() - kZ975 * fit.se.array()).exp();
  fit.ci_high = (beta.array() + kZ975 * fit.se.array()).exp();
  fit.p.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) fit.p[j] = normal_two_sided(beta[j] / fit.se[j]);
  return fit;
}

double c_index(std::span<const double> risk, const SurvivalData& data) {
  check_data(data);
  if (risk.size() != data.size()) throw Error(ErrorCode::LengthMismatch, "risk scores differ from subject count");
  double comparable = 0.0, concordant = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!data.event[i]) continue;
    for (std::size_t j = 0; j < data.size(); ++j) {
      if (!(data.time[j] > data.time[i])) continue;
      comparable += 1.0;
      if (risk[i] > risk[j]) concordant += 1.0;
      else if (risk[i] == risk[j]) concordant += 0.5;
    }
  }
  if (comparable == 0.0) throw Error(ErrorCode::NoComparablePairs, "no comparable pairs");
  return concordant / comparable;
}

std::string to_string(RiskParameter p) {
  switch (p) {
    case RiskParameter::Grade: return "grade";
    case RiskParameter::Size: return "size";
    case RiskParameter::Age: return "age";
    case RiskParameter::LymphNode: return "ln_status";
  }
  return "unknown";
}

Dichotomy dichotomize(std::span<const ClinicalRecord> records, RiskParameter parameter,
                      std::optional<double> cutoff) {
  Dichotomy out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    auto missing = [&] { return Error(ErrorCode::MissingValue, to_string(parameter) + " for " + r.patient_id); };
    bool positive = false;
    switch (parameter) {
      case RiskParameter::Grade:
        if (!r.grade) throw missing();
        positive = *r.grade >= cutoff.value_or(3.0);
        break;
      case RiskParameter::Size:
        if (!r.size_mm) throw missing();
        positive = *r.size_mm > cutoff.value_or(20.0);
        break;
      case RiskParameter::Age:
        if (!r.age_years) throw missing();
        positive = *r.age_years > cutoff.value_or(55.0);
        break;
      case RiskParameter::LymphNode:
        if (!r.ln_positive) throw missing();
        positive = *r.ln_positive;
        break;
    }
    (positive ? out.positive : out.reference).push_back(i);
  }
  return out;
}

}  // namespace histoexpr
