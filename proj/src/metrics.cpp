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

#include "histoexpr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include "csv.hpp"
#include "histoexpr/error.hpp"

namespace histoexpr {

namespace bm = boost::math;

double student_t_two_sided(double t, double df) {
  if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
  if (std::isinf(t)) return 0.0;
  const bm::students_t dist(df);
  return std::min(1.0, 2.0 * bm::cdf(bm::complement(dist, std::fabs(t))));
}

double f_upper_tail(double f, double df1, double df2) {
  if (std::isinf(f)) return 0.0;
  if (f <= 0.0) return 1.0;
  const bm::fisher_f dist(df1, df2);
  return bm::cdf(bm::complement(dist, f));
}

double chi2_upper_tail(double x, double df) {
  if (std::isinf(x)) return 0.0;
  if (x <= 0.0) return 1.0;
  const bm::chi_squared dist(df);
  return bm::cdf(bm::complement(dist, x));
}

double normal_two_sided(double z) {
  if (std::isinf(z)) return 0.0;
  const bm::normal dist;
  return std::min(1.0, 2.0 * bm::cdf(bm::complement(dist, std::fabs(z))));
}

std::vector<double> average_ranks(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && x[order[j]] == x[order[i]]) ++j;
    // positions i..j-1 (0-based) share rank mean((i+1)..j)
    const double r = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r;
    i = j;
  }
  return ranks;
}

namespace {

void check_pair(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw Error(ErrorCode::LengthMismatch, std::to_string(x.size()) + " vs " + std::to_string(y.size()));
  if (x.size() < 3) throw Error(ErrorCode::LengthMismatch, "need at least 3 pairs");
}

CorrelationResult product_moment(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorCode::ConstantInput, "zero variance input");
  double rho = sxy / std::sqrt(sxx * syy);
  rho = std::clamp(rho, -1.0, 1.0);

  CorrelationResult r;
  r.rho = rho;
  r.n = n;
  const double df = static_cast<double>(n) - 2.0;
  if (std::fabs(rho) >= 1.0) {
    r.p_value = 0.0;
  } else if (df <= 0.0) {
    r.p_value = 1.0;
  } else {
    const double t = rho * std::sqrt(df / (1.0 - rho * rho));
    r.p_value = student_t_two_sided(t, df);
  }
  return r;
}

}  // namespace

CorrelationResult spearman(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y);
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return product_moment(rx, ry);
}

CorrelationResult pearson(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y);
  return product_moment(x, y);
}

std::vector<double> bh_fdr(std::span<const double> p) {
  const std::size_t m = p.size();
  for (std::size_t i = 0; i < m; ++i) {
    if (!(p[i] >= 0.0 && p[i] <= 1.0))
      throw Error(ErrorCode::OutOfRange, "p[" + std::to_string(i) + "] not in [0, 1]");
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  std::vector<double> adj(m);
  double running = 1.0;
  for (std::size_t k = m; k-- > 0;) {
    const double v = p[order[k]] * static_cast<double>(m) / static_cast<double>(k + 1);
    running = std::min(running, v);
    // p * m / m can round one ulp below p.
    adj[order[k]] = std::max(p[order[k]], std::min(running, 1.0));
  }
  return adj;
}

double r2(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size() || truth.empty())
    throw Error(ErrorCode::LengthMismatch, std::to_string(pred.size()) + " vs " + std::to_string(truth.size()));
  const double mean = std::accumulate(truth.begin(), truth.end(), 0.0) / static_cast<double>(truth.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ss_res += (truth[i] - pred[i]) * (truth[i] - pred[i]);
    ss_tot += (truth[i] - mean) * (truth[i] - mean);
  }
  if (ss_tot == 0.0) throw Error(ErrorCode::ConstantTruth, "truth has zero variance");
  return 1.0 - ss_res / ss_tot;
}

namespace {

struct Moments {
  double mean = 0.0;
  double ss = 0.0;  // sum of squared deviations
  double n = 0.0;
};

Moments moments(std::span<const double> v) {
  Moments m;
  m.n = static_cast<double>(v.size());
  m.mean = std::accumulate(v.begin(), v.end(), 0.0) / m.n;
  for (double x : v) m.ss += (x - m.mean) * (x - m.mean);
  return m;
}

}  // namespace

TestResult welch_t(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2)
    throw Error(ErrorCode::GroupTooSmall, "each group needs at least 2 values");
  const Moments ma = moments(a);
  const Moments mb = moments(b);
  const double va = ma.ss / (ma.n - 1.0) / ma.n;
  const double vb = mb.ss / (mb.n - 1.0) / mb.n;
  if (va + vb == 0.0) throw Error(ErrorCode::ConstantInput, "both groups have zero variance");
  TestResult r;
  r.statistic = (ma.mean - mb.mean) / std::sqrt(va + vb);
  r.df1 = (va + vb) * (va + vb) / (va * va / (ma.n - 1.0) + vb * vb / (mb.n - 1.0));
  r.p_value = student_t_two_sided(r.statistic, r.df1);
  return r;
}

TestResult anova_oneway(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2) throw Error(ErrorCode::GroupTooSmall, "need at least 2 groups");
  double total_n = 0.0, grand = 0.0;
  for (const auto& g : groups) {
    if (g.size() < 2) throw Error(ErrorCode::GroupTooSmall, "each group needs at least 2 values");
    total_n += static_cast<double>(g.size());
    grand += std::accumulate(g.begin(), g.end(), 0.0);
  }
  grand /= total_n;
  double ss_between = 0.0, ss_within = 0.0;
  for (const auto& g : groups) {
    const Moments m = moments(g);
    ss_between += m.n * (m.mean - grand) * (m.mean - grand);
    ss_within += m.ss;
  }
  const double k = static_cast<double>(groups.size());
  TestResult r;
  r.df1 = k - 1.0;
  r.df2 = total_n - k;
  if (ss_within == 0.0) {
    if (ss_between == 0.0) throw Error(ErrorCode::AllEqual, "all observations are equal");
    r.statistic = std::numeric_limits<double>::infinity();
    r.p_value = 0.0;
    return r;
  }
  r.statistic = (ss_between / r.df1) / (ss_within / r.df2);
  r.p_value = f_upper_tail(r.statistic, r.df1, r.df2);
  return r;
}

double auroc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size())
    throw Error(ErrorCode::LengthMismatch, "scores and labels differ in length");
  const auto ranks = average_ranks(scores);
  double n_pos = 0.0, rank_sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw Error(ErrorCode::OutOfRange, "labels must be 0 or 1");
    if (labels[i] == 1) {
      n_pos += 1.0;
      rank_sum += ranks[i];
    }
  }
  const double n_neg = static_cast<double>(labels.size()) - n_pos;
  if (n_pos == 0.0 || n_neg == 0.0) throw Error(ErrorCode::SingleClass, "both classes must be present");
  const double u = rank_sum - n_pos * (n_pos + 1.0) / 2.0;
  return u / (n_pos * n_neg);
}

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

EvalReport evaluate(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth,
                    std::vector<std::string> genes, std::vector<std::string> patients) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols())
    throw Error(ErrorCode::ShapeMismatch, "prediction and truth shapes differ");
  const auto n_pat = static_cast<std::size_t>(truth.rows());
  const auto n_gene = static_cast<std::size_t>(truth.cols());
  if (genes.empty())
    for (std::size_t g = 0; g < n_gene; ++g) genes.push_back("gene" + std::to_string(g));
  if (patients.empty())
    for (std::size_t p = 0; p < n_pat; ++p) patients.push_back("patient" + std::to_string(p));
  if (genes.size() != n_gene || patients.size() != n_pat)
    throw Error(ErrorCode::ShapeMismatch, "label counts differ from matrix shape");

  EvalReport rep;
  rep.genes = std::move(genes);
  rep.patients = std::move(patients);
  rep.per_gene.resize(n_gene);
  rep.per_patient.resize(n_pat);

  std::vector<double> a, b;
  for (std::size_t g = 0; g < n_gene; ++g) {
    a.assign(pred.col(static_cast<Eigen::Index>(g)).begin(), pred.col(static_cast<Eigen::Index>(g)).end());
    b.assign(truth.col(static_cast<Eigen::Index>(g)).begin(), truth.col(static_cast<Eigen::Index>(g)).end());
    GeneStat& s = rep.per_gene[g];
    try {
      const auto c = spearman(a, b);
      s.rho = c.rho;
      s.p = c.p_value;
      s.r2 = r2(a, b);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ConstantInput && e.code() != ErrorCode::ConstantTruth) throw;
      s = GeneStat{std::nan(""), 1.0, 1.0, std::nan(""), false};
    }
  }
  for (std::size_t p = 0; p < n_pat; ++p) {
    a.assign(pred.row(static_cast<Eigen::Index>(p)).begin(), pred.row(static_cast<Eigen::Index>(p)).end());
    b.assign(truth.row(static_cast<Eigen::Index>(p)).begin(), truth.row(static_cast<Eigen::Index>(p)).end());
    PatientStat& s = rep.per_patient[p];
    try {
      const auto c = spearman(a, b);
      s.rho = c.rho;
      s.p = c.p_value;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ConstantInput) throw;
      s = PatientStat{std::nan(""), 1.0, 1.0, false};
    }
  }

  // BH within each family over the defined entries only.
  auto adjust = [](auto& stats) {
    std::vector<double> ps;
    std::vector<std::size_t> where;
    for (std::size_t i = 0; i < stats.size(); ++i) {
      if (!stats[i].defined) continue;
      ps.push_back(stats[i].p);
      where.push_back(i);
    }
    const auto adj = bh_fdr(ps);
    for (std::size_t k = 0; k < where.size(); ++k) stats[where[k]].fdr_p = adj[k];
  };
  adjust(rep.per_gene);
  adjust(rep.per_patient);

  std::vector<double> rhos;
  for (const auto& s : rep.per_gene) {
    if (!s.defined) {
      ++rep.undefined_genes;
      continue;
    }
    rhos.push_back(s.rho);
    if (s.fdr_p < 0.05) ++rep.significant_genes;
  }
  rep.median_gene_rho = median(rhos);
  rhos.clear();
  for (const auto& s : rep.per_patient) {
    if (!s.defined) {
      ++rep.undefined_patients;
      continue;
    }
    rhos.push_back(s.rho);
  }
  rep.median_patient_rho = median(rhos);
  return rep;
}

namespace {

std::string fmt(double v) { return std::isnan(v) ? "NA" : detail::format_double(v); }

nlohmann::json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

}  // namespace

void save_report(const EvalReport& report, const std::vector<bool>& pam50,
                 const std::filesystem::path& dir, const std::string& prefix) {
  std::string genes = "symbol,rho,p,fdr_p,r2,defined\n";
  for (std::size_t g = 0; g < report.per_gene.size(); ++g) {
    const auto& s = report.per_gene[g];
    genes += report.genes[g] + "," + fmt(s.rho) + "," + fmt(s.p) + "," + fmt(s.fdr_p) + "," + fmt(s.r2) +
             "," + (s.defined ? "1" : "0") + "\n";
  }
  detail::write_text(dir / (prefix + "_genes.csv"), genes);

  std::string patients = "patient_id,rho,p,fdr_p,defined\n";
  for (std::size_t p = 0; p < report.per_patient.size(); ++p) {
    const auto& s = report.per_patient[p];
    patients += report.patients[p] + "," + fmt(s.rho) + "," + fmt(s.p) + "," + fmt(s.fdr_p) + "," +
                (s.defined ? "1" : "0") + "\n";
  }
  detail::write_text(dir / (prefix + "_patients.csv"), patients);

  // Top genes by rho, highest first; ties keep panel order.
  std::vector<std::size_t> order;
  for (std::size_t g = 0; g < report.per_gene.size(); ++g)
    if (report.per_gene[g].defined) order.push_back(g);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return report.per_gene[a].rho > report.per_gene[b].rho;
  });
  nlohmann::json top = nlohmann::json::array();
  for (std::size_t k = 0; k < std::min<std::size_t>(20, order.size()); ++k) {
    const std::size_t g = order[k];
    top.push_back({{"symbol", report.genes[g]},
                   {"rho", report.per_gene[g].rho},
                   {"fdr_p", report.per_gene[g].fdr_p},
                   {"r2", number_or_null(report.per_gene[g].r2)},
                   {"pam50", g < pam50.size() && pam50[g]}});
  }
  nlohmann::json summary = {
      {"n_genes", report.per_gene.size()},
      {"n_patients", report.per_patient.size()},
      {"median_rho_across_genes", number_or_null(report.median_gene_rho)},
      {"median_rho_across_patients", number_or_null(report.median_patient_rho)},
      {"significant_genes_fdr_0_05", report.significant_genes},
      {"undefined_genes", report.undefined_genes},
      {"undefined_patients", report.undefined_patients},
      {"top_genes", top},
  };
  detail::write_text(dir / (prefix + "_summary.json"), summary.dump(2) + "\n");
}

}  // namespace histoexpr
