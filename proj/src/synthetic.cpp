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

#include "histoexpr/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

#include "histoexpr/error.hpp"

namespace histoexpr {

namespace {

std::string numbered(const char* prefix, std::size_t i, int width) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, i);
  return buf;
}

}  // namespace

Eigen::MatrixXd LinearTask::slide_matrix() const {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(slides.size()), static_cast<Eigen::Index>(slides.at(0).z.size()));
  for (std::size_t i = 0; i < slides.size(); ++i)
    for (std::size_t f = 0; f < slides[i].z.size(); ++f)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f)) = slides[i].z[f];
  return x;
}

PatchDataset LinearTask::patch_dataset() const {
  PatchDataset d;
  d.targets = targets;
  for (const auto& p : patch_sets) {
    RowMatrix m(p.n_patches, p.n_features);
    for (std::uint32_t i = 0; i < p.n_patches; ++i)
      for (std::uint32_t f = 0; f < p.n_features; ++f) m(i, f) = p.values[static_cast<std::size_t>(i) * p.n_features + f];
    d.patches.push_back(std::move(m));
  }
  return d;
}

ExpressionMatrix LinearTask::raw_expression() const {
  ExpressionMatrix e;
  for (const auto& s : slides) e.patient_ids.push_back(s.patient_id);
  e.values = inverse_transform(targets);
  return e;
}

LinearTask make_linear_task(const LinearTaskSpec& spec) {
  if (spec.patients == 0 || spec.patches == 0 || spec.features == 0 || spec.genes == 0)
    throw Error(ErrorCode::InvalidConfig, "synthetic task dimensions must be positive");
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  LinearTask task;
  const auto g_count = static_cast<Eigen::Index>(spec.genes);
  task.offsets.resize(g_count);
  task.slopes.resize(g_count);
  for (Eigen::Index g = 0; g < g_count; ++g) {
    const auto k = static_cast<double>(g % 8);
    task.offsets[g] = 5.0 + 0.7 * k;
    task.slopes[g] = (g % 2 ? 1.0 : -1.0) * (0.5 + 0.25 * k);
    task.panel.genes.push_back(numbered("SYN_GENE_", static_cast<std::size_t>(g), 3));
    task.panel.assay_tags.push_back({});
    task.panel.pam50_flags.push_back(false);
  }

  task.targets.resize(static_cast<Eigen::Index>(spec.patients), g_count);
  std::vector<double> mu(spec.features);
  for (std::size_t p = 0; p < spec.patients; ++p) {
    PatchFeatureSet set;
    set.patient_id = numbered("SYN", p, 4);
    set.n_patches = spec.patches;
    set.n_features = spec.features;
    set.extractor_tag = "synthetic-linear-v1";
    const double shift = 0.5 * normal(rng);
    for (auto& m : mu) m = shift + normal(rng);
    set.values.resize(static_cast<std::size_t>(spec.patches) * spec.features);
    for (std::uint32_t i = 0; i < spec.patches; ++i)
      for (std::uint32_t f = 0; f < spec.features; ++f)
        set.values[static_cast<std::size_t>(i) * spec.features + f] = static_cast<float>(mu[f] + normal(rng));

    SlideFeature slide = aggregate(set);
    double mean_z = 0.0;
    for (double v : slide.z) mean_z += v;
    mean_z /= static_cast<double>(slide.z.size());
    for (Eigen::Index g = 0; g < g_count; ++g)
      task.targets(static_cast<Eigen::Index>(p), g) =
          task.offsets[g] + task.slopes[g] * mean_z + spec.noise_sigma * normal(rng);
    task.patch_sets.push_back(std::move(set));
    task.slides.push_back(std::move(slide));
  }
  return task;
}

BlobTask make_blobs(std::size_t per_class, std::size_t dims, double sigma, double separation, std::uint64_t seed) {
  if (dims < kSubtypeCount) throw Error(ErrorCode::InvalidConfig, "blobs need at least 4 dimensions");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  BlobTask t;
  const auto d = static_cast<Eigen::Index>(dims);
  // Orthonormal directions from a fixed stream so that every seed shares the
  // same centers; scaled by separation / sqrt(2) they sit `separation` apart.
  std::mt19937_64 center_rng(0xb10b5ULL + dims);
  std::normal_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd dirs(d, static_cast<Eigen::Index>(kSubtypeCount));
  for (Eigen::Index k = 0; k < dirs.cols(); ++k)
    for (Eigen::Index j = 0; j < d; ++j) dirs(j, k) = unit(center_rng);
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(dirs).householderQ() *
                            Eigen::MatrixXd::Identity(d, dirs.cols());
  t.centers = (separation / std::sqrt(2.0)) * q.transpose();
  t.x.resize(static_cast<Eigen::Index>(per_class * kSubtypeCount), d);
  Eigen::Index row = 0;
  for (std::size_t i = 0; i < per_class; ++i) {
    for (int k = 0; k < static_cast<int>(kSubtypeCount); ++k, ++row) {
      for (Eigen::Index j = 0; j < d; ++j) t.x(row, j) = t.centers(k, j) + normal(rng);
      t.labels.push_back(k);
    }
  }
  return t;
}

SurvivalData simulate_exponential_survival(const Eigen::MatrixXd& x, const Eigen::VectorXd& beta, double base_rate,
                                           double censor_fraction, std::uint64_t seed) {
  if (x.cols() != beta.size()) throw Error(ErrorCode::ShapeMismatch, "design width differs from beta");
  const Eigen::VectorXd rate = base_rate * (x * beta).array().exp();
  // With exponential censoring at rate c, subject i is censored with
  // probability c / (c + rate_i); solve the cohort mean for c by bisection.
  double censor_rate = 0.0;
  if (censor_fraction > 0.0) {
    double lo = 0.0, hi = 1.0;
    auto frac = [&](double c) { return (c / (c + rate.array())).mean(); };
    while (frac(hi) < censor_fraction) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (frac(mid) < censor_fraction ? lo : hi) = mid;
    }
    censor_rate = 0.5 * (lo + hi);
  }
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> unit(1.0);
  SurvivalData d;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double t = unit(rng) / rate[i];
    const double c = censor_rate > 0.0 ? unit(rng) / censor_rate : std::numeric_limits<double>::infinity();
    d.time.push_back(std::min(t, c));
    d.event.push_back(t <= c);
  }
  return d;
}

ClinicalCohort make_clinical_cohort(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  ClinicalCohort cohort;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 5);
  for (std::size_t i = 0; i < n; ++i) {
    ClinicalRecord r;
    r.patient_id = numbered("PT", i, 4);
    const bool lumb = u(rng) < 0.35;
    r.grade = u(rng) < 0.2 ? 3 : (u(rng) < 0.5 ? 1 : 2);
    r.size_mm = std::max(2.0, std::round(18.0 + 8.0 * normal(rng)));
    r.age_years = std::clamp(std::round(52.0 + 11.0 * normal(rng)), 25.0, 90.0);
    r.ln_positive = u(rng) < 0.3;
    r.er = Marker::Positive;
    r.pr = u(rng) < 0.8 ? Marker::Positive : Marker::Negative;
    r.her2 = u(rng) < 0.1 ? Marker::Positive : Marker::Negative;
    r.ki67_percent = std::round(lumb ? 25.0 + 8.0 * u(rng) : 8.0 + 8.0 * u(rng));
    const auto row = static_cast<Eigen::Index>(i);
    x(row, 0) = *r.grade == 3;
    x(row, 1) = *r.size_mm > 20.0;
    x(row, 2) = *r.age_years > 55.0;
    x(row, 3) = *r.ln_positive;
    x(row, 4) = lumb;
    cohort.records.push_back(std::move(r));
    cohort.subtypes.push_back(lumb ? Subtype::LumB : Subtype::LumA);
  }
  Eigen::VectorXd beta(5);
  beta << 0.3, 0.25, 0.9, 0.45, 0.65;
  const SurvivalData s = simulate_exponential_survival(x, beta, 0.004, 0.6, seed ^ 0x5eedULL);
  for (std::size_t i = 0; i < n; ++i) {
    // Whole days, expressed in months, keep ties possible but rare.
    cohort.records[i].time = std::max(1.0, std::round(s.time[i] * 30.0)) / 30.0;
    cohort.records[i].event = s.event[i];
  }
  return cohort;
}

}  // namespace histoexpr
