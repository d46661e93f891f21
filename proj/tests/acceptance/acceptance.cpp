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

// Acceptance runner: one PASS/FAIL line per criterion. Pass criterion names
// as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cli_support.hpp"
#include "histoexpr/features.hpp"
#include "histoexpr/imageprep.hpp"
#include "histoexpr/metrics.hpp"
#include "histoexpr/regressor.hpp"
#include "histoexpr/subtype.hpp"
#include "histoexpr/survival.hpp"
#include "histoexpr/synthetic.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace histoexpr;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void expect(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("histoexpr_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// --- criteria ---------------------------------------------------------------

void gradient_correctness(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t checked = 0, skipped = 0, failed = 0;
  double worst = 0.0;
  // Full-size head: every parameter block is sampled. Small head: every
  // parameter is probed.
  const HeadShape full{};
  HeadShape small;
  small.c1 = 6;
  small.c2 = 8;
  small.c3 = 7;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    for (const HeadShape& shape : {full, small}) {
      const auto m = support::random_model(shape, 16, 3, seed);
      const auto z = support::random_matrix(3, 16, seed + 100);
      const auto t = support::random_matrix(3, 3, seed + 200);
      std::vector<Eigen::Index> which;
      if (shape == small) {
        which.resize(static_cast<std::size_t>(m.params().size()));
        std::iota(which.begin(), which.end(), Eigen::Index{0});
      } else {
        const auto v = m.views();
        const double* base = m.params().data();
        std::mt19937_64 rng(seed);
        for (const double* start : {v.w1.data(), v.b1.data(), v.w2.data(), v.b2.data(), v.w3.data(), v.b3.data(),
                                    v.w4.data(), v.b4.data()}) {
          const Eigen::Index off = start - base;
          Eigen::Index len = 0;
          if (start == v.w1.data()) len = v.w1.size();
          if (start == v.b1.data()) len = v.b1.size();
          if (start == v.w2.data()) len = v.w2.size();
          if (start == v.b2.data()) len = v.b2.size();
          if (start == v.w3.data()) len = v.w3.size();
          if (start == v.b3.data()) len = v.b3.size();
          if (start == v.w4.data()) len = v.w4.size();
          if (start == v.b4.data()) len = v.b4.size();
          std::uniform_int_distribution<Eigen::Index> pick(0, len - 1);
          for (int k = 0; k < 40; ++k) which.push_back(off + pick(rng));
        }
      }
      const auto r = support::gradient_check(m, z, t, which);
      checked += r.checked;
      skipped += r.skipped;
      failed += r.failed;
      worst = std::max(worst, r.worst);
    }
  }
  const double secs = seconds_since(t0);
  o.detail << checked << " parameters checked, " << skipped << " on ReLU kinks skipped, worst rel err " << worst
           << ", " << secs << " s. ";
  o.expect(failed == 0, "relative error <= 1e-4");
  o.expect(checked > 9 * (checked + skipped) / 10, "kinks are rare");
  o.expect(secs < 10.0, "runtime < 10 s");
}

void synthetic_end_to_end(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  LinearTaskSpec spec;  // 300 patients, N=100, F=64, 8 genes, sigma 0.01
  spec.seed = 2024;
  const LinearTask task = make_linear_task(spec);
  const Eigen::MatrixXd x = task.slide_matrix();
  const Eigen::Index n_train = 240, n_test = 60;
  TrainConfig cfg;  // lr 1e-3, batch 12, patience 4, full head
  cfg.seed = 7;
  const TrainResult r = train(x.topRows(n_train), task.targets.topRows(n_train), cfg);
  const Eigen::MatrixXd pred = predict(r.model, x.bottomRows(n_test));
  const EvalReport rep = evaluate(pred, task.targets.bottomRows(n_test));
  const double secs = seconds_since(t0);
  o.detail << "epochs " << r.history.size() << " (best " << r.best_epoch << "), held-out median per-patient rho "
           << rep.median_patient_rho << ", per-gene rho " << rep.median_gene_rho << ", " << secs << " s. ";
  o.expect(rep.median_patient_rho >= 0.95, "per-patient rho >= 0.95");
  o.expect(rep.median_gene_rho >= 0.9, "per-gene rho >= 0.9");
  o.expect(secs < 300.0, "runtime < 5 min");
}

void aggregation_oracle(Outcome& o) {
  std::mt19937_64 rng(31);
  std::normal_distribution<float> nd(0.0f, 3.0f);
  double worst_oracle = 0.0, worst_invariance = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    PatchFeatureSet p;
    p.patient_id = "P" + std::to_string(trial);
    p.n_patches = 1 + static_cast<std::uint32_t>(rng() % 400);
    p.n_features = 1 + static_cast<std::uint32_t>(rng() % 300);
    p.values.resize(static_cast<std::size_t>(p.n_patches) * p.n_features);
    for (auto& v : p.values) v = nd(rng) * (trial % 5 == 0 ? 1e4f : 1.0f);
    std::vector<std::vector<double>> rows(p.n_patches);
    for (std::uint32_t i = 0; i < p.n_patches; ++i) {
      const auto r = p.row(i);
      rows[i].assign(r.begin(), r.end());
    }
    const auto z = aggregate(p).z;
    const auto want = oracle::pairwise_mean(rows);
    for (std::size_t f = 0; f < z.size(); ++f)
      worst_oracle = std::max(worst_oracle, std::abs(z[f] - want[f]) / std::max(1.0, std::abs(want[f])));

    PatchFeatureSet shuffled = p, doubled = p;
    std::vector<std::uint32_t> perm(p.n_patches);
    std::iota(perm.begin(), perm.end(), 0u);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::uint32_t i = 0; i < p.n_patches; ++i)
      std::copy(p.row(perm[i]).begin(), p.row(perm[i]).end(), shuffled.values.begin() + i * p.n_features);
    doubled.n_patches *= 2;
    doubled.values.insert(doubled.values.end(), p.values.begin(), p.values.end());
    const auto zs = aggregate(shuffled).z, zd = aggregate(doubled).z;
    for (std::size_t f = 0; f < z.size(); ++f) {
      const double scale = std::max(1.0, std::abs(z[f]));
      worst_invariance = std::max({worst_invariance, std::abs(zs[f] - z[f]) / scale, std::abs(zd[f] - z[f]) / scale});
    }
  }
  o.detail << "100 instances, worst oracle rel err " << worst_oracle << ", worst invariance err " << worst_invariance
           << ". ";
  o.expect(worst_oracle <= 1e-10, "oracle within 1e-10");
  o.expect(worst_invariance <= 1e-12, "permutation/duplication within 1e-12");
}

void efficiency(Outcome& o) {
  const fs::path out = scratch("benchmark");
  const auto r = cli_support::invoke({"--seed", "3", "--output-dir", out.string(), "benchmark",
                                      "--aggregated-epochs", "3", "--patchwise-epochs", "1"});
  o.expect(r.code == 0, "benchmark exits 0: " + r.err);
  if (r.code != 0) return;
  const json b = json::parse(cli_support::slurp(out / "benchmark_report.json"));
  const double speedup = b["speedup"].get<double>();
  o.detail << "aggregated " << b["aggregated"]["mean_epoch_seconds"].get<double>() << " s/epoch, patch-based "
           << b["patchwise"]["mean_epoch_seconds"].get<double>() << " s/epoch, speedup " << speedup
           << "x, worked example " << b["energy"]["worked_example"]["kwh"].get<double>() << " kWh. ";
  o.expect(b["dataset"]["patients"] == 300 && b["dataset"]["total_patches"] == 30000, "300 x 100 patches");
  o.expect(speedup >= 10.0, "speedup >= 10");
  o.expect(b["energy"]["worked_example"]["kwh"].get<double>() == 10.176, "4 x 8.48 x 300 / 1000 == 10.176");
  o.expect(b["energy"]["watts"] == 300.0, "default 300 W");
}

void statistics_oracles(Outcome& o) {
  std::mt19937_64 rng(41);
  std::uniform_int_distribution<int> level(0, 5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> nd;
  int sp = 0, au = 0, bh = 0, ci = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 3 + rng() % 48;
    std::vector<double> x(n), y(n), p(n), risk(n), neg(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = level(rng);
      y[i] = level(rng);
      p[i] = trial % 3 == 0 ? std::round(u(rng) * 10) / 10 : u(rng);
      risk[i] = trial % 2 == 0 ? std::round(nd(rng)) : nd(rng);
    }
    x[0] = 0, x[1] = 5, y[0] = 0, y[1] = 5;
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(rng() % 2);
    labels[0] = 0;
    labels[1] = 1;
    SurvivalData d;
    for (std::size_t i = 0; i < n; ++i) {
      d.time.push_back(static_cast<double>(1 + rng() % 12));
      d.event.push_back(rng() % 4 != 0);
    }
    d.time[0] = 0.5;
    d.event[0] = true;

    sp += std::abs(spearman(x, y).rho - oracle::spearman(x, y)) <= 1e-12;
    au += auroc(x, labels) == oracle::auroc(x, labels);
    bh += bh_fdr(p) == oracle::bh(p);
    ci += c_index(risk, d) == oracle::c_index(risk, d.time, d.event);
  }
  o.detail << "agreement over 200 instances: spearman " << sp << ", auroc " << au << ", bh " << bh << ", c-index "
           << ci << "; ";
  o.expect(sp == 200 && au == 200 && bh == 200 && ci == 200, "all oracle matches");

  double worst_t = 0.0, worst_f = 0.0;
  for (int k = 0; k < 10; ++k) {
    std::vector<double> a(14 + k), b(18 + 2 * k);
    for (auto& v : a) v = nd(rng);
    for (auto& v : b) v = nd(rng) + 0.08 * k;
    std::vector<double> pooled = a;
    pooled.insert(pooled.end(), b.begin(), b.end());
    worst_t = std::max(worst_t, std::abs(welch_t(a, b).p_value -
                                         oracle::permutation_p(pooled, a.size(), oracle::welch_abs_t, 10000, 500 + k)));
    std::vector<std::vector<double>> groups(3);
    std::vector<std::size_t> sizes;
    std::vector<double> all;
    for (std::size_t g = 0; g < 3; ++g) {
      groups[g].resize(10 + 3 * g + static_cast<std::size_t>(k));
      for (auto& v : groups[g]) v = nd(rng) + 0.06 * k * static_cast<double>(g);
      sizes.push_back(groups[g].size());
      all.insert(all.end(), groups[g].begin(), groups[g].end());
    }
    worst_f = std::max(worst_f, std::abs(anova_oneway(groups).p_value -
                                         oracle::anova_permutation_p(all, sizes, 10000, 600 + k)));
  }
  o.detail << "permutation gap welch " << worst_t << ", anova " << worst_f << ". ";
  o.expect(worst_t <= 0.02 && worst_f <= 0.02, "p-values within 0.02 of 10k permutations");
}

void cox_recovery(Outcome& o) {
  std::mt19937_64 rng(19);
  Eigen::MatrixXd x(1000, 1);
  for (Eigen::Index i = 0; i < 1000; ++i) x(i, 0) = static_cast<double>(rng() % 2);
  Eigen::VectorXd truth(1);
  truth << 0.7;
  const auto d = simulate_exponential_survival(x, truth, 0.1, 0.2, 99);
  const auto censored = std::count(d.event.begin(), d.event.end(), false);
  const auto fit = cox_fit(d, x, {"group"});
  const auto xs = std::span<const double>(x.data(), 1000);
  double best_b = 0.0, best_ll = -INFINITY;
  for (int k = -2000; k <= 2000; ++k) {
    const double b = 0.5 + k * 1e-4;  // covers [0.3, 0.9]
    const double ll = oracle::efron_loglik_1d(d.time, d.event, xs, b);
    if (ll > best_ll) {
      best_ll = ll;
      best_b = b;
    }
  }
  int covered = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const auto dr = simulate_exponential_survival(x, truth, 0.1, 0.2, 1000 + rep);
    const auto f = cox_fit(dr, x);
    covered += f.ci_low[0] < std::exp(0.7) && std::exp(0.7) < f.ci_high[0];
  }
  o.detail << "beta " << fit.beta[0] << " (censored " << censored << "/1000), grid optimum " << best_b
           << ", CI coverage " << covered << "/100. ";
  o.expect(std::abs(fit.beta[0] - 0.7) <= 0.15, "beta within 0.15");
  o.expect(std::abs(best_b - fit.beta[0]) <= 1e-4, "grid search agrees to 1e-4");
  o.expect(covered >= 90, "coverage >= 90/100");
}

void survival_invariants(Outcome& o) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.1, 50.0);
  std::normal_distribution<double> nd;
  bool monotone = true, order_invariant = true, antisymmetric = true;
  double min_logrank_p = 1.0;
  for (int trial = 0; trial < 100; ++trial) {
    SurvivalData d;
    const std::size_t n = 5 + rng() % 60;
    for (std::size_t i = 0; i < n; ++i) {
      d.time.push_back(trial % 2 ? u(rng) : static_cast<double>(1 + rng() % 12));
      d.event.push_back(rng() % 4 != 0);
    }
    d.event[0] = true;
    const auto km = kaplan_meier(d);
    for (std::size_t k = 0; k < km.survival_prob.size(); ++k)
      monotone = monotone && km.survival_prob[k] <= (k ? km.survival_prob[k - 1] : 1.0) && km.survival_prob[k] >= 0;
    SurvivalData rev;
    rev.time.assign(d.time.rbegin(), d.time.rend());
    rev.event.assign(d.event.rbegin(), d.event.rend());
    const auto km2 = kaplan_meier(rev);
    order_invariant = order_invariant && km2.event_times == km.event_times && km2.survival_prob == km.survival_prob;

    min_logrank_p = std::min(min_logrank_p, logrank(d, d).p_value);

    if (trial % 2) {  // continuous times: tie-free
      std::vector<double> r(n), neg(n);
      for (std::size_t i = 0; i < n; ++i) {
        r[i] = nd(rng);
        neg[i] = -r[i];
      }
      try {
        antisymmetric = antisymmetric && std::abs(c_index(r, d) + c_index(neg, d) - 1.0) <= 1e-12;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NoComparablePairs) throw;
      }
    }
  }
  o.detail << "KM non-increasing " << monotone << ", order-invariant " << order_invariant
           << ", min log-rank p on identical groups " << min_logrank_p << ", c-index antisymmetry " << antisymmetric
           << ". ";
  o.expect(monotone && order_invariant, "KM invariants");
  o.expect(min_logrank_p >= 0.99, "identical groups p >= 0.99");
  o.expect(antisymmetric, "c(r) + c(-r) = 1");
}

void macenko_recovery(Outcome& o) {
  const auto ref = default_reference_profile();
  std::mt19937_64 rng(47);
  std::uniform_real_distribution<double> jitter(-0.1, 0.1);
  double worst = 0.0;
  int self_diff = 0;
  for (int m = 0; m < 20; ++m) {
    Eigen::Vector3d h = ref.stain_vectors.col(0), e = ref.stain_vectors.col(1);
    for (int k = 0; k < 3; ++k) {
      h[k] = std::max(0.02, h[k] + jitter(rng));
      e[k] = std::max(0.02, e[k] + jitter(rng));
    }
    h.normalize();
    e.normalize();
    const auto img = support::stained_image(h, e, 100, 80, 300 + static_cast<std::uint64_t>(m));
    const auto est = estimate_stains(rgb_to_od(img));
    worst = std::max({worst, support::angle_deg(est.stain_vectors.col(0), h),
                      support::angle_deg(est.stain_vectors.col(1), e)});
    const auto self = normalize_to_reference(img, est, est);
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
      self_diff = std::max(self_diff, std::abs(int(self.pixels[i]) - int(img.pixels[i])));
  }
  o.detail << "20 mixtures, worst angle " << worst << " deg, self-normalisation max diff " << self_diff << ". ";
  o.expect(worst < 2.0, "within 2 degrees");
  o.expect(self_diff <= 2, "identity within 2 levels");
}

void subtype_pipeline(Outcome& o) {
  std::vector<std::string> genes;
  for (int g = 0; g < 50; ++g) genes.push_back("G" + std::to_string(g));
  const auto train_b = make_blobs(50, 50, 0.5, 4.0, 13);
  const auto test_b = make_blobs(50, 50, 0.5, 4.0, 14);
  std::vector<Subtype> y;
  for (int l : train_b.labels) y.push_back(static_cast<Subtype>(l));
  const auto model = fit_centroids(train_b.x, y, genes);
  int agree = 0;
  for (Eigen::Index i = 0; i < test_b.x.rows(); ++i) {
    const Eigen::VectorXd row = test_b.x.row(i).transpose();
    agree += static_cast<int>(call_subtype(model, std::span<const double>(row.data(), 50)).subtype) ==
             test_b.labels[static_cast<std::size_t>(i)];
  }
  const double agreement = agree / 200.0;

  const auto sep = make_blobs(40, 8, 0.5, 4.0, 5);
  VotingConfig vc;
  vc.seed = 5;
  const auto vm = fit_voting(sep.x, sep.labels, vc);
  const auto vp = predict_voting(vm, sep.x);
  int right = 0;
  for (std::size_t i = 0; i < vp.labels.size(); ++i) right += vp.labels[i] == sep.labels[i];
  const double train_acc = right / static_cast<double>(vp.labels.size());

  // 12 samples. Confusion [true][pred]:
  //   LumA:  3 1 0 0   LumB: 1 2 0 0   Basal: 0 0 2 1   HER2: 0 0 1 1
  // F1 = 2TP / (2TP + FP + FN): 6/8, 4/6, 4/6, 2/4.
  const std::vector<int> truth = {0, 0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3};
  const std::vector<int> pred = {0, 0, 0, 1, 0, 1, 1, 2, 2, 3, 2, 3};
  Eigen::MatrixXd proba = Eigen::MatrixXd::Constant(12, 4, 0.1);
  for (int i = 0; i < 12; ++i) proba(i, pred[static_cast<std::size_t>(i)]) = 0.7;
  const auto rep = classification_report(pred, truth, proba);
  const std::array<double, 4> f1 = {6.0 / 8.0, 4.0 / 6.0, 4.0 / 6.0, 2.0 / 4.0};
  bool f1_ok = std::abs(rep.accuracy - 8.0 / 12.0) < 1e-12;
  for (int c = 0; c < 4; ++c) f1_ok = f1_ok && std::abs(rep.f1[static_cast<std::size_t>(c)] - f1[static_cast<std::size_t>(c)]) < 1e-12;
  f1_ok = f1_ok && std::abs(rep.macro_f1 - (f1[0] + f1[1] + f1[2] + f1[3]) / 4.0) < 1e-12;

  o.detail << "centroid agreement " << agreement << ", voting training accuracy " << train_acc
           << ", 12-sample report matches hand F1 " << f1_ok << ". ";
  o.expect(agreement >= 0.95, "centroid agreement >= 0.95");
  o.expect(train_acc >= 0.98, "voting accuracy >= 0.98");
  o.expect(f1_ok, "hand-computed F1");
}

void cli_determinism(Outcome& o) {
  const fs::path root = scratch("determinism");
  // Inputs for every subcommand.
  fs::create_directories(root / "images");
  const auto ref = default_reference_profile();
  write_ppm(support::stained_image(ref.stain_vectors.col(0), ref.stain_vectors.col(1), 460, 240, 1),
            root / "images/A.ppm");
  write_png(support::stained_image(ref.stain_vectors.col(0), ref.stain_vectors.col(1), 240, 460, 2),
            root / "images/B.png");

  LinearTaskSpec spec;
  spec.patients = 60;
  spec.patches = 6;
  spec.features = 16;
  spec.genes = 4;
  spec.seed = 8;
  const LinearTask task = make_linear_task(spec);
  fs::create_directories(root / "h2rf");
  for (const auto& set : task.patch_sets) write_features(set, root / "h2rf" / (set.patient_id + ".h2rf"));
  save_slide_features(task.slides, root / "slides.csv");
  save_expression(task.raw_expression(), task.panel, root / "expr.csv");
  save_panel(task.panel, root / "panel.json");

  const auto blobs = make_blobs(15, 8, 0.5, 4.0, 2);
  GenePanel pam;
  ExpressionMatrix bx;
  std::vector<SlideFeature> bslides;
  std::string labels = "patient_id,subtype\n";
  for (int g = 0; g < 8; ++g) {
    pam.genes.push_back("PG" + std::to_string(g));
    pam.assay_tags.push_back({"PAM50"});
    pam.pam50_flags.push_back(true);
  }
  for (Eigen::Index i = 0; i < blobs.x.rows(); ++i) {
    const std::string id = "B" + std::to_string(i);
    bx.patient_ids.push_back(id);
    bslides.push_back({id, std::vector<double>(blobs.x.cols())});
    for (Eigen::Index k = 0; k < blobs.x.cols(); ++k) bslides.back().z[static_cast<std::size_t>(k)] = blobs.x(i, k);
    labels += id + "," + std::string(to_string(static_cast<Subtype>(blobs.labels[static_cast<std::size_t>(i)]))) + "\n";
  }
  bx.values = blobs.x;
  save_panel(pam, root / "pam.json");
  save_expression(bx, pam, root / "blob_expr.csv");
  save_slide_features(bslides, root / "blob_slides.csv");
  cli_support::spit(root / "labels.csv", labels);

  const auto cohort = make_clinical_cohort(300, 4);
  save_clinical(cohort.records, root / "clinical.csv");
  std::string sub = "patient_id,subtype\n";
  for (std::size_t i = 0; i < cohort.records.size(); ++i)
    sub += cohort.records[i].patient_id + "," + std::string(to_string(cohort.subtypes[i])) + "\n";
  cli_support::spit(root / "subtypes.csv", sub);

  const auto model = root / "model/model.h2rm";
  const auto s = [&](const char* name) { return (root / name).string(); };
  const std::vector<std::string> head = {"--c1", "8", "--c2", "8", "--c3", "8", "--lr", "1e-2", "--max-epochs", "10"};
  std::vector<std::string> train_args = {"train", "--features", s("slides.csv"), "--expression", s("expr.csv"),
                                         "--panel", s("panel.json")};
  train_args.insert(train_args.end(), head.begin(), head.end());
  auto with_out = [](std::vector<std::string> a, const fs::path& out) {
    a.insert(a.begin(), {"--seed", "11", "--output-dir", out.string()});
    return a;
  };
  if (cli_support::invoke(with_out(train_args, root / "model")).code != 0) {
    o.expect(false, "model for predict/evaluate");
    return;
  }

  const std::vector<std::pair<std::string, std::vector<std::string>>> commands = {
      {"preprocess", {"preprocess", "--images", s("images")}},
      {"aggregate", {"aggregate", "--features", s("h2rf")}},
      {"train", train_args},
      {"predict", {"predict", "--model", model.string(), "--features", s("slides.csv"), "--panel", s("panel.json")}},
      {"evaluate",
       {"evaluate", "--model", model.string(), "--features", s("slides.csv"), "--expression", s("expr.csv"),
        "--panel", s("panel.json")}},
      {"subtype",
       {"subtype", "--panel", s("pam.json"), "--expression", s("blob_expr.csv"), "--log-scale", "--labels",
        s("labels.csv"), "--features", s("blob_slides.csv"), "--rf-trees", "20", "--mlp-epochs", "30"}},
      {"survival", {"survival", "--clinical", s("clinical.csv"), "--subtypes", s("subtypes.csv")}},
      {"benchmark",
       {"benchmark", "--patients", "30", "--patches", "4", "--feature-width", "8", "--genes", "2", "--c1", "4",
        "--c2", "4", "--c3", "4"}},
  };
  for (const auto& [name, args] : commands) {
    std::map<std::string, std::string> snaps[2];
    bool ran = true;
    for (int k = 0; k < 2; ++k) {
      const fs::path out = root / (name + std::to_string(k));
      const auto r = cli_support::invoke(with_out(args, out));
      ran = ran && r.code == 0;
      if (r.code != 0) o.detail << name << " exited " << r.code << ": " << r.err;
      snaps[k] = cli_support::snapshot(out);
    }
    const bool same = ran && !snaps[0].empty() && snaps[0] == snaps[1];
    o.detail << name << (same ? " identical (" : " DIFFERS (") << snaps[0].size() << " files); ";
    o.expect(same, name + " byte-identical");
  }
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria = {
      {"gradient-correctness", gradient_correctness},
      {"synthetic-end-to-end", synthetic_end_to_end},
      {"aggregation-oracle", aggregation_oracle},
      {"efficiency", efficiency},
      {"statistics-oracles", statistics_oracles},
      {"cox-recovery", cox_recovery},
      {"survival-invariants", survival_invariants},
      {"macenko-recovery", macenko_recovery},
      {"subtype-pipeline", subtype_pipeline},
      {"determinism", cli_determinism},
  };
  const std::vector<std::string> only(argv + 1, argv + argc);
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
    Outcome o;
    try {
      fn(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    failures += !o.pass;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.str().c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
