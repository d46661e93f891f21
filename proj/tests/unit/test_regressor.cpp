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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include "histoexpr/error.hpp"
#include "histoexpr/expression.hpp"
#include "histoexpr/metrics.hpp"
#include "histoexpr/regressor.hpp"
#include "histoexpr/synthetic.hpp"
#include "support.hpp"

using namespace histoexpr;
using namespace support;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::Io;
}

HeadShape small_shape(Activation act = Activation::Relu) {
  HeadShape s;
  s.c1 = 6;
  s.c2 = 8;
  s.c3 = 7;
  s.activation = act;
  return s;
}

}  // namespace

TEST_CASE("parameter layout matches the head description") {
  const HeadShape s;
  CHECK(s.kernel == 5);
  CHECK(s.c1 == 256);
  CHECK(s.c2 == 512);
  CHECK(s.c3 == 512);
  const std::size_t expect = 256 * 5 + 256 + 512 * 256 + 512 + 512 * 512 + 512 + 138 * 512 + 138;
  CHECK(RegressorModel::param_count(s, 138) == expect);
  RegressorModel m(s, 64, 138);
  const auto v = m.views();
  CHECK(v.w1.rows() == 256);
  CHECK(v.w1.cols() == 5);
  CHECK(v.w4.rows() == 138);
  CHECK(v.w4.cols() == 512);
  CHECK(code_of([] { RegressorModel(HeadShape{}, 4, 3); }) == ErrorCode::FeatureTooShort);
}

TEST_CASE("forward examples") {
  RegressorModel zero(HeadShape{}, 16, 4);
  CHECK(forward(zero, random_matrix(3, 16, 1)).cwiseAbs().maxCoeff() == 0.0);

  // Centered tap on filter 0, identity passthrough on channel 0 after that.
  RegressorModel id(HeadShape{}, 5, 3);
  auto v = id.views();
  v.w1(0, 2) = 1.0;
  v.w2(0, 0) = 1.0;
  v.w3(0, 0) = 1.0;
  v.w4(0, 0) = 1.0;
  const std::vector<double> z = {1, 2, 3, 4, 5};
  const auto out = forward(id, z);
  CHECK(out[0] == doctest::Approx(3.0));
  CHECK(out[1] == 0.0);
  const std::vector<double> mixed = {-1, 2, -3, 4, 5};
  CHECK(forward(id, mixed)[0] == doctest::Approx((2.0 + 4.0 + 5.0) / 5.0));

  CHECK(code_of([&] { forward(id, std::vector<double>{1, 2, 3, 4}); }) == ErrorCode::FeatureTooShort);
  CHECK(code_of([&] { forward(id, std::vector<double>(6, 1.0)); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("zero-weight extra output channels do not change the prediction") {
  const auto m = random_model(small_shape(), 12, 3, 4);
  RegressorModel wide(small_shape(), 12, 5);
  auto a = m.views();
  auto b = wide.views();
  b.w1 = a.w1;
  b.b1 = a.b1;
  b.w2 = a.w2;
  b.b2 = a.b2;
  b.w3 = a.w3;
  b.b3 = a.b3;
  b.w4.topRows(3) = a.w4;
  b.b4.head(3) = a.b4;
  const auto z = random_matrix(4, 12, 9);
  const RowMatrix p3 = forward(m, z);
  const RowMatrix p5 = forward(wide, z);
  CHECK(p5.leftCols(3) == p3);
  CHECK(p5.rightCols(2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("loss examples") {
  const std::vector<double> t = {1.5, -2.0, 7.0};
  CHECK(loss(t, t) == 0.0);
  CHECK(loss(std::vector<double>{2.5, -1.0, 8.0}, t) == 1.0);
  CHECK(loss(std::vector<double>{0, 0}, std::vector<double>{3, 4}) == 12.5);
  CHECK(code_of([&] { loss(std::vector<double>{0}, t); }) == ErrorCode::LengthMismatch);
}

TEST_CASE("analytic gradients match central differences on small heads") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto m = random_model(small_shape(), 16, 3, seed);
    const auto z = random_matrix(3, 16, seed + 100);
    const auto t = random_matrix(3, 3, seed + 200);
    std::vector<Eigen::Index> all(static_cast<std::size_t>(m.params().size()));
    std::iota(all.begin(), all.end(), 0);
    const auto r = gradient_check(m, z, t, all);
    INFO("seed " << seed << " worst " << r.worst << " skipped " << r.skipped);
    CHECK(r.failed == 0);
    CHECK(r.checked > all.size() * 9 / 10);
  }
}

TEST_CASE("analytic gradients match central differences on the full head (sampled)") {
  const auto m = random_model(HeadShape{}, 16, 3, 77);
  const auto z = random_matrix(2, 16, 78);
  const auto t = random_matrix(2, 3, 79);
  // Cover every block: a fixed number of draws from each parameter group.
  const auto total = m.params().size();
  const std::size_t blocks[] = {0, 256 * 5, 256 * 6, 256 * 6 + 512 * 256, 256 * 6 + 512 * 257,
                                256 * 6 + 512 * 257 + 512 * 512, 256 * 6 + 512 * 258 + 512 * 512,
                                256 * 6 + 512 * 258 + 512 * 512 + 3 * 512, static_cast<std::size_t>(total)};
  std::mt19937_64 rng(5);
  std::vector<Eigen::Index> which;
  for (int b = 0; b < 8; ++b) {
    std::uniform_int_distribution<std::size_t> pick(blocks[b], blocks[b + 1] - 1);
    for (int k = 0; k < 40; ++k) which.push_back(static_cast<Eigen::Index>(pick(rng)));
  }
  const auto r = gradient_check(m, z, t, which);
  INFO("worst " << r.worst << " skipped " << r.skipped);
  CHECK(r.failed == 0);
  CHECK(r.checked > 250);
}

TEST_CASE("gradient corner cases") {
  auto m = random_model(small_shape(), 10, 2, 3);
  auto v = m.views();
  v.b1.setZero();
  const RowMatrix z = RowMatrix::Zero(2, 10);
  const auto t = random_matrix(2, 2, 4);
  const auto g = backward(m, z, t);
  CHECK(g.head(6 * 5).cwiseAbs().maxCoeff() == 0.0);

  // The gradient is linear in the residual.
  const auto m2 = random_model(small_shape(), 10, 2, 5);
  const auto z2 = random_matrix(3, 10, 6);
  const auto t2 = random_matrix(3, 2, 7);
  const RowMatrix pred = forward(m2, z2);
  const RowMatrix t_double = pred - 2.0 * (pred - t2);
  double l1 = 0.0, l2 = 0.0;
  const auto g1 = backward(m2, z2, t2, &l1);
  const auto g2 = backward(m2, z2, t_double, &l2);
  CHECK(l2 == doctest::Approx(4.0 * l1));
  CHECK((g2 - 2.0 * g1).cwiseAbs().maxCoeff() <= 1e-12 * g1.cwiseAbs().maxCoeff());

  // Repeating a sample in the batch leaves the mean loss and its gradient alone.
  RowMatrix zz(6, 10), tt(6, 2);
  zz << z2, z2;
  tt << t2, t2;
  const auto gdup = backward(m2, zz, tt);
  CHECK((gdup - g1).cwiseAbs().maxCoeff() <= 1e-12 * g1.cwiseAbs().maxCoeff());
}

TEST_CASE("palindromic kernels make the output invariant to reversing the input") {
  auto m = random_model(small_shape(), 11, 4, 8);
  auto v = m.views();
  for (Eigen::Index r = 0; r < v.w1.rows(); ++r) {
    v.w1(r, 3) = v.w1(r, 1);
    v.w1(r, 4) = v.w1(r, 0);
  }
  const auto z = random_matrix(3, 11, 10);
  const RowMatrix rev = z.rowwise().reverse();
  CHECK((forward(m, z) - forward(m, rev)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("Adam") {
  Eigen::VectorXd p = Eigen::VectorXd::LinSpaced(5, -1.0, 1.0);
  const Eigen::VectorXd keep = p;
  AdamState still(5);
  still.apply(p, Eigen::VectorXd::Zero(5), 1e-3);
  CHECK(p == keep);
  CHECK(still.step == 1);

  // The first bias-corrected step has magnitude lr in each coordinate.
  AdamState first(5);
  Eigen::VectorXd g(5);
  g << 3.0, -0.5, 1e-3, -200.0, 0.25;
  first.apply(p, g, 1e-2);
  const Eigen::VectorXd step = keep - p;
  for (Eigen::Index i = 0; i < 5; ++i) CHECK(step[i] == doctest::Approx(1e-2 * (g[i] > 0 ? 1 : -1)).epsilon(1e-6));
}

TEST_CASE("a single repeated sample is fitted to below 1e-6") {
  auto m = random_model(small_shape(), 16, 3, 12);
  const auto z = random_matrix(1, 16, 13);
  const auto t = random_matrix(1, 3, 14);
  AdamState adam(m.params().size());
  double l = 0.0;
  int steps = 0;
  for (; steps < 500; ++steps) {
    const auto g = backward(m, z, t, &l);
    if (l < 1e-6) break;
    adam.apply(m.params(), g, 1e-2);
  }
  INFO("loss " << l << " after " << steps << " steps");
  CHECK(l < 1e-6);
}

TEST_CASE("early stopping arithmetic") {
  EarlyStopping es(4);
  CHECK_FALSE(es.update(1.0));
  CHECK(es.last_improved());
  CHECK_FALSE(es.update(2.0));
  CHECK_FALSE(es.update(1.5));
  CHECK_FALSE(es.update(1.0));  // equal is not an improvement
  CHECK(es.update(3.0));
  CHECK(es.epochs_seen() == 5);
  CHECK(es.best_epoch() == 1);

  EarlyStopping again(2);
  CHECK_FALSE(again.update(5.0));
  CHECK_FALSE(again.update(6.0));
  CHECK_FALSE(again.update(4.0));
  CHECK_FALSE(again.update(4.5));
  CHECK(again.update(4.2));
  CHECK(again.best() == 4.0);
  CHECK(again.best_epoch() == 3);
}

TEST_CASE("training returns the best-validation parameters and is deterministic") {
  LinearTaskSpec spec;
  spec.patients = 80;
  spec.features = 16;
  spec.genes = 4;
  spec.seed = 3;
  const auto task = make_linear_task(spec);
  TrainConfig cfg;
  cfg.shape = small_shape();
  cfg.seed = 11;
  cfg.max_epochs = 30;
  cfg.learning_rate = 5e-3;
  const Eigen::MatrixXd x = task.slide_matrix();
  const auto a = train(x, task.targets, cfg);
  const auto b = train(x, task.targets, cfg);
  CHECK(a.model == b.model);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].train_mse == b.history[i].train_mse);
    CHECK(a.history[i].val_mse == b.history[i].val_mse);
  }

  double best = a.history.front().val_mse;
  for (const auto& r : a.history) best = std::min(best, r.val_mse);
  CHECK(a.best_val_mse == best);
  CHECK(a.history[a.best_epoch - 1].val_mse == best);
  RowMatrix vx(static_cast<Eigen::Index>(a.val_rows.size()), x.cols());
  RowMatrix vy(vx.rows(), task.targets.cols());
  for (std::size_t i = 0; i < a.val_rows.size(); ++i) {
    vx.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(a.val_rows[i]));
    vy.row(static_cast<Eigen::Index>(i)) = task.targets.row(static_cast<Eigen::Index>(a.val_rows[i]));
  }
  CHECK(batch_loss(predict(a.model, vx), vy) == best);

  CHECK(a.val_rows.size() == 8);
  CHECK(a.train_rows.size() == 72);
  CHECK(a.history.front().samples == 72);
  if (a.history.size() < cfg.max_epochs) CHECK(a.history.size() == a.best_epoch + cfg.patience);

  auto other = cfg;
  other.seed = 12;
  CHECK_FALSE(train(x, task.targets, other).model == a.model);
}

TEST_CASE("training fits the synthetic linear task") {
  LinearTaskSpec spec;
  spec.patients = 300;
  spec.features = 64;
  spec.genes = 8;
  spec.seed = 21;
  const auto task = make_linear_task(spec);
  const Eigen::MatrixXd x = task.slide_matrix();
  // Patients are i.i.d., so the last 20% is a fair hold-out.
  const Eigen::Index n_train = 240;
  TrainConfig cfg;
  cfg.shape = small_shape();
  cfg.shape.c1 = 32;
  cfg.shape.c2 = 32;
  cfg.shape.c3 = 32;
  cfg.seed = 1;
  const auto r = train(x.topRows(n_train), task.targets.topRows(n_train), cfg);
  const RowMatrix pred = predict(r.model, x.bottomRows(60));
  const Eigen::MatrixXd truth = task.targets.bottomRows(60);
  const double mse = (pred - truth).squaredNorm() / static_cast<double>(pred.size());
  std::vector<double> per_patient;
  for (Eigen::Index i = 0; i < 60; ++i) {
    std::vector<double> p(pred.row(i).data(), pred.row(i).data() + pred.cols());
    std::vector<double> t(8);
    for (Eigen::Index g = 0; g < 8; ++g) t[static_cast<std::size_t>(g)] = truth(i, g);
    per_patient.push_back(spearman(p, t).rho);
  }
  INFO("mse " << mse << " epochs " << r.history.size());
  CHECK(mse < 0.05);
  CHECK(median(per_patient) >= 0.95);
}

TEST_CASE("training input validation") {
  TrainConfig cfg;
  cfg.shape = small_shape();
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(23, 8);
  const Eigen::MatrixXd y = Eigen::MatrixXd::Random(23, 2);
  CHECK(code_of([&] { train(x, y, cfg); }) == ErrorCode::DatasetTooSmall);
  CHECK(code_of([&] { train(x, y.topRows(20), cfg); }) == ErrorCode::ShapeMismatch);
  cfg.validation_fraction = 0.6;
  CHECK(code_of([&] { train(x, y, cfg); }) == ErrorCode::InvalidConfig);
  cfg.validation_fraction = 0.1;
  cfg.batch_size = 0;
  CHECK(code_of([&] { train(x, y, cfg); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("patch-wise training with one patch per patient matches aggregated training") {
  LinearTaskSpec spec;
  spec.patients = 40;
  spec.patches = 1;
  spec.features = 12;
  spec.genes = 3;
  const auto task = make_linear_task(spec);
  TrainConfig cfg;
  cfg.shape = small_shape();
  cfg.max_epochs = 6;
  cfg.seed = 4;
  const auto agg = train(task.slide_matrix(), task.targets, cfg);
  const auto pw = train_patchwise(task.patch_dataset(), cfg);
  REQUIRE(agg.history.size() == pw.history.size());
  for (std::size_t i = 0; i < agg.history.size(); ++i) {
    CHECK(agg.history[i].train_mse == pw.history[i].train_mse);
    CHECK(agg.history[i].val_mse == doctest::Approx(pw.history[i].val_mse).epsilon(1e-12));
    CHECK(agg.history[i].samples == pw.history[i].samples);
  }
  CHECK((agg.model.params() - pw.model.params()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("patch-wise epochs visit every patch; linear heads commute with the mean") {
  LinearTaskSpec spec;
  spec.patients = 30;
  spec.patches = 7;
  spec.features = 10;
  spec.genes = 2;
  const auto task = make_linear_task(spec);
  TrainConfig cfg;
  cfg.shape = small_shape();
  cfg.max_epochs = 2;
  const auto pw = train_patchwise(task.patch_dataset(), cfg);
  CHECK(pw.history.front().samples == pw.train_rows.size() * 7);

  const auto lin = random_model(small_shape(Activation::Identity), 10, 2, 31);
  const auto data = task.patch_dataset();
  const RowMatrix by_patch = predict_patch_mean(lin, data.patches);
  const RowMatrix by_mean = predict(lin, task.slide_matrix());
  CHECK((by_patch - by_mean).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("model files round-trip and check the panel") {
  const fs::path dir = fs::temp_directory_path() / "histoexpr_model";
  fs::remove_all(dir);
  fs::create_directories(dir);
  GenePanel panel;
  panel.genes = {"A", "B", "C"};
  panel.assay_tags = {{}, {}, {}};
  panel.pam50_flags = {false, false, false};
  auto m = random_model(small_shape(), 9, 3, 40);
  m.set_panel_hash(panel_hash(panel));
  save_model(m, dir / "m.h2rm");
  CHECK(load_model(dir / "m.h2rm", panel) == m);

  auto swapped = panel;
  std::swap(swapped.genes[0], swapped.genes[1]);
  CHECK(code_of([&] { load_model(dir / "m.h2rm", swapped); }) == ErrorCode::PanelMismatch);

  auto bytes = encode_model(m);
  bytes.pop_back();
  CHECK(code_of([&] { decode_model(bytes); }) == ErrorCode::ShapeMismatch);
  bytes.resize(20);
  CHECK(code_of([&] { decode_model(bytes); }) == ErrorCode::ShapeMismatch);
  bytes[0] = 'X';
  CHECK(code_of([&] { decode_model(bytes); }) == ErrorCode::BadMagic);
  CHECK(code_of([&] { load_model(dir / "nope.h2rm"); }) == ErrorCode::Io);
  fs::remove_all(dir);
}
