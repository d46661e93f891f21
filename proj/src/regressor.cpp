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

#include "histoexpr/regressor.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "csv.hpp"
#include "histoexpr/error.hpp"

namespace histoexpr {

namespace {

constexpr Eigen::Index kPredictChunk = 64;

struct Offsets {
  std::size_t w1, b1, w2, b2, w3, b3, w4, b4, total;
};

Offsets offsets(const HeadShape& s, std::uint32_t g) {
  Offsets o{};
  std::size_t at = 0;
  o.w1 = at; at += std::size_t{s.c1} * s.kernel;
  o.b1 = at; at += s.c1;
  o.w2 = at; at += std::size_t{s.c2} * s.c1;
  o.b2 = at; at += s.c2;
  o.w3 = at; at += std::size_t{s.c3} * s.c2;
  o.b3 = at; at += s.c3;
  o.w4 = at; at += std::size_t{g} * s.c3;
  o.b4 = at; at += g;
  o.total = at;
  return o;
}

template <bool Const, typename Ptr>
ParamViews<Const> make_views(Ptr base, const HeadShape& s, std::uint32_t g) {
  const Offsets o = offsets(s, g);
  using Mat = typename ParamViews<Const>::Mat;
  using Vec = typename ParamViews<Const>::Vec;
  return ParamViews<Const>{
      Mat(base + o.w1, s.c1, s.kernel), Mat(base + o.w2, s.c2, s.c1),
      Mat(base + o.w3, s.c3, s.c2),     Mat(base + o.w4, g, s.c3),
      Vec(base + o.b1, s.c1),           Vec(base + o.b2, s.c2),
      Vec(base + o.b3, s.c3),           Vec(base + o.b4, g)};
}

void activate(const HeadShape& s, const RowMatrix& pre, RowMatrix& post) {
  if (s.activation == Activation::Relu) post = pre.cwiseMax(0.0);
  else post = pre;
}

// Zeroes gradient entries where the ReLU was inactive.
void mask_inactive(const HeadShape& s, const RowMatrix& pre, RowMatrix& grad) {
  if (s.activation != Activation::Relu) return;
  grad = (pre.array() > 0.0).select(grad, 0.0);
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

}  // namespace

RegressorModel::RegressorModel(HeadShape shape, std::uint32_t n_features, std::uint32_t n_genes)
    : shape_(shape),
      n_features_(n_features),
      n_genes_(n_genes),
      params_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(param_count(shape, n_genes)))) {
  if (shape.kernel == 0 || shape.kernel % 2 == 0)
    throw Error(ErrorCode::InvalidConfig, "kernel length must be odd");
  if (n_genes == 0) throw Error(ErrorCode::InvalidConfig, "no output genes");
  if (n_features < shape.kernel)
    throw Error(ErrorCode::FeatureTooShort,
                "F = " + std::to_string(n_features) + " < kernel " + std::to_string(shape.kernel));
}

std::size_t RegressorModel::param_count(const HeadShape& shape, std::uint32_t n_genes) {
  return offsets(shape, n_genes).total;
}

ParamViews<false> RegressorModel::views() {
  return make_views<false>(params_.data(), shape_, n_genes_);
}

ParamViews<true> RegressorModel::views() const {
  return make_views<true>(params_.data(), shape_, n_genes_);
}

void RegressorModel::init_he_uniform(std::mt19937_64& rng) {
  auto v = views();
  auto fill = [&rng](auto& w, double fan_in) {
    std::uniform_real_distribution<double> u(-std::sqrt(6.0 / fan_in), std::sqrt(6.0 / fan_in));
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = u(rng);
  };
  fill(v.w1, shape_.kernel);
  fill(v.w2, shape_.c1);
  fill(v.w3, shape_.c2);
  fill(v.w4, shape_.c3);
  v.b1.setZero();
  v.b2.setZero();
  v.b3.setZero();
  v.b4.setZero();
}

RowMatrix forward(const RegressorModel& model, const Eigen::Ref<const RowMatrix>& z,
                  ForwardCache* cache) {
  const HeadShape& s = model.shape();
  const Eigen::Index f = z.cols();
  if (f < static_cast<Eigen::Index>(s.kernel))
    throw Error(ErrorCode::FeatureTooShort, "F = " + std::to_string(f));
  if (f != static_cast<Eigen::Index>(model.n_features()))
    throw Error(ErrorCode::ShapeMismatch, "input width " + std::to_string(f) +
                                              " != model F " + std::to_string(model.n_features()));

  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  const Eigen::Index batch = z.rows();
  const Eigen::Index k = s.kernel;
  const Eigen::Index half = k / 2;
  const auto w = model.views();

  c.batch = batch;
  c.x1.setZero(batch * f, k);
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (Eigen::Index p = 0; p < f; ++p) {
      for (Eigen::Index t = 0; t < k; ++t) {
        const Eigen::Index src = p + t - half;
        if (src >= 0 && src < f) c.x1(b * f + p, t) = z(b, src);
      }
    }
  }

  c.a1.noalias() = c.x1 * w.w1.transpose();
  c.a1.rowwise() += w.b1.transpose();
  activate(s, c.a1, c.h1);
  c.a2.noalias() = c.h1 * w.w2.transpose();
  c.a2.rowwise() += w.b2.transpose();
  activate(s, c.a2, c.h2);
  c.a3.noalias() = c.h2 * w.w3.transpose();
  c.a3.rowwise() += w.b3.transpose();
  activate(s, c.a3, c.h3);

  c.pooled.resize(batch, s.c3);
  const double inv_f = 1.0 / static_cast<double>(f);
  for (Eigen::Index b = 0; b < batch; ++b)
    c.pooled.row(b) = c.h3.middleRows(b * f, f).colwise().sum() * inv_f;

  c.pred.noalias() = c.pooled * w.w4.transpose();
  c.pred.rowwise() += w.b4.transpose();
  return c.pred;
}

Eigen::VectorXd forward(const RegressorModel& model, std::span<const double> z) {
  RowMatrix row(1, static_cast<Eigen::Index>(z.size()));
  for (std::size_t i = 0; i < z.size(); ++i) row(0, static_cast<Eigen::Index>(i)) = z[i];
  return forward(model, row).row(0).transpose();
}

double loss(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size())
    throw Error(ErrorCode::LengthMismatch, std::to_string(pred.size()) + " vs " +
                                               std::to_string(target.size()));
  if (pred.empty()) throw Error(ErrorCode::LengthMismatch, "empty vectors");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    acc += d * d;
  }
  return acc / static_cast<double>(pred.size());
}

double batch_loss(const Eigen::Ref<const RowMatrix>& pred, const Eigen::Ref<const RowMatrix>& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw Error(ErrorCode::LengthMismatch, "prediction and target shapes differ");
  return (pred - target).squaredNorm() / static_cast<double>(pred.size());
}

Eigen::VectorXd backward_from_cache(const RegressorModel& model, const ForwardCache& c,
                                    const Eigen::Ref<const RowMatrix>& target) {
  const HeadShape& s = model.shape();
  if (target.rows() != c.batch || target.cols() != static_cast<Eigen::Index>(model.n_genes()))
    throw Error(ErrorCode::LengthMismatch, "target shape does not match the forward batch");
  const Eigen::Index batch = c.batch;
  const Eigen::Index f = static_cast<Eigen::Index>(model.n_features());
  const auto w = model.views();

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(model.params().size());
  auto g = make_views<false>(grad.data(), s, model.n_genes());

  const RowMatrix dpred = (c.pred - target) * (2.0 / static_cast<double>(c.pred.size()));
  g.w4.noalias() = dpred.transpose() * c.pooled;
  g.b4 = dpred.colwise().sum().transpose();

  const RowMatrix dpooled = dpred * w.w4;
  RowMatrix da3(batch * f, s.c3);
  const double inv_f = 1.0 / static_cast<double>(f);
  for (Eigen::Index b = 0; b < batch; ++b)
    da3.middleRows(b * f, f).rowwise() = dpooled.row(b) * inv_f;
  mask_inactive(s, c.a3, da3);
  g.w3.noalias() = da3.transpose() * c.h2;
  g.b3 = da3.colwise().sum().transpose();

  RowMatrix da2 = da3 * w.w3;
  mask_inactive(s, c.a2, da2);
  g.w2.noalias() = da2.transpose() * c.h1;
  g.b2 = da2.colwise().sum().transpose();

  RowMatrix da1 = da2 * w.w2;
  mask_inactive(s, c.a1, da1);
  g.w1.noalias() = da1.transpose() * c.x1;
  g.b1 = da1.colwise().sum().transpose();
  return grad;
}

Eigen::VectorXd backward(const RegressorModel& model, const Eigen::Ref<const RowMatrix>& z,
                         const Eigen::Ref<const RowMatrix>& target, double* loss_out) {
  ForwardCache cache;
  forward(model, z, &cache);
  if (loss_out) *loss_out = batch_loss(cache.pred, target);
  return backward_from_cache(model, cache, target);
}

void AdamState::apply(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double learning_rate) {
  if (m.size() != params.size()) {
    m = Eigen::VectorXd::Zero(params.size());
    v = Eigen::VectorXd::Zero(params.size());
  }
  ++step;
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  params.array() -= learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + epsilon);
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::InvalidConfig, "learning_rate must be > 0");
  if (batch_size == 0) throw Error(ErrorCode::InvalidConfig, "batch_size must be > 0");
  if (patience == 0) throw Error(ErrorCode::InvalidConfig, "patience must be > 0");
  if (max_epochs == 0) throw Error(ErrorCode::InvalidConfig, "max_epochs must be > 0");
  if (!(validation_fraction > 0.0 && validation_fraction <= 0.5))
    throw Error(ErrorCode::InvalidConfig, "validation_fraction must lie in (0, 0.5]");
}

bool EarlyStopping::update(double monitored) {
  ++epochs_;
  last_improved_ = epochs_ == 1 || monitored < best_;
  if (last_improved_) {
    best_ = monitored;
    best_epoch_ = epochs_;
    since_best_ = 0;
  } else {
    ++since_best_;
  }
  return since_best_ >= patience_;
}

RowMatrix predict(const RegressorModel& model, const Eigen::MatrixXd& x) {
  RowMatrix out(x.rows(), model.n_genes());
  for (Eigen::Index start = 0; start < x.rows(); start += kPredictChunk) {
    const Eigen::Index n = std::min(kPredictChunk, x.rows() - start);
    const RowMatrix chunk = x.middleRows(start, n);
    out.middleRows(start, n) = forward(model, chunk);
  }
  return out;
}

RowMatrix predict_patch_mean(const RegressorModel& model, const std::vector<RowMatrix>& patches) {
  RowMatrix out(static_cast<Eigen::Index>(patches.size()), model.n_genes());
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const RowMatrix& p = patches[i];
    if (p.rows() == 0) throw Error(ErrorCode::EmptyFeatureSet, "patient " + std::to_string(i));
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(model.n_genes());
    for (Eigen::Index start = 0; start < p.rows(); start += kPredictChunk) {
      const Eigen::Index n = std::min(kPredictChunk, p.rows() - start);
      acc += forward(model, p.middleRows(start, n)).colwise().sum();
    }
    out.row(static_cast<Eigen::Index>(i)) = acc / static_cast<double>(p.rows());
  }
  return out;
}

namespace {

struct Split {
  std::vector<std::size_t> train, val;
};

Split split_rows(std::size_t n, const TrainConfig& config, std::mt19937_64& rng) {
  auto idx = shuffled_indices(n, rng);
  auto n_val = static_cast<std::size_t>(std::llround(config.validation_fraction * static_cast<double>(n)));
  n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
  Split s;
  s.val.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
  s.train.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

// Output bias starts at the mean training target so early epochs fit the
// per-patient variation rather than the per-gene offset.
void init_output_bias(RegressorModel& model, const Eigen::MatrixXd& y,
                      const std::vector<std::size_t>& rows) {
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(y.cols());
  for (std::size_t r : rows) mean += y.row(static_cast<Eigen::Index>(r)).transpose();
  model.views().b4 = mean / static_cast<double>(rows.size());
}

// Drives the shared epoch loop. `run_epoch` performs one pass of minibatch
// updates and returns (mean train loss, samples seen); `validate` returns
// the validation MSE for the current parameters.
template <typename RunEpoch, typename Validate>
TrainResult fit_loop(RegressorModel model, const TrainConfig& config, RunEpoch run_epoch,
                     Validate validate) {
  TrainResult result;
  EarlyStopping stopper(config.patience);
  AdamState adam(model.params().size());
  Eigen::VectorXd best_params = model.params();

  for (std::uint32_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const auto [train_mse, samples] = run_epoch(model, adam);
    const double val_mse = validate(model);
    EpochRecord rec{epoch, train_mse, val_mse, seconds_since(start), samples};
    result.history.push_back(rec);
    if (!std::isfinite(val_mse))
      throw Error(ErrorCode::NotConverged, "validation loss diverged at epoch " + std::to_string(epoch));
    const bool stop = stopper.update(val_mse);
    if (stopper.last_improved()) best_params = model.params();
    if (stop) break;
  }
  model.params() = best_params;
  result.model = std::move(model);
  result.best_epoch = stopper.best_epoch();
  result.best_val_mse = stopper.best();
  return result;
}

}  // namespace

TrainResult train(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const TrainConfig& config) {
  config.validate();
  if (x.rows() != y.rows())
    throw Error(ErrorCode::ShapeMismatch, "feature and target row counts differ");
  const auto n = static_cast<std::size_t>(x.rows());
  if (n < 2 * std::size_t{config.batch_size})
    throw Error(ErrorCode::DatasetTooSmall, std::to_string(n) + " rows, need at least " +
                                                std::to_string(2 * config.batch_size));

  std::mt19937_64 rng(config.seed);
  RegressorModel model(config.shape, static_cast<std::uint32_t>(x.cols()),
                       static_cast<std::uint32_t>(y.cols()));
  model.init_he_uniform(rng);
  const Split split = split_rows(n, config, rng);
  init_output_bias(model, y, split.train);

  const RowMatrix xs = x;
  const RowMatrix ys = y;
  RowMatrix val_x(static_cast<Eigen::Index>(split.val.size()), x.cols());
  RowMatrix val_y(static_cast<Eigen::Index>(split.val.size()), y.cols());
  for (std::size_t i = 0; i < split.val.size(); ++i) {
    val_x.row(static_cast<Eigen::Index>(i)) = xs.row(static_cast<Eigen::Index>(split.val[i]));
    val_y.row(static_cast<Eigen::Index>(i)) = ys.row(static_cast<Eigen::Index>(split.val[i]));
  }

  ForwardCache cache;
  RowMatrix bx, by;
  auto run_epoch = [&](RegressorModel& m, AdamState& adam) {
    std::vector<std::size_t> order = split.train;
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t count = std::min<std::size_t>(config.batch_size, order.size() - start);
      bx.resize(static_cast<Eigen::Index>(count), xs.cols());
      by.resize(static_cast<Eigen::Index>(count), ys.cols());
      for (std::size_t i = 0; i < count; ++i) {
        bx.row(static_cast<Eigen::Index>(i)) = xs.row(static_cast<Eigen::Index>(order[start + i]));
        by.row(static_cast<Eigen::Index>(i)) = ys.row(static_cast<Eigen::Index>(order[start + i]));
      }
      forward(m, bx, &cache);
      loss_sum += batch_loss(cache.pred, by) * static_cast<double>(count);
      adam.apply(m.params(), backward_from_cache(m, cache, by), config.learning_rate);
    }
    return std::pair<double, std::size_t>{loss_sum / static_cast<double>(order.size()), order.size()};
  };
  auto validate = [&](const RegressorModel& m) { return batch_loss(predict(m, val_x), val_y); };

  TrainResult result = fit_loop(std::move(model), config, run_epoch, validate);
  result.train_rows = split.train;
  result.val_rows = split.val;
  return result;
}

TrainResult train_patchwise(const PatchDataset& data, const TrainConfig& config) {
  config.validate();
  const std::size_t n = data.patches.size();
  if (static_cast<std::size_t>(data.targets.rows()) != n)
    throw Error(ErrorCode::ShapeMismatch, "patch sets and target rows differ");
  if (n < 2 * std::size_t{config.batch_size})
    throw Error(ErrorCode::DatasetTooSmall, std::to_string(n) + " patients, need at least " +
                                                std::to_string(2 * config.batch_size));
  const Eigen::Index f = data.patches.front().cols();
  for (const auto& p : data.patches) {
    if (p.cols() != f) throw Error(ErrorCode::ShapeMismatch, "patch widths differ across patients");
    if (p.rows() == 0) throw Error(ErrorCode::EmptyFeatureSet, "patient with no patches");
  }

  std::mt19937_64 rng(config.seed);
  RegressorModel model(config.shape, static_cast<std::uint32_t>(f),
                       static_cast<std::uint32_t>(data.targets.cols()));
  model.init_he_uniform(rng);
  const Split split = split_rows(n, config, rng);
  init_output_bias(model, data.targets, split.train);

  // (patient, patch row) pairs of the training patients.
  std::vector<std::pair<std::size_t, Eigen::Index>> samples;
  for (std::size_t p : split.train)
    for (Eigen::Index r = 0; r < data.patches[p].rows(); ++r) samples.emplace_back(p, r);

  std::vector<RowMatrix> val_patches;
  RowMatrix val_y(static_cast<Eigen::Index>(split.val.size()), data.targets.cols());
  for (std::size_t i = 0; i < split.val.size(); ++i) {
    val_patches.push_back(data.patches[split.val[i]]);
    val_y.row(static_cast<Eigen::Index>(i)) = data.targets.row(static_cast<Eigen::Index>(split.val[i]));
  }

  ForwardCache cache;
  RowMatrix bx, by;
  auto run_epoch = [&](RegressorModel& m, AdamState& adam) {
    auto order = shuffled_indices(samples.size(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t count = std::min<std::size_t>(config.batch_size, order.size() - start);
      bx.resize(static_cast<Eigen::Index>(count), f);
      by.resize(static_cast<Eigen::Index>(count), data.targets.cols());
      for (std::size_t i = 0; i < count; ++i) {
        const auto [patient, row] = samples[order[start + i]];
        bx.row(static_cast<Eigen::Index>(i)) = data.patches[patient].row(row);
        by.row(static_cast<Eigen::Index>(i)) = data.targets.row(static_cast<Eigen::Index>(patient));
      }
      forward(m, bx, &cache);
      loss_sum += batch_loss(cache.pred, by) * static_cast<double>(count);
      adam.apply(m.params(), backward_from_cache(m, cache, by), config.learning_rate);
    }
    return std::pair<double, std::size_t>{loss_sum / static_cast<double>(order.size()), order.size()};
  };
  auto validate = [&](const RegressorModel& m) {
    return batch_loss(predict_patch_mean(m, val_patches), val_y);
  };

  TrainResult result = fit_loop(std::move(model), config, run_epoch, validate);
  result.train_rows = split.train;
  result.val_rows = split.val;
  return result;
}

std::vector<std::uint8_t> encode_model(const RegressorModel& model) {
  const HeadShape& s = model.shape();
  std::vector<std::uint8_t> out = {'H', '2', 'R', 'M'};
  put_u32(out, kModelFormatVersion);
  put_u32(out, model.n_features());
  put_u32(out, model.n_genes());
  put_u64(out, model.panel_hash());
  put_u32(out, s.kernel);
  put_u32(out, s.c1);
  put_u32(out, s.c2);
  put_u32(out, s.c3);
  out.push_back(static_cast<std::uint8_t>(s.activation));
  for (Eigen::Index i = 0; i < model.params().size(); ++i)
    put_u64(out, std::bit_cast<std::uint64_t>(model.params()[i]));
  return out;
}

RegressorModel decode_model(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "H2RM", 4) != 0)
    throw Error(ErrorCode::BadMagic, "not an H2RM file");
  std::size_t pos = 4;
  auto need = [&](std::size_t n) {
    if (bytes.size() - pos < n) throw Error(ErrorCode::ShapeMismatch, "truncated model file");
  };
  auto u32 = [&] {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{bytes[pos + i]} << (8 * i);
    pos += 4;
    return v;
  };
  auto u64 = [&] {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{bytes[pos + i]} << (8 * i);
    pos += 8;
    return v;
  };
  const std::uint32_t version = u32();
  if (version != kModelFormatVersion)
    throw Error(ErrorCode::UnsupportedVersion, "H2RM version " + std::to_string(version));
  const std::uint32_t f = u32();
  const std::uint32_t g = u32();
  const std::uint64_t hash = u64();
  HeadShape s;
  s.kernel = u32();
  s.c1 = u32();
  s.c2 = u32();
  s.c3 = u32();
  need(1);
  const std::uint8_t act = bytes[pos++];
  if (act > 1) throw Error(ErrorCode::ShapeMismatch, "unknown activation tag");
  s.activation = static_cast<Activation>(act);

  RegressorModel model(s, f, g);
  model.set_panel_hash(hash);
  const auto count = static_cast<std::size_t>(model.params().size());
  if (bytes.size() - pos != count * 8)
    throw Error(ErrorCode::ShapeMismatch, "parameter block has " + std::to_string(bytes.size() - pos) +
                                              " bytes, expected " + std::to_string(count * 8));
  for (std::size_t i = 0; i < count; ++i) {
    const double v = std::bit_cast<double>(u64());
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, "parameter " + std::to_string(i));
    model.params()[static_cast<Eigen::Index>(i)] = v;
  }
  return model;
}

void save_model(const RegressorModel& model, const std::filesystem::path& path) {
  const auto bytes = encode_model(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

RegressorModel load_model(const std::filesystem::path& path) {
  const std::string raw = detail::read_text(path);
  return decode_model(std::span(reinterpret_cast<const std::uint8_t*>(raw.data()), raw.size()));
}

RegressorModel load_model(const std::filesystem::path& path, const GenePanel& panel) {
  RegressorModel model = load_model(path);
  if (model.panel_hash() != histoexpr::panel_hash(panel) || model.n_genes() != panel.size())
    throw Error(ErrorCode::PanelMismatch, "model was trained on a different gene panel");
  return model;
}

void save_history(const std::vector<EpochRecord>& history, const std::filesystem::path& csv) {
  std::string out = "epoch,train_mse,val_mse,wall_clock_seconds\n";
  for (const auto& r : history) {
    out += std::to_string(r.epoch) + "," + detail::format_double(r.train_mse) + "," +
           detail::format_double(r.val_mse) + "," + detail::format_double(r.wall_clock_seconds) + "\n";
  }
  detail::write_text(csv, out);
}

}  // namespace histoexpr
