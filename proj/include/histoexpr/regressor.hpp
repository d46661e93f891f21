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

// Regression head over a slide-level feature vector.
//
// The vector z (length F) is read as a one-channel sequence of length F:
//
//   C1   conv, kernel 5, stride 1, zero same-padding, ReLU   -> F x 256
//   C2   1x1 conv, ReLU                                      -> F x 512
//   C3   1x1 conv, ReLU                                      -> F x 512
//   out  1x1 linear conv                                     -> F x G
//   global average pool over the length axis                 -> G
//
// Because `out` is linear, pooling H3 first and then applying `out` gives
// the same result and is what forward() computes.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

#include "histoexpr/expression.hpp"

namespace histoexpr {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Activation : std::uint8_t { Relu = 0, Identity = 1 };

/// Channel widths of the head. Defaults are the published architecture;
/// smaller widths exist for exhaustive gradient checks.
struct HeadShape {
  std::uint32_t kernel = 5;
  std::uint32_t c1 = 256;
  std::uint32_t c2 = 512;
  std::uint32_t c3 = 512;
  Activation activation = Activation::Relu;

  friend bool operator==(const HeadShape&, const HeadShape&) = default;
};

/// Views into the flat parameter vector. Weight matrices are row-major
/// (out_channels x in_channels*kernel).
template <bool Const>
struct ParamViews {
  using Mat = Eigen::Map<std::conditional_t<Const, const RowMatrix, RowMatrix>>;
  using Vec = Eigen::Map<std::conditional_t<Const, const Eigen::VectorXd, Eigen::VectorXd>>;
  Mat w1, w2, w3, w4;
  Vec b1, b2, b3, b4;
};

class RegressorModel {
 public:
  RegressorModel() = default;
  RegressorModel(HeadShape shape, std::uint32_t n_features, std::uint32_t n_genes);

  const HeadShape& shape() const { return shape_; }
  std::uint32_t n_features() const { return n_features_; }
  std::uint32_t n_genes() const { return n_genes_; }
  std::uint64_t panel_hash() const { return panel_hash_; }
  void set_panel_hash(std::uint64_t h) { panel_hash_ = h; }

  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }

  ParamViews<false> views();
  ParamViews<true> views() const;

  /// He-uniform weights (bound sqrt(6 / fan_in)), zero biases.
  void init_he_uniform(std::mt19937_64& rng);

  static std::size_t param_count(const HeadShape& shape, std::uint32_t n_genes);

  friend bool operator==(const RegressorModel& a, const RegressorModel& b) {
    return a.shape_ == b.shape_ && a.n_features_ == b.n_features_ &&
           a.n_genes_ == b.n_genes_ && a.panel_hash_ == b.panel_hash_ &&
           a.params_.size() == b.params_.size() && a.params_ == b.params_;
  }

 private:
  HeadShape shape_{};
  std::uint32_t n_features_ = 0;
  std::uint32_t n_genes_ = 0;
  std::uint64_t panel_hash_ = 0;
  Eigen::VectorXd params_;
};

/// Intermediate activations of a batched forward pass, reused by backward.
struct ForwardCache {
  Eigen::Index batch = 0;
  RowMatrix x1;  // (B*F) x kernel, im2col of padded inputs
  RowMatrix a1, a2, a3;  // pre-activations
  RowMatrix h1, h2, h3;  // post-activations
  RowMatrix pooled;      // B x c3
  RowMatrix pred;        // B x G
};

/// Batched forward; rows of `z` are samples. Throws FeatureTooShort when
/// F < kernel and ShapeMismatch when width != model F.
RowMatrix forward(const RegressorModel& model, const Eigen::Ref<const RowMatrix>& z,
                  ForwardCache* cache = nullptr);
Eigen::VectorXd forward(const RegressorModel& model, std::span<const double> z);

/// Mean over genes of squared error. Throws LengthMismatch.
double loss(std::span<const double> pred, std::span<const double> target);
/// Mean over all batch entries.
double batch_loss(const Eigen::Ref<const RowMatrix>& pred, const Eigen::Ref<const RowMatrix>& target);

/// Gradient of batch_loss(forward(z), target) with respect to the flat
/// parameter vector. Returns the loss through `loss_out` when non-null.
Eigen::VectorXd backward(const RegressorModel& model, const Eigen::Ref<const RowMatrix>& z,
                         const Eigen::Ref<const RowMatrix>& target, double* loss_out = nullptr);

/// Gradient from an existing cache; `target` rows align with the cache batch.
Eigen::VectorXd backward_from_cache(const RegressorModel& model, const ForwardCache& cache,
                                    const Eigen::Ref<const RowMatrix>& target);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  Eigen::VectorXd m;
  Eigen::VectorXd v;

  explicit AdamState(Eigen::Index n = 0) : m(Eigen::VectorXd::Zero(n)), v(Eigen::VectorXd::Zero(n)) {}

  void apply(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double learning_rate);
};

struct TrainConfig {
  double learning_rate = 1e-3;
  std::uint32_t batch_size = 12;
  std::uint32_t patience = 4;
  std::uint32_t max_epochs = 150;
  std::uint64_t seed = 0;
  double validation_fraction = 0.1;
  HeadShape shape{};

  void validate() const;
};

/// Patience-based stopping on a monitored loss; "improved" means strictly
/// below the best seen so far.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::uint32_t patience) : patience_(patience) {}

  /// Records one epoch. Returns true when training should stop.
  bool update(double monitored);
  bool last_improved() const { return last_improved_; }
  double best() const { return best_; }
  std::uint32_t best_epoch() const { return best_epoch_; }  // 1-based
  std::uint32_t epochs_seen() const { return epochs_; }

 private:
  std::uint32_t patience_;
  std::uint32_t epochs_ = 0;
  std::uint32_t since_best_ = 0;
  std::uint32_t best_epoch_ = 0;
  double best_ = 0.0;
  bool last_improved_ = false;
};

struct EpochRecord {
  std::uint32_t epoch = 0;  // 1-based
  double train_mse = 0.0;
  double val_mse = 0.0;
  double wall_clock_seconds = 0.0;
  std::size_t samples = 0;  // training samples visited this epoch
};

struct TrainResult {
  RegressorModel model;  // best-validation parameters
  std::vector<EpochRecord> history;
  std::uint32_t best_epoch = 0;
  double best_val_mse = 0.0;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> val_rows;
};

/// Training on slide-level features (rows of x) against targets (rows of y).
TrainResult train(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const TrainConfig& config);

/// Per-patient patch matrices sharing that patient's target row.
struct PatchDataset {
  std::vector<RowMatrix> patches;  // patient i: N_i x F
  Eigen::MatrixXd targets;         // patients x G
};

/// Patch-based baseline: every patch is a training sample; patient
/// prediction is the mean of its patch predictions.
TrainResult train_patchwise(const PatchDataset& data, const TrainConfig& config);

/// Mean of per-patch predictions, one row per patient.
RowMatrix predict_patch_mean(const RegressorModel& model, const std::vector<RowMatrix>& patches);

/// Batched predictions for every row of x.
RowMatrix predict(const RegressorModel& model, const Eigen::MatrixXd& x);

// H2RM: "H2RM", u32 version, u32 F, u32 G, u64 panel hash, u32 kernel,
// u32 c1, c2, c3, u8 activation, then params as f64. Little-endian.
inline constexpr std::uint32_t kModelFormatVersion = 1;

std::vector<std::uint8_t> encode_model(const RegressorModel& model);
RegressorModel decode_model(std::span<const std::uint8_t> bytes);
void save_model(const RegressorModel& model, const std::filesystem::path& path);
/// Throws PanelMismatch when the stored hash differs from `panel`.
RegressorModel load_model(const std::filesystem::path& path, const GenePanel& panel);
RegressorModel load_model(const std::filesystem::path& path);

void save_history(const std::vector<EpochRecord>& history, const std::filesystem::path& csv);

}  // namespace histoexpr
