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

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace histoexpr {

/// Fixed class order; every tie-break resolves to the earliest entry.
enum class Subtype : int { LumA = 0, LumB = 1, Basal = 2, HER2 = 3 };
inline constexpr std::size_t kSubtypeCount = 4;
inline constexpr std::array<Subtype, kSubtypeCount> kAllSubtypes = {Subtype::LumA, Subtype::LumB,
                                                                    Subtype::Basal, Subtype::HER2};

std::string_view to_string(Subtype s);
std::optional<Subtype> parse_subtype(std::string_view s);

// ---------------------------------------------------------------------------
// Nearest-centroid caller

struct CentroidModel {
  std::vector<Subtype> subtypes;           // classes with a centroid, fixed order
  std::vector<std::string> gene_order;
  Eigen::VectorXd medians;                 // per-gene centering
  Eigen::MatrixXd centroids;               // subtypes x genes, centered space
};

/// Rows of `expr` are samples over `genes`. Every class in `required` needs
/// at least two samples (MissingSubtype otherwise).
CentroidModel fit_centroids(const Eigen::MatrixXd& expr, std::span<const Subtype> labels,
                            std::vector<std::string> genes,
                            std::span<const Subtype> required = kAllSubtypes);

struct SubtypeCall {
  Subtype subtype = Subtype::LumA;
  std::vector<double> similarity;  // aligned with model.subtypes
};

SubtypeCall call_subtype(const CentroidModel& model, std::span<const double> sample);

std::string centroid_model_to_json(const CentroidModel& model);
CentroidModel centroid_model_from_json(const std::string& text);
void save_centroid_model(const CentroidModel& model, const std::filesystem::path& path);
CentroidModel load_centroid_model(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Soft-voting ensemble

/// Rows are samples; `predict_proba` returns samples x 4 simplices.
class ProbabilisticClassifier {
 public:
  virtual ~ProbabilisticClassifier() = default;
  virtual void fit(const Eigen::MatrixXd& x, std::span<const int> y, std::uint64_t seed) = 0;
  virtual Eigen::MatrixXd predict_proba(const Eigen::MatrixXd& x) const = 0;
  virtual std::string name() const = 0;
};

struct VotingConfig {
  double lr_l2 = 1.0;         // inverse regularization strength C
  int lr_max_iterations = 500;
  int mlp_hidden = 64;
  int mlp_epochs = 200;
  double mlp_learning_rate = 1e-3;
  int mlp_batch_size = 32;
  int rf_trees = 100;
  std::uint64_t seed = 0;
};

std::unique_ptr<ProbabilisticClassifier> make_logistic_regression(const VotingConfig& config);
std::unique_ptr<ProbabilisticClassifier> make_lda();
std::unique_ptr<ProbabilisticClassifier> make_mlp(const VotingConfig& config);

class RandomForest final : public ProbabilisticClassifier {
 public:
  explicit RandomForest(int trees) : n_trees_(trees) {}
  void fit(const Eigen::MatrixXd& x, std::span<const int> y, std::uint64_t seed) override;
  Eigen::MatrixXd predict_proba(const Eigen::MatrixXd& x) const override;
  std::string name() const override { return "random_forest"; }
  /// FNV-1a over every split record (feature, threshold bits, leaf counts).
  std::uint64_t structure_hash() const;

  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1, right = -1;
    std::array<double, kSubtypeCount> proba{};
  };

 private:
  int n_trees_;
  std::vector<std::vector<Node>> trees_;
};

struct VotingModel {
  std::vector<std::unique_ptr<ProbabilisticClassifier>> learners;
};

/// Arithmetic mean of the simplices, summed pairwise.
Eigen::MatrixXd soft_vote(const std::vector<Eigen::MatrixXd>& simplices);

/// Labels are subtype indices 0..3; each class needs >= 5 samples.
VotingModel fit_voting(const Eigen::MatrixXd& features, std::span<const int> labels,
                       const VotingConfig& config = {});

struct VotingPrediction {
  std::vector<int> labels;
  Eigen::MatrixXd proba;  // samples x 4
};

VotingPrediction predict_voting(const VotingModel& model, const Eigen::MatrixXd& features);

/// Row-wise argmax with ties resolved to the lowest class index.
std::vector<int> argmax_rows(const Eigen::MatrixXd& proba);

struct ClassificationReport {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::array<double, kSubtypeCount> f1{};      // NaN for classes absent from both
  std::array<double, kSubtypeCount> auroc{};   // NaN when one-vs-rest is single-class
  std::array<std::array<std::size_t, kSubtypeCount>, kSubtypeCount> confusion{};  // [true][pred]
};

ClassificationReport classification_report(std::span<const int> predicted, std::span<const int> truth,
                                           const Eigen::MatrixXd& proba);

}  // namespace histoexpr
