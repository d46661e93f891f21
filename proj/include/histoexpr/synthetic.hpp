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

// Seeded generators for fixtures, the benchmark and the acceptance suite.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "histoexpr/expression.hpp"
#include "histoexpr/features.hpp"
#include "histoexpr/regressor.hpp"
#include "histoexpr/subtype.hpp"
#include "histoexpr/survival.hpp"

namespace histoexpr {

struct LinearTaskSpec {
  std::size_t patients = 300;
  std::uint32_t patches = 100;
  std::uint32_t features = 64;
  std::uint32_t genes = 8;
  double noise_sigma = 0.01;
  std::uint64_t seed = 1;
};

/// Patients draw a mean feature profile (shared shift + per-feature noise),
/// patches scatter around it, and gene g = b_g + a_g * mean(z) + noise,
/// where z is the patch mean.
struct LinearTask {
  std::vector<PatchFeatureSet> patch_sets;
  std::vector<SlideFeature> slides;  // aggregated from the float patches
  GenePanel panel;                   // SYN_GENE_000 ...
  Eigen::MatrixXd targets;           // patients x genes, log space
  Eigen::VectorXd offsets, slopes;   // b, a

  Eigen::MatrixXd slide_matrix() const;
  PatchDataset patch_dataset() const;
  /// Raw-scale expression (2^t - 1) for the CSV loaders.
  ExpressionMatrix raw_expression() const;
};

LinearTask make_linear_task(const LinearTaskSpec& spec);

struct BlobTask {
  Eigen::MatrixXd x;             // samples x dims
  std::vector<int> labels;       // 0..3
  Eigen::MatrixXd centers;       // 4 x dims
};

/// Four isotropic Gaussian clusters whose centers are mutually `separation`
/// apart along random orthonormal directions (dims >= 4). The centers depend
/// only on dims; seed drives the noise.
BlobTask make_blobs(std::size_t per_class, std::size_t dims, double sigma, double separation, std::uint64_t seed);

/// Exponential survival times with hazard base_rate * exp(x * beta), and
/// independent exponential censoring tuned to the requested fraction.
SurvivalData simulate_exponential_survival(const Eigen::MatrixXd& x, const Eigen::VectorXd& beta, double base_rate,
                                           double censor_fraction, std::uint64_t seed);

struct ClinicalCohort {
  std::vector<ClinicalRecord> records;
  std::vector<Subtype> subtypes;  // LumA or LumB
};

/// Luminal cohort with every clinical field populated.
ClinicalCohort make_clinical_cohort(std::size_t n, std::uint64_t seed);

}  // namespace histoexpr
