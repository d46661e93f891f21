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

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "histoexpr/expression.hpp"

namespace histoexpr {

/// Patch-level features for one patient: N rows of width F, stored as the
/// 32-bit floats the interchange format carries.
struct PatchFeatureSet {
  std::string patient_id;
  std::uint32_t n_patches = 0;
  std::uint32_t n_features = 0;
  std::vector<float> values;  // row-major N x F
  std::string extractor_tag;

  std::span<const float> row(std::size_t i) const {
    return {values.data() + i * n_features, n_features};
  }
  /// Shape and finiteness check; throws ShapeMismatch / NonFiniteValue.
  void validate() const;

  friend bool operator==(const PatchFeatureSet&, const PatchFeatureSet&) = default;
};

struct SlideFeature {
  std::string patient_id;
  std::vector<double> z;
};

/// Mean of the patch rows, accumulated in double in row order.
SlideFeature aggregate(const PatchFeatureSet& p);

// H2RF: "H2RF", u32 version, u32-length-prefixed patient_id and
// extractor_tag, u32 N, u32 F, then N*F float32. All little-endian.
inline constexpr std::uint32_t kFeatureFormatVersion = 1;

std::vector<std::uint8_t> encode_features(const PatchFeatureSet& p);
PatchFeatureSet decode_features(std::span<const std::uint8_t> bytes);
void write_features(const PatchFeatureSet& p, const std::filesystem::path& path);
PatchFeatureSet read_features(const std::filesystem::path& path);

/// Slide features as CSV: `patient_id,f0,f1,...`.
void save_slide_features(const std::vector<SlideFeature>& rows,
                         const std::filesystem::path& path);
std::vector<SlideFeature> load_slide_features(const std::filesystem::path& path);

struct AlignedDataset {
  std::vector<std::string> patient_ids;  // sorted
  Eigen::MatrixXd x;                     // patients x F
  Eigen::MatrixXd y;                     // patients x G
  std::vector<std::string> dropped_features;    // had features, no expression
  std::vector<std::string> dropped_expression;  // had expression, no features
};

/// Inner join on patient_id. Throws EmptyIntersection, ShapeMismatch when
/// slide features disagree on F.
AlignedDataset assemble_dataset(const std::vector<SlideFeature>& features,
                                const ExpressionMatrix& expr);

}  // namespace histoexpr
