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
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace histoexpr {

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major RGB triples

  RgbImage() = default;
  RgbImage(int w, int h, std::uint8_t fill = 255);

  std::uint8_t* at(int row, int col) { return pixels.data() + 3 * (static_cast<std::size_t>(row) * width + col); }
  const std::uint8_t* at(int row, int col) const {
    return pixels.data() + 3 * (static_cast<std::size_t>(row) * width + col);
  }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

/// Binary tissue mask, same geometry as the image it describes.
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> values;  // 0 = background

  bool at(int row, int col) const { return values[static_cast<std::size_t>(row) * width + col] != 0; }
};

/// Optical density per channel: -log10((I + 1) / 256).
double intensity_to_od(std::uint8_t intensity);
std::uint8_t od_to_intensity(double od);

/// One row per pixel, columns R,G,B.
Eigen::MatrixX3d rgb_to_od(const RgbImage& image);
RgbImage od_to_rgb(const Eigen::MatrixX3d& od, int width, int height);

struct StainProfile {
  Eigen::Matrix<double, 3, 2> stain_vectors;  // columns: hematoxylin, eosin
  Eigen::Vector2d max_concentrations;

  /// Throws InvalidConfig on non-unit or parallel columns or negative maxima.
  void validate() const;
};

/// Widely used H&E reference (hematoxylin, eosin and their 99th percentile
/// concentrations).
StainProfile default_reference_profile();

struct MacenkoParams {
  double alpha = 1.0;  // percentile for the angular extremes
  double beta = 0.15;  // OD floor
};

/// Throws InsufficientTissue (< 100 pixels above beta) and DegenerateCloud.
StainProfile estimate_stains(const Eigen::MatrixX3d& od_pixels, const MacenkoParams& params = {});

/// Non-negative concentrations of each pixel under `profile`, 2 x n.
Eigen::Matrix2Xd concentrations(const Eigen::MatrixX3d& od_pixels, const StainProfile& profile);

RgbImage normalize_to_reference(const RgbImage& image, const StainProfile& source, const StainProfile& reference);

std::string stain_profile_to_json(const StainProfile& p);
StainProfile stain_profile_from_json(const std::string& text);
void save_stain_profile(const StainProfile& p, const std::filesystem::path& path);
StainProfile load_stain_profile(const std::filesystem::path& path);

inline constexpr int kPatchSize = 224;

struct PatchOrigin {
  int row = 0;
  int col = 0;
  double tissue_fraction = 0.0;
};

struct PatchGrid {
  int patch_size = kPatchSize;
  double tissue_fraction_threshold = 0.5;
  std::vector<PatchOrigin> origins;  // retained, row-major
  std::size_t total_candidates = 0;
};

struct TileResult {
  PatchGrid grid;
  std::vector<RgbImage> patches;  // aligned with grid.origins
};

/// Background test when no mask is given: luminance >= 220 is background.
bool is_tissue_pixel(const std::uint8_t* rgb);

/// Throws ImageTooSmall; ShapeMismatch when the mask geometry differs.
TileResult tile(const RgbImage& image, const std::optional<Mask>& mask = std::nullopt, double threshold = 0.5);

RgbImage crop(const RgbImage& image, int row, int col, int height, int width);

// Image files. PNG of any common colour type is converted to 8-bit RGB.
RgbImage read_png(const std::filesystem::path& path);
void write_png(const RgbImage& image, const std::filesystem::path& path);
RgbImage read_ppm(const std::filesystem::path& path);
void write_ppm(const RgbImage& image, const std::filesystem::path& path);
/// Dispatches on the file signature.
RgbImage read_image(const std::filesystem::path& path);
/// Any nonzero channel marks tissue.
Mask read_mask(const std::filesystem::path& path);

/// Writes <patient>_<row>_<col>.png per patch plus <patient>_manifest.json; returns
/// the manifest path.
std::filesystem::path write_patches(const TileResult& tiles, const std::string& patient_id,
                                    const std::filesystem::path& dir);

}  // namespace histoexpr
