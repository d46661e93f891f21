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

#include "histoexpr/imageprep.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "csv.hpp"
#include "histoexpr/error.hpp"

namespace histoexpr {

using json = nlohmann::json;

namespace {

// numpy-style linear interpolation between order statistics.
double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

}  // namespace

RgbImage::RgbImage(int w, int h, std::uint8_t fill)
    : width(w), height(h), pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3, fill) {}

double intensity_to_od(std::uint8_t intensity) { return -std::log10((intensity + 1.0) / 256.0); }

std::uint8_t od_to_intensity(double od) {
  const double v = std::round(256.0 * std::pow(10.0, -od) - 1.0);
  return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
}

Eigen::MatrixX3d rgb_to_od(const RgbImage& image) {
  Eigen::MatrixX3d od(static_cast<Eigen::Index>(image.pixel_count()), 3);
  for (std::size_t i = 0; i < image.pixel_count(); ++i)
    for (int c = 0; c < 3; ++c) od(static_cast<Eigen::Index>(i), c) = intensity_to_od(image.pixels[3 * i + c]);
  return od;
}

RgbImage od_to_rgb(const Eigen::MatrixX3d& od, int width, int height) {
  RgbImage out(width, height);
  if (static_cast<std::size_t>(od.rows()) != out.pixel_count())
    throw Error(ErrorCode::ShapeMismatch, "OD row count differs from width * height");
  for (std::size_t i = 0; i < out.pixel_count(); ++i)
    for (int c = 0; c < 3; ++c) out.pixels[3 * i + c] = od_to_intensity(od(static_cast<Eigen::Index>(i), c));
  return out;
}

void StainProfile::validate() const {
  for (int k = 0; k < 2; ++k) {
    const double norm = stain_vectors.col(k).norm();
    if (!std::isfinite(norm) || std::abs(norm - 1.0) > 1e-6)
      throw Error(ErrorCode::InvalidConfig, "stain vector " + std::to_string(k) + " is not unit length");
    if (!(max_concentrations[k] >= 0.0))
      throw Error(ErrorCode::InvalidConfig, "max concentration must be non-negative");
  }
  if (stain_vectors.col(0).cross(stain_vectors.col(1)).norm() < 1e-6)
    throw Error(ErrorCode::InvalidConfig, "stain vectors are parallel");
}

StainProfile default_reference_profile() {
  StainProfile p;
  p.stain_vectors.col(0) = Eigen::Vector3d(0.5626, 0.7201, 0.4062).normalized();
  p.stain_vectors.col(1) = Eigen::Vector3d(0.2159, 0.8012, 0.5581).normalized();
  p.max_concentrations = Eigen::Vector2d(1.9705, 1.0308);
  return p;
}

StainProfile estimate_stains(const Eigen::MatrixX3d& od_pixels, const MacenkoParams& params) {
  if (!(params.alpha > 0.0 && params.alpha < 50.0)) throw Error(ErrorCode::InvalidConfig, "alpha must lie in (0, 50)");
  std::vector<Eigen::Index> kept;
  for (Eigen::Index i = 0; i < od_pixels.rows(); ++i)
    if (od_pixels.row(i).norm() > params.beta) kept.push_back(i);
  if (kept.size() < 100)
    throw Error(ErrorCode::InsufficientTissue,
                std::to_string(kept.size()) + " pixels above the OD floor, need 100");

  Eigen::MatrixX3d cloud(static_cast<Eigen::Index>(kept.size()), 3);
  for (std::size_t i = 0; i < kept.size(); ++i) cloud.row(static_cast<Eigen::Index>(i)) = od_pixels.row(kept[i]);
  // SVD of the cloud itself: the scatter matrix would square the condition
  // number and hide a rank-1 cloud behind rounding.
  const Eigen::JacobiSVD<Eigen::MatrixX3d> svd(cloud, Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (!(sv[1] >= 1e-9 * sv[0])) throw Error(ErrorCode::DegenerateCloud, "OD cloud is effectively one-dimensional");

  Eigen::Matrix<double, 3, 2> plane = svd.matrixV().leftCols<2>();
  for (int k = 0; k < 2; ++k)
    if (plane(0, k) < 0.0) plane.col(k) = -plane.col(k);

  std::vector<double> phi;
  phi.reserve(kept.size());
  for (Eigen::Index i = 0; i < cloud.rows(); ++i) {
    const Eigen::RowVector2d t = cloud.row(i) * plane;
    phi.push_back(std::atan2(t[1], t[0]));
  }
  const double lo = percentile(phi, params.alpha);
  const double hi = percentile(phi, 100.0 - params.alpha);
  Eigen::Vector3d v_lo = plane * Eigen::Vector2d(std::cos(lo), std::sin(lo));
  Eigen::Vector3d v_hi = plane * Eigen::Vector2d(std::cos(hi), std::sin(hi));
  if (v_lo.sum() < 0.0) v_lo = -v_lo;
  if (v_hi.sum() < 0.0) v_hi = -v_hi;

  StainProfile p;
  // Hematoxylin absorbs more strongly in the red channel than eosin does.
  const bool lo_is_h = v_lo[0] > v_hi[0];
  p.stain_vectors.col(0) = (lo_is_h ? v_lo : v_hi).normalized();
  p.stain_vectors.col(1) = (lo_is_h ? v_hi : v_lo).normalized();

  const Eigen::Matrix2Xd c = (p.stain_vectors.transpose() * p.stain_vectors)
                                 .ldlt()
                                 .solve(p.stain_vectors.transpose() * od_pixels.transpose());
  for (int k = 0; k < 2; ++k) {
    std::vector<double> row(c.cols());
    for (Eigen::Index i = 0; i < c.cols(); ++i) row[static_cast<std::size_t>(i)] = c(k, i);
    p.max_concentrations[k] = std::max(0.0, percentile(std::move(row), 99.0));
  }
  return p;
}

Eigen::Matrix2Xd concentrations(const Eigen::MatrixX3d& od_pixels, const StainProfile& profile) {
  const Eigen::Matrix<double, 3, 2>& s = profile.stain_vectors;
  Eigen::Matrix2Xd c = (s.transpose() * s).ldlt().solve(s.transpose() * od_pixels.transpose());
  return c.cwiseMax(0.0);
}

RgbImage normalize_to_reference(const RgbImage& image, const StainProfile& source, const StainProfile& reference) {
  source.validate();
  reference.validate();
  Eigen::Matrix2Xd c = concentrations(rgb_to_od(image), source);
  for (int k = 0; k < 2; ++k) {
    const double denom = source.max_concentrations[k];
    if (denom > 0.0) c.row(k) *= reference.max_concentrations[k] / denom;
  }
  const Eigen::MatrixX3d od = (reference.stain_vectors * c).transpose();
  return od_to_rgb(od, image.width, image.height);
}

std::string stain_profile_to_json(const StainProfile& p) {
  json doc;
  doc["hematoxylin"] = {p.stain_vectors(0, 0), p.stain_vectors(1, 0), p.stain_vectors(2, 0)};
  doc["eosin"] = {p.stain_vectors(0, 1), p.stain_vectors(1, 1), p.stain_vectors(2, 1)};
  doc["max_concentrations"] = {p.max_concentrations[0], p.max_concentrations[1]};
  return doc.dump(2) + "\n";
}

StainProfile stain_profile_from_json(const std::string& text) {
  StainProfile p;
  try {
    const json doc = json::parse(text);
    const auto h = doc.at("hematoxylin").get<std::vector<double>>();
    const auto e = doc.at("eosin").get<std::vector<double>>();
    const auto m = doc.at("max_concentrations").get<std::vector<double>>();
    if (h.size() != 3 || e.size() != 3 || m.size() != 2)
      throw Error(ErrorCode::ShapeMismatch, "stain profile needs 3 + 3 + 2 numbers");
    p.stain_vectors.col(0) = Eigen::Vector3d(h[0], h[1], h[2]);
    p.stain_vectors.col(1) = Eigen::Vector3d(e[0], e[1], e[2]);
    p.max_concentrations = Eigen::Vector2d(m[0], m[1]);
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::ParseError, std::string("stain profile json: ") + ex.what());
  }
  p.validate();
  return p;
}

void save_stain_profile(const StainProfile& p, const std::filesystem::path& path) {
  detail::write_text(path, stain_profile_to_json(p));
}

StainProfile load_stain_profile(const std::filesystem::path& path) {
  return stain_profile_from_json(detail::read_text(path));
}

bool is_tissue_pixel(const std::uint8_t* rgb) {
  const double lum = 0.299 * rgb[0] + 0.587 * rgb[1] + 0.114 * rgb[2];
  return lum < 220.0;
}

RgbImage crop(const RgbImage& image, int row, int col, int height, int width) {
  if (row < 0 || col < 0 || row + height > image.height || col + width > image.width)
    throw Error(ErrorCode::OutOfRange, "crop window outside the image");
  RgbImage out(width, height);
  for (int r = 0; r < height; ++r)
    std::copy_n(image.at(row + r, col), 3 * static_cast<std::size_t>(width), out.at(r, 0));
  return out;
}

TileResult tile(const RgbImage& image, const std::optional<Mask>& mask, double threshold) {
  if (image.width < kPatchSize || image.height < kPatchSize)
    throw Error(ErrorCode::ImageTooSmall, std::to_string(image.width) + "x" + std::to_string(image.height) +
                                              " is smaller than one " + std::to_string(kPatchSize) + " patch");
  if (mask && (mask->width != image.width || mask->height != image.height))
    throw Error(ErrorCode::ShapeMismatch, "mask geometry differs from the image");
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw Error(ErrorCode::InvalidConfig, "threshold must lie in [0, 1]");

  TileResult out;
  out.grid.tissue_fraction_threshold = threshold;
  const int rows = image.height / kPatchSize, cols = image.width / kPatchSize;
  out.grid.total_candidates = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  constexpr double kArea = static_cast<double>(kPatchSize) * kPatchSize;
  for (int gr = 0; gr < rows; ++gr) {
    for (int gc = 0; gc < cols; ++gc) {
      const int r0 = gr * kPatchSize, c0 = gc * kPatchSize;
      std::size_t tissue = 0;
      for (int r = r0; r < r0 + kPatchSize; ++r)
        for (int c = c0; c < c0 + kPatchSize; ++c)
          tissue += mask ? mask->at(r, c) : is_tissue_pixel(image.at(r, c));
      const double frac = static_cast<double>(tissue) / kArea;
      if (frac >= threshold) {
        out.grid.origins.push_back({r0, c0, frac});
        out.patches.push_back(crop(image, r0, c0, kPatchSize, kPatchSize));
      }
    }
  }
  return out;
}

std::filesystem::path write_patches(const TileResult& tiles, const std::string& patient_id,
                                    const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json doc;
  doc["patient_id"] = patient_id;
  doc["patch_size"] = tiles.grid.patch_size;
  doc["tissue_fraction_threshold"] = tiles.grid.tissue_fraction_threshold;
  doc["total"] = tiles.grid.total_candidates;
  doc["retained"] = tiles.grid.origins.size();
  json list = json::array();
  for (std::size_t i = 0; i < tiles.grid.origins.size(); ++i) {
    const auto& o = tiles.grid.origins[i];
    const std::string name = patient_id + "_" + std::to_string(o.row) + "_" + std::to_string(o.col) + ".png";
    write_png(tiles.patches[i], dir / name);
    list.push_back({{"row", o.row}, {"col", o.col}, {"tissue_fraction", o.tissue_fraction}, {"file", name}});
  }
  doc["patches"] = list;
  const auto manifest = dir / (patient_id + "_manifest.json");
  detail::write_text(manifest, doc.dump(2) + "\n");
  return manifest;
}

}  // namespace histoexpr
