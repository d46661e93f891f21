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

// Helpers shared by the unit tests and the acceptance runner.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "histoexpr/imageprep.hpp"
#include "histoexpr/regressor.hpp"

namespace support {

using namespace histoexpr;

inline RegressorModel random_model(HeadShape shape, std::uint32_t f, std::uint32_t g, std::uint64_t seed) {
  RegressorModel m(shape, f, g);
  std::mt19937_64 rng(seed);
  m.init_he_uniform(rng);
  // Non-zero biases so every code path carries signal.
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  auto v = m.views();
  for (auto* b : {&v.b1, &v.b2, &v.b3, &v.b4})
    for (Eigen::Index i = 0; i < b->size(); ++i) (*b)[i] = u(rng);
  return m;
}

inline RowMatrix random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  RowMatrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
  return m;
}

using Pattern = std::vector<bool>;

inline Pattern relu_pattern(const ForwardCache& c) {
  Pattern p;
  for (const RowMatrix* a : {&c.a1, &c.a2, &c.a3})
    for (Eigen::Index i = 0; i < a->size(); ++i) p.push_back(a->data()[i] > 0.0);
  return p;
}

struct GradCheck {
  std::size_t checked = 0, skipped = 0, failed = 0;
  double worst = 0.0;
};

// Central differences on the listed parameters. A parameter whose +-h probe
// flips any ReLU is sitting on a kink and is skipped.
inline GradCheck gradient_check(RegressorModel m, const RowMatrix& z, const RowMatrix& t,
                         const std::vector<Eigen::Index>& which) {
  constexpr double h = 1e-5;
  ForwardCache base;
  forward(m, z, &base);
  const Pattern p0 = relu_pattern(base);
  const Eigen::VectorXd grad = backward_from_cache(m, base, t);
  GradCheck r;
  for (Eigen::Index i : which) {
    const double keep = m.params()[i];
    ForwardCache up, down;
    m.params()[i] = keep + h;
    const double lu = batch_loss(forward(m, z, &up), t);
    m.params()[i] = keep - h;
    const double ld = batch_loss(forward(m, z, &down), t);
    m.params()[i] = keep;
    if (relu_pattern(up) != p0 || relu_pattern(down) != p0) {
      ++r.skipped;
      continue;
    }
    ++r.checked;
    const double fd = (lu - ld) / (2.0 * h);
    const double scale = std::max(std::abs(fd), std::abs(grad[i]));
    // Below ~1e-7 the difference quotient is dominated by rounding in the
    // loss itself, so fall back to an absolute bound there.
    const double err = scale > 1e-7 ? std::abs(fd - grad[i]) / scale : std::abs(fd - grad[i]) / 1e-7;
    r.worst = std::max(r.worst, err);
    if (err > 1e-4) ++r.failed;
  }
  return r;
}

inline double angle_deg(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const double c = std::clamp(std::abs(a.normalized().dot(b.normalized())), 0.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

// Beer-Lambert image of two stains. A fifth of the pixels carry only one
// stain so that the angular extremes are populated.
inline RgbImage stained_image(const Eigen::Vector3d& v1, const Eigen::Vector3d& v2, int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> c1(0.1, 1.2), c2(0.1, 0.9), u(0.0, 1.0);
  RgbImage img(w, h);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double a = c1(rng), b = c2(rng);
      const double pick = u(rng);
      if (pick < 0.1) b = 0.0;
      else if (pick < 0.2) a = 0.0;
      const Eigen::Vector3d od = a * v1 + b * v2;
      for (int k = 0; k < 3; ++k) img.at(r, c)[k] = od_to_intensity(od[k]);
    }
  }
  return img;
}

}  // namespace support
