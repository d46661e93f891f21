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

// Static SVG plots. Coordinates are printed with fixed precision so the
// output is a pure function of the data.

#pragma once

#include <span>
#include <string>
#include <vector>

#include "histoexpr/survival.hpp"

namespace histoexpr {

struct ScatterPanel {
  std::string title;
  std::vector<double> x;  // actual
  std::vector<double> y;  // predicted
  bool highlighted = false;
};

/// Grid of predicted-vs-actual scatter panels, `columns` per row.
std::string scatter_grid_svg(std::span<const ScatterPanel> panels, int columns = 5);

struct KmSeries {
  std::string label;
  KmCurve curve;
};

/// One step path per series; censoring is not marked.
std::string km_svg(std::span<const KmSeries> series, const std::string& title);

}  // namespace histoexpr
