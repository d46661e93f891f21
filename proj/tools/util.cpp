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

#include "util.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <unordered_map>

#include "csv.hpp"
#include "histoexpr/error.hpp"

namespace histoexpr::cli {

namespace fs = std::filesystem;

std::string fnv1a_hex(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_file(const fs::path& path, const std::string& text) { detail::write_text(path, text); }

void write_json(const fs::path& path, const nlohmann::json& j) { detail::write_text(path, j.dump(2) + "\n"); }

std::vector<fs::path> list_files(const fs::path& dir, const std::vector<std::string>& exts) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw Error(ErrorCode::Io, "not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (std::find(exts.begin(), exts.end(), ext) != exts.end()) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

void require_file(const fs::path& path, const std::string& what) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw Error(ErrorCode::Io, what + " not found: " + path.string());
}

fs::path prepare_output(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(ErrorCode::Io, "cannot create output directory " + dir.string());
  return dir;
}

ExpressionMatrix load_log_expression(const fs::path& csv, const GenePanel& panel, bool already_log,
                                     std::vector<std::string>* rejected) {
  auto load = load_expression(csv, panel);
  if (rejected) *rejected = load.rejected_patients;
  if (already_log) {
    load.matrix.transformed = true;
    return std::move(load.matrix);
  }
  return log_transform(load.matrix);
}

Eigen::MatrixXd feature_rows(const std::vector<SlideFeature>& features, const std::vector<std::string>& ids) {
  std::unordered_map<std::string, const SlideFeature*> by_id;
  for (const auto& f : features) by_id[f.patient_id] = &f;
  if (features.empty()) throw Error(ErrorCode::EmptyIntersection, "no slide features");
  const auto width = static_cast<Eigen::Index>(features.front().z.size());
  Eigen::MatrixXd x(static_cast<Eigen::Index>(ids.size()), width);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto it = by_id.find(ids[i]);
    if (it == by_id.end()) throw Error(ErrorCode::EmptyIntersection, "no slide features for " + ids[i]);
    for (Eigen::Index k = 0; k < width; ++k) x(static_cast<Eigen::Index>(i), k) = it->second->z[static_cast<std::size_t>(k)];
  }
  return x;
}

std::vector<std::pair<std::string, std::string>> read_labels(const fs::path& csv, const std::string& column) {
  const auto lines = detail::split_lines(detail::read_text(csv));
  if (lines.empty()) throw Error(ErrorCode::ParseError, csv.string() + ": empty file");
  const auto header = detail::split_fields(lines[0]);
  const auto col = std::find(header.begin(), header.end(), column);
  if (header.empty() || header[0] != "patient_id" || col == header.end())
    throw Error(ErrorCode::ParseError, csv.string() + ": header needs patient_id and " + column);
  const auto k = static_cast<std::size_t>(col - header.begin());
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    const auto f = detail::split_fields(lines[ln]);
    if (f.size() != header.size())
      throw Error(ErrorCode::ParseError, csv.string() + ": line " + std::to_string(ln + 1) + ": field count");
    out.emplace_back(f[0], f[k]);
  }
  return out;
}

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace histoexpr::cli
