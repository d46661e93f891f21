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

#include <json.hpp>

#include "histoexpr/expression.hpp"
#include "histoexpr/features.hpp"

namespace histoexpr::cli {

std::string fnv1a_hex(std::span<const std::uint8_t> bytes);

void write_file(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

/// Regular files in `dir` whose extension is one of `exts` (lower case,
/// with the dot), sorted by name. Throws Io when `dir` is not a directory.
std::vector<std::filesystem::path> list_files(const std::filesystem::path& dir,
                                              const std::vector<std::string>& exts);

void require_file(const std::filesystem::path& path, const std::string& what);

/// Creates the output directory and returns it.
std::filesystem::path prepare_output(const std::filesystem::path& dir);

/// Expression for `panel`, in log2(1 + x) space.
ExpressionMatrix load_log_expression(const std::filesystem::path& csv, const GenePanel& panel,
                                     bool already_log, std::vector<std::string>* rejected = nullptr);

/// Row-aligned slide features for `ids`; missing ids throw EmptyIntersection.
Eigen::MatrixXd feature_rows(const std::vector<SlideFeature>& features, const std::vector<std::string>& ids);

/// patient_id,label two-column CSV; extra columns are ignored.
std::vector<std::pair<std::string, std::string>> read_labels(const std::filesystem::path& csv,
                                                             const std::string& column);

nlohmann::json number_or_null(double v);

}  // namespace histoexpr::cli
