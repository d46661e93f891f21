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

// Internal helpers for the plain comma-separated files the pipeline reads and
// writes. No quoting support: none of the formats need it.

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace histoexpr::detail {

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

std::vector<std::string> split_lines(std::string_view text);
std::vector<std::string> split_fields(std::string_view line);

/// Strict decimal parse; nullopt on junk or trailing characters.
std::optional<double> parse_double(std::string_view field);

/// Shortest text that round-trips to the same double.
std::string format_double(double v);

}  // namespace histoexpr::detail
