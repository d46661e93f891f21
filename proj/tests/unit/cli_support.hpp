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

// In-process CLI driver and output snapshots for the tests.

#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cli.hpp"

namespace cli_support {

namespace fs = std::filesystem;
using nlohmann::json;

struct Run {
  int code = -1;
  std::string out, err;
};

inline Run invoke(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Run r;
  r.code = histoexpr::cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void spit(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

// Timing columns and fields differ run to run; everything else must not.
inline std::string masked(const fs::path& rel, const std::string& text) {
  if (rel.filename() == "history.csv") {
    std::string out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) out += line.substr(0, line.rfind(',')) + "\n";
    return out;
  }
  if (rel.filename() == "benchmark_report.json") {
    json j = json::parse(text);
    for (const char* mode : {"aggregated", "patchwise"}) {
      j[mode].erase("epoch_seconds");
      j[mode].erase("mean_epoch_seconds");
    }
    j.erase("speedup");
    j["energy"].erase("aggregated_kwh_per_epoch");
    j["energy"].erase("patchwise_kwh_per_epoch");
    return j.dump();
  }
  return text;
}

inline std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) {
      const fs::path rel = fs::relative(e.path(), dir);
      out[rel.generic_string()] = masked(rel, slurp(e.path()));
    }
  return out;
}

}  // namespace cli_support
