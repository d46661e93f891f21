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

#include <ostream>
#include <unordered_set>

#include "cli.hpp"
#include "histoexpr/features.hpp"
#include "histoexpr/imageprep.hpp"
#include "util.hpp"

namespace histoexpr::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::optional<fs::path> find_mask(const fs::path& dir, const std::string& stem) {
  for (const char* ext : {".png", ".ppm", ".PNG", ".PPM"}) {
    const fs::path p = dir / (stem + ext);
    if (fs::is_regular_file(p)) return p;
  }
  return std::nullopt;
}

json profile_json(const StainProfile& p) { return json::parse(stain_profile_to_json(p)); }

}  // namespace

void cmd_preprocess(const Globals& g, const PreprocessOptions& o, Streams io) {
  const auto images = list_files(o.images, {".png", ".ppm"});
  if (images.empty()) throw Error(ErrorCode::Io, "no .png or .ppm images in " + o.images.string());
  if (o.masks && !fs::is_directory(*o.masks)) throw Error(ErrorCode::Io, "not a directory: " + o.masks->string());
  const StainProfile reference = o.reference_profile ? load_stain_profile(*o.reference_profile)
                                                     : default_reference_profile();
  const MacenkoParams params{o.alpha, o.beta};
  const fs::path out = prepare_output(g.output_dir);

  json files = json::array();
  std::size_t ok = 0;
  std::optional<Error> first_failure;
  for (const auto& path : images) {
    const std::string patient = path.stem().string();
    json entry = {{"file", path.filename().string()}, {"patient_id", patient}};
    try {
      const RgbImage image = read_image(path);
      std::optional<Mask> mask;
      if (o.masks) {
        if (auto m = find_mask(*o.masks, patient)) mask = read_mask(*m);
        else io.err << "warning: no mask for " << patient << ", using the luminance test\n";
      }
      const StainProfile source = estimate_stains(rgb_to_od(image), params);
      const RgbImage normalized = normalize_to_reference(image, source, reference);
      const TileResult tiles = tile(normalized, mask, o.tissue_threshold);
      const fs::path manifest = write_patches(tiles, patient, out / "patches" / patient);
      entry["status"] = "ok";
      entry["manifest"] = fs::relative(manifest, out).generic_string();
      entry["patches_retained"] = tiles.grid.origins.size();
      entry["patches_total"] = tiles.grid.total_candidates;
      entry["mask"] = mask.has_value();
      entry["stain_profile"] = profile_json(source);
      ++ok;
    } catch (const Error& e) {
      if (g.strict) throw;
      io.err << "warning: " << path.filename().string() << ": " << e.what() << "\n";
      entry["status"] = "error";
      entry["error_code"] = std::string(to_string(e.code()));
      entry["message"] = e.what();
      if (!first_failure) first_failure = e;
    }
    files.push_back(std::move(entry));
  }
  json report = {{"images", images.size()},
                 {"succeeded", ok},
                 {"failed", images.size() - ok},
                 {"parameters",
                  {{"alpha", o.alpha}, {"beta", o.beta}, {"tissue_fraction_threshold", o.tissue_threshold}}},
                 {"reference_profile", profile_json(reference)},
                 {"files", files}};
  write_json(out / "preprocess_report.json", report);
  io.out << "preprocessed " << ok << " of " << images.size() << " images\n";
  if (ok == 0) throw *first_failure;
}

void cmd_aggregate(const Globals& g, const AggregateOptions& o, Streams io) {
  const auto files = list_files(o.features, {".h2rf"});
  std::vector<SlideFeature> rows;
  std::unordered_set<std::string> seen;
  json skipped = json::array();
  for (const auto& path : files) {
    try {
      const PatchFeatureSet set = read_features(path);
      if (!rows.empty() && set.n_features != rows.front().z.size())
        throw Error(ErrorCode::ShapeMismatch, "feature width " + std::to_string(set.n_features) + " differs from " +
                                                  std::to_string(rows.front().z.size()));
      if (!seen.insert(set.patient_id).second)
        throw Error(ErrorCode::DuplicatePatient, set.patient_id + " appears in more than one file");
      rows.push_back(aggregate(set));
    } catch (const Error& e) {
      if (g.strict) throw;
      io.err << "warning: skipping " << path.filename().string() << ": " << e.what() << "\n";
      skipped.push_back({{"file", path.filename().string()},
                         {"error_code", std::string(to_string(e.code()))},
                         {"message", e.what()}});
    }
  }
  if (rows.empty())
    throw Error(ErrorCode::EmptyIntersection, "no usable .h2rf files in " + o.features.string());
  const fs::path out = prepare_output(g.output_dir);
  save_slide_features(rows, out / "slide_features.csv");
  write_json(out / "aggregate_report.json",
             {{"files", files.size()}, {"aggregated", rows.size()}, {"feature_width", rows.front().z.size()},
              {"skipped", skipped}});
  io.out << "aggregated " << rows.size() << " slides\n";
}

}  // namespace histoexpr::cli
