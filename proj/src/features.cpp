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

#include "histoexpr/features.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <unordered_map>

#include "csv.hpp"
#include "histoexpr/error.hpp"

namespace histoexpr {

namespace {

constexpr char kMagic[4] = {'H', '2', 'R', 'F'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_string(std::vector<std::uint8_t>& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4, "u32 field");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{bytes_[pos_ + i]} << (8 * i);
    pos_ += 4;
    return v;
  }

  std::string str(const char* what) {
    const std::uint32_t n = u32();
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }
  const std::uint8_t* cursor() const { return bytes_.data() + pos_; }

 private:
  void need(std::size_t n, const char* what) const {
    if (remaining() < n)
      throw Error(ErrorCode::ShapeMismatch, std::string("truncated ") + what);
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void PatchFeatureSet::validate() const {
  if (values.size() != std::size_t{n_patches} * n_features)
    throw Error(ErrorCode::ShapeMismatch,
                "values hold " + std::to_string(values.size()) + " entries, expected " +
                    std::to_string(std::size_t{n_patches} * n_features));
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i]))
      throw Error(ErrorCode::NonFiniteValue,
                  "patch " + std::to_string(i / std::max<std::uint32_t>(n_features, 1)) +
                      ", feature " + std::to_string(i % std::max<std::uint32_t>(n_features, 1)));
  }
}

SlideFeature aggregate(const PatchFeatureSet& p) {
  if (p.n_patches == 0) throw Error(ErrorCode::EmptyFeatureSet, p.patient_id);
  p.validate();
  std::vector<double> z(p.n_features, 0.0);
  for (std::size_t i = 0; i < p.n_patches; ++i) {
    const auto r = p.row(i);
    for (std::size_t f = 0; f < p.n_features; ++f) z[f] += static_cast<double>(r[f]);
  }
  const double inv = 1.0 / static_cast<double>(p.n_patches);
  for (double& v : z) v *= inv;
  return SlideFeature{p.patient_id, std::move(z)};
}

std::vector<std::uint8_t> encode_features(const PatchFeatureSet& p) {
  p.validate();
  std::vector<std::uint8_t> out;
  out.reserve(32 + p.patient_id.size() + p.extractor_tag.size() + 4 * p.values.size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_u32(out, kFeatureFormatVersion);
  put_string(out, p.patient_id);
  put_string(out, p.extractor_tag);
  put_u32(out, p.n_patches);
  put_u32(out, p.n_features);
  for (float v : p.values) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

PatchFeatureSet decode_features(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw Error(ErrorCode::BadMagic, "not an H2RF file");
  Reader in(bytes.subspan(4));
  const std::uint32_t version = in.u32();
  if (version != kFeatureFormatVersion)
    throw Error(ErrorCode::UnsupportedVersion, "H2RF version " + std::to_string(version));
  PatchFeatureSet p;
  p.patient_id = in.str("patient_id");
  p.extractor_tag = in.str("extractor_tag");
  p.n_patches = in.u32();
  p.n_features = in.u32();
  const std::size_t count = std::size_t{p.n_patches} * p.n_features;
  if (in.remaining() != count * 4)
    throw Error(ErrorCode::ShapeMismatch,
                "payload has " + std::to_string(in.remaining()) + " bytes, header implies " +
                    std::to_string(count * 4));
  p.values.resize(count);
  const std::uint8_t* src = in.cursor();
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= std::uint32_t{src[4 * i + b]} << (8 * b);
    p.values[i] = std::bit_cast<float>(bits);
  }
  p.validate();
  return p;
}

void write_features(const PatchFeatureSet& p, const std::filesystem::path& path) {
  const auto bytes = encode_features(p);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

PatchFeatureSet read_features(const std::filesystem::path& path) {
  const std::string raw = detail::read_text(path);
  return decode_features(
      std::span(reinterpret_cast<const std::uint8_t*>(raw.data()), raw.size()));
}

void save_slide_features(const std::vector<SlideFeature>& rows,
                         const std::filesystem::path& path) {
  std::string out = "patient_id";
  const std::size_t width = rows.empty() ? 0 : rows.front().z.size();
  for (std::size_t f = 0; f < width; ++f) out += ",f" + std::to_string(f);
  out += "\n";
  for (const auto& r : rows) {
    if (r.z.size() != width) throw Error(ErrorCode::ShapeMismatch, r.patient_id);
    out += r.patient_id;
    for (double v : r.z) out += "," + detail::format_double(v);
    out += "\n";
  }
  detail::write_text(path, out);
}

std::vector<SlideFeature> load_slide_features(const std::filesystem::path& path) {
  const auto lines = detail::split_lines(detail::read_text(path));
  if (lines.empty()) throw Error(ErrorCode::ParseError, "line 1: empty slide feature file");
  const auto header = detail::split_fields(lines[0]);
  if (header.empty() || header[0] != "patient_id")
    throw Error(ErrorCode::ParseError, "line 1: first column must be patient_id");
  std::vector<SlideFeature> rows;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    const auto fields = detail::split_fields(lines[ln]);
    if (fields.size() != header.size())
      throw Error(ErrorCode::ParseError, "line " + std::to_string(ln + 1) + ": field count");
    SlideFeature s{fields[0], {}};
    for (std::size_t c = 1; c < fields.size(); ++c) {
      auto v = detail::parse_double(fields[c]);
      if (!v) throw Error(ErrorCode::ParseError, "line " + std::to_string(ln + 1) + ": bad value");
      if (!std::isfinite(*v)) throw Error(ErrorCode::NonFiniteValue, s.patient_id);
      s.z.push_back(*v);
    }
    rows.push_back(std::move(s));
  }
  return rows;
}

AlignedDataset assemble_dataset(const std::vector<SlideFeature>& features,
                                const ExpressionMatrix& expr) {
  std::map<std::string, const SlideFeature*> by_id;
  for (const auto& s : features) {
    if (!by_id.emplace(s.patient_id, &s).second)
      throw Error(ErrorCode::DuplicatePatient, s.patient_id);
  }
  std::unordered_map<std::string, Eigen::Index> expr_row;
  for (std::size_t r = 0; r < expr.patient_ids.size(); ++r)
    expr_row.emplace(expr.patient_ids[r], static_cast<Eigen::Index>(r));

  AlignedDataset ds;
  for (const auto& [id, s] : by_id) {
    if (expr_row.count(id)) ds.patient_ids.push_back(id);
    else ds.dropped_features.push_back(id);
  }
  for (const auto& id : expr.patient_ids)
    if (!by_id.count(id)) ds.dropped_expression.push_back(id);
  std::sort(ds.dropped_expression.begin(), ds.dropped_expression.end());

  if (ds.patient_ids.empty())
    throw Error(ErrorCode::EmptyIntersection, "no patient has both features and expression");

  const std::size_t width = by_id.at(ds.patient_ids.front())->z.size();
  const auto n = static_cast<Eigen::Index>(ds.patient_ids.size());
  ds.x.resize(n, static_cast<Eigen::Index>(width));
  ds.y.resize(n, expr.values.cols());
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& id = ds.patient_ids[static_cast<std::size_t>(r)];
    const auto& z = by_id.at(id)->z;
    if (z.size() != width) throw Error(ErrorCode::ShapeMismatch, "feature width differs for " + id);
    for (std::size_t f = 0; f < width; ++f) ds.x(r, static_cast<Eigen::Index>(f)) = z[f];
    ds.y.row(r) = expr.values.row(expr_row.at(id));
  }
  return ds;
}

}  // namespace histoexpr
