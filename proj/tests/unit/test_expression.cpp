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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "histoexpr/error.hpp"
#include "histoexpr/expression.hpp"

using namespace histoexpr;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::Io;
}

std::string error_text(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

GenePanel small_panel() {
  GenePanel p;
  p.genes = {"ESR1", "ERBB2", "MKI67"};
  p.assay_tags = {{"PAM50", "OncotypeDX"}, {"PAM50"}, {"PAM50", "Mammaprint"}};
  p.pam50_flags = {true, true, false};
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("log transform examples") {
  Eigen::MatrixXd raw(1, 3);
  raw << 0, 1, 3;
  const auto t = log_transform(raw);
  CHECK(t(0, 0) == 0.0);
  CHECK(t(0, 1) == 1.0);
  CHECK(t(0, 2) == 2.0);

  Eigen::MatrixXd back(1, 2);
  back << 2, 0;
  const auto r = inverse_transform(back);
  CHECK(r(0, 0) == 3.0);
  CHECK(r(0, 1) == 0.0);
}

TEST_CASE("negative entries are rejected with their position") {
  Eigen::MatrixXd raw = Eigen::MatrixXd::Ones(3, 4);
  raw(2, 1) = -0.5;
  CHECK(code_of([&] { log_transform(raw); }) == ErrorCode::NegativeExpression);
  CHECK(error_text([&] { log_transform(raw); }).find("(2, 1)") != std::string::npos);
  CHECK(code_of([&] { inverse_transform(-raw.cwiseAbs()); }) == ErrorCode::NegativeExpression);
  raw(2, 1) = std::nan("");
  CHECK(code_of([&] { log_transform(raw); }) == ErrorCode::NegativeExpression);
}

TEST_CASE("log transform round-trips and preserves order") {
  std::mt19937_64 rng(2);
  std::exponential_distribution<double> ex(1e-3);
  Eigen::MatrixXd raw(40, 25);
  for (Eigen::Index i = 0; i < raw.size(); ++i) raw.data()[i] = ex(rng);
  const auto back = inverse_transform(log_transform(raw));
  CHECK((back - raw).cwiseAbs().maxCoeff() < 1e-9);
  for (Eigen::Index i = 0; i < raw.size(); ++i)
    CHECK(std::abs(back.data()[i] - raw.data()[i]) <= 1e-9 * std::max(1.0, raw.data()[i]));

  std::uniform_real_distribution<double> u(0.0, 1e6);
  for (int k = 0; k < 2000; ++k) {
    const double a = u(rng), b = u(rng);
    Eigen::MatrixXd m(1, 3);
    m << a, b, std::nextafter(a, 2e6);
    const auto t = log_transform(m);
    CHECK((a < b) == (t(0, 0) < t(0, 1)));
    // Neighbouring doubles may round to the same logarithm.
    CHECK(t(0, 0) <= t(0, 2));
  }
}

TEST_CASE("expression matrices carry the transformed flag") {
  ExpressionMatrix m{{"P1"}, Eigen::MatrixXd::Constant(1, 2, 3.0), false};
  const auto t = log_transform(m);
  CHECK(t.transformed);
  CHECK(t.values(0, 0) == 2.0);
  CHECK(code_of([&] { log_transform(t); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("load reorders columns to panel order and ignores extras") {
  const auto panel = small_panel();
  const std::string text =
      "patient_id,MKI67,EXTRA,ESR1,ERBB2\n"
      "P1,3,100,1,2\n"
      "P2,30,100,10,20\n";
  const auto load = parse_expression(text, panel);
  REQUIRE(load.matrix.values.rows() == 2);
  REQUIRE(load.matrix.values.cols() == 3);
  CHECK(load.matrix.patient_ids == std::vector<std::string>{"P1", "P2"});
  CHECK(load.matrix.values(0, 0) == 1.0);
  CHECK(load.matrix.values(0, 1) == 2.0);
  CHECK(load.matrix.values(0, 2) == 3.0);
  CHECK(load.matrix.values(1, 2) == 30.0);
  CHECK_FALSE(load.matrix.transformed);
  CHECK(load.rejected_patients.empty());
}

TEST_CASE("load output is invariant to column permutation") {
  const auto panel = small_panel();
  const std::vector<std::string> cols = {"ESR1", "ERBB2", "MKI67", "X1"};
  const std::vector<std::vector<std::string>> rows = {
      {"A", "1.5", "2", "3", "9"}, {"B", "4", "5e1", "0", "9"}, {"C", "7", "8", "0.25", "9"}};
  auto render = [&](const std::vector<std::size_t>& order) {
    std::string s = "patient_id";
    for (auto o : order) s += "," + cols[o];
    s += "\n";
    for (const auto& r : rows) {
      s += r[0];
      for (auto o : order) s += "," + r[o + 1];
      s += "\n";
    }
    return s;
  };
  std::vector<std::size_t> order = {0, 1, 2, 3};
  const auto base = parse_expression(render(order), panel).matrix;
  std::mt19937_64 rng(6);
  for (int k = 0; k < 10; ++k) {
    std::shuffle(order.begin(), order.end(), rng);
    const auto m = parse_expression(render(order), panel).matrix;
    CHECK(m.values == base.values);
    CHECK(m.patient_ids == base.patient_ids);
  }
}

TEST_CASE("load error paths") {
  const auto panel = small_panel();
  CHECK(code_of([&] { parse_expression("patient_id,ESR1,MKI67\nP1,1,2\n", panel); }) == ErrorCode::MissingGene);
  CHECK(error_text([&] { parse_expression("patient_id,ESR1,MKI67\nP1,1,2\n", panel); }).find("ERBB2") !=
        std::string::npos);
  CHECK(code_of([&] { parse_expression("patient_id,ESR1,ERBB2,MKI67\nP1,1,2,3\nP1,1,2,3\n", panel); }) ==
        ErrorCode::DuplicatePatient);
  const auto bad = [&] { parse_expression("patient_id,ESR1,ERBB2,MKI67\nP1,1,2,3\nP2,1,x,3\n", panel); };
  CHECK(code_of(bad) == ErrorCode::ParseError);
  CHECK(error_text(bad).find("line 3") != std::string::npos);
  CHECK(code_of([&] { parse_expression("gene,ESR1,ERBB2,MKI67\n", panel); }) == ErrorCode::ParseError);
  CHECK(code_of([&] { parse_expression("patient_id,ESR1,ERBB2,MKI67\nP1,1,2\n", panel); }) == ErrorCode::ParseError);
  CHECK(code_of([&] { load_expression("/nonexistent/expr.csv", panel); }) == ErrorCode::Io);
}

TEST_CASE("patients with a missing panel value are rejected and reported") {
  const auto panel = small_panel();
  const auto load = parse_expression(
      "patient_id,ESR1,ERBB2,MKI67,EXTRA\n"
      "P1,1,2,3,\n"
      "P2,1,NA,3,4\n"
      "P3,1,,3,4\n"
      "P4,5,6,7,NA\n",
      panel);
  CHECK(load.matrix.patient_ids == std::vector<std::string>{"P1", "P4"});
  CHECK(load.rejected_patients == std::vector<std::string>{"P2", "P3"});
}

TEST_CASE("panel JSON round-trips byte-identically and validates") {
  const fs::path dir = fs::temp_directory_path() / "histoexpr_panel";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto panel = small_panel();
  save_panel(panel, dir / "a.json");
  const auto back = load_panel(dir / "a.json");
  CHECK(back.genes == panel.genes);
  CHECK(back.assay_tags == panel.assay_tags);
  CHECK(back.pam50_flags == panel.pam50_flags);
  save_panel(back, dir / "b.json");
  CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));
  fs::remove_all(dir);

  CHECK(code_of([] { parse_panel_json(R"([{"symbol": "A"}, {"symbol": "A"}])"); }) == ErrorCode::DuplicateGene);
  CHECK(code_of([] { parse_panel_json(R"({"symbol": "A"})"); }) == ErrorCode::ParseError);
  CHECK(code_of([] { parse_panel_json("[{\"assays\": []}]"); }) == ErrorCode::ParseError);
  std::string many = "[";
  for (int i = 0; i < 51; ++i) many += std::string(i ? "," : "") + "{\"symbol\": \"G" + std::to_string(i) + "\", \"pam50\": true}";
  many += "]";
  CHECK(code_of([&] { parse_panel_json(many); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("panel hash depends on order and content") {
  auto a = small_panel();
  auto b = a;
  std::swap(b.genes[0], b.genes[1]);
  CHECK(panel_hash(a) == panel_hash(small_panel()));
  CHECK(panel_hash(a) != panel_hash(b));
  b = a;
  b.genes[2] = "MKI6";
  CHECK(panel_hash(a) != panel_hash(b));
}

TEST_CASE("shipped default panel") {
  const fs::path path = fs::path(HISTOEXPR_CONFIG) / "panel_default.json";
  const auto panel = load_panel(path);
  CHECK(panel.size() == 138);
  CHECK(panel.pam50_count() == 50);
  const auto idx = panel.pam50_indices();
  CHECK(idx.front() == 0);
  CHECK(idx.back() == 49);
  CHECK(std::find(panel.genes.begin(), panel.genes.end(), "ESR1") != panel.genes.end());
  CHECK(panel_to_json(panel) == slurp(path));
}

TEST_CASE("saved expression reloads to the same matrix") {
  const fs::path path = fs::temp_directory_path() / "histoexpr_expr.csv";
  const auto panel = small_panel();
  ExpressionMatrix m{{"P1", "P2"}, Eigen::MatrixXd(2, 3), false};
  m.values << 0.1, 1.0 / 3.0, 12345.678901234567, 0, 2e-300, 1e17;
  save_expression(m, panel, path);
  const auto back = load_expression(path, panel).matrix;
  fs::remove(path);
  CHECK(back.patient_ids == m.patient_ids);
  CHECK(back.values == m.values);
}
