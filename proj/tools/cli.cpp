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

#include "cli.hpp"

#include <ostream>

#include <CLI11.hpp>

namespace histoexpr::cli {

int exit_code(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ImageDecode:
    case ErrorCode::MissingGene:
    case ErrorCode::DuplicatePatient:
    case ErrorCode::DuplicateGene:
    case ErrorCode::ParseError:
    case ErrorCode::BadMagic:
    case ErrorCode::UnsupportedVersion:
    case ErrorCode::ShapeMismatch:
    case ErrorCode::NonFiniteValue:
    case ErrorCode::FeatureTooShort:
    case ErrorCode::LengthMismatch:
    case ErrorCode::DatasetTooSmall:
    case ErrorCode::PanelMismatch:
    case ErrorCode::InvalidConfig:
    case ErrorCode::Io:
    case ErrorCode::Usage:
      return 2;
    default:
      return 1;
  }
}

double energy_kwh(int devices, double hours, double watts) {
  return static_cast<double>(devices) * hours * watts / 1000.0;
}

namespace {

void add_train_flags(CLI::App* sub, TrainConfig& c) {
  sub->add_option("--lr", c.learning_rate, "Adam learning rate")->capture_default_str();
  sub->add_option("--batch-size", c.batch_size)->capture_default_str();
  sub->add_option("--patience", c.patience, "epochs without validation improvement")->capture_default_str();
  sub->add_option("--max-epochs", c.max_epochs)->capture_default_str();
  sub->add_option("--val-fraction", c.validation_fraction)->capture_default_str();
  sub->add_option("--kernel", c.shape.kernel)->capture_default_str();
  sub->add_option("--c1", c.shape.c1)->capture_default_str();
  sub->add_option("--c2", c.shape.c2)->capture_default_str();
  sub->add_option("--c3", c.shape.c3)->capture_default_str();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"histoexpr: gene expression from histopathology features"};
  app.name("histoexpr");
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value configuration file; command-line flags win");

  Globals g;
  app.add_option("--seed", g.seed, "seed for every stochastic step")->capture_default_str();
  app.add_option("--output-dir,-o", g.output_dir, "directory for all outputs")->capture_default_str();
  app.add_flag("--strict", g.strict, "fail on the first per-item error");

  Streams io{out, err};

  PreprocessOptions pre;
  auto* s_pre = app.add_subcommand("preprocess", "stain-normalise and tile slide images");
  s_pre->add_option("--images", pre.images, "directory of PNG/PPM images")->required();
  s_pre->add_option("--masks", pre.masks, "directory of tissue masks named like the images");
  s_pre->add_option("--reference-profile", pre.reference_profile, "stain profile JSON");
  s_pre->add_option("--alpha", pre.alpha, "angular percentile")->capture_default_str();
  s_pre->add_option("--beta", pre.beta, "optical density floor")->capture_default_str();
  s_pre->add_option("--tissue-threshold", pre.tissue_threshold)->capture_default_str();
  s_pre->callback([&] { cmd_preprocess(g, pre, io); });

  AggregateOptions agg;
  auto* s_agg = app.add_subcommand("aggregate", "average H2RF patch features into slide features");
  s_agg->add_option("--features", agg.features, "directory of .h2rf files")->required();
  s_agg->callback([&] { cmd_aggregate(g, agg, io); });

  TrainOptions tr;
  auto* s_tr = app.add_subcommand("train", "fit the expression regressor on slide features");
  s_tr->add_option("--features", tr.features, "slide feature CSV")->required();
  s_tr->add_option("--expression", tr.expression, "expression CSV")->required();
  s_tr->add_option("--panel", tr.panel, "gene panel JSON")->required();
  s_tr->add_flag("--log-scale", tr.log_scale, "expression is already log2(1 + x)");
  add_train_flags(s_tr, tr.config);
  s_tr->callback([&] { cmd_train(g, tr, io); });

  PredictOptions pr;
  auto* s_pr = app.add_subcommand("predict", "predict log expression for slide features");
  s_pr->add_option("--model", pr.model)->required();
  s_pr->add_option("--features", pr.features, "slide feature CSV")->required();
  s_pr->add_option("--panel", pr.panel, "gene panel JSON")->required();
  s_pr->callback([&] { cmd_predict(g, pr, io); });

  EvaluateOptions ev;
  auto* s_ev = app.add_subcommand("evaluate", "correlate predictions with measured expression");
  auto* ev_model = s_ev->add_option("--model", ev.model);
  auto* ev_pred = s_ev->add_option("--predictions", ev.predictions, "prediction CSV instead of a model");
  ev_model->excludes(ev_pred);
  s_ev->add_option("--features", ev.features, "slide feature CSV (with --model)");
  s_ev->add_option("--expression", ev.expression, "expression CSV")->required();
  s_ev->add_option("--panel", ev.panel, "gene panel JSON")->required();
  s_ev->add_flag("--log-scale", ev.log_scale, "expression is already log2(1 + x)");
  s_ev->add_option("--top-genes", ev.top_genes, "panels in the scatter grid")->capture_default_str();
  s_ev->callback([&] { cmd_evaluate(g, ev, io); });

  SubtypeOptions st;
  auto* s_st = app.add_subcommand("subtype", "PAM50 centroid calls and the image-feature voting classifier");
  s_st->add_option("--panel", st.panel, "gene panel JSON")->required();
  s_st->add_option("--expression", st.expression, "expression CSV");
  s_st->add_option("--predictions", st.predictions, "predicted expression CSV (log space)");
  s_st->add_flag("--log-scale", st.log_scale, "expression is already log2(1 + x)");
  s_st->add_option("--labels", st.labels, "patient_id,subtype CSV");
  s_st->add_option("--centroids", st.centroids, "centroid model JSON to apply instead of fitting");
  s_st->add_option("--features", st.features, "slide feature CSV for the voting classifier");
  s_st->add_option("--predict-features", st.predict_features, "slide features to classify");
  s_st->add_option("--rf-trees", st.voting.rf_trees)->capture_default_str();
  s_st->add_option("--mlp-epochs", st.voting.mlp_epochs)->capture_default_str();
  s_st->callback([&] { cmd_subtype(g, st, io); });

  SurvivalOptions sv;
  auto* s_sv = app.add_subcommand("survival", "Kaplan-Meier and Cox analysis of luminal subtypes");
  s_sv->add_option("--clinical", sv.clinical, "clinical CSV")->required();
  s_sv->add_option("--subtypes", sv.subtypes, "patient_id,subtype CSV");
  s_sv->add_option("--centroids", sv.centroids, "centroid model JSON (with --predictions)");
  s_sv->add_option("--predictions", sv.predictions, "predicted expression CSV");
  s_sv->add_option("--panel", sv.panel, "gene panel JSON (with --predictions)");
  s_sv->add_option("--size-cutoff", sv.size_cutoff_mm, "tumour size cut in mm")->capture_default_str();
  s_sv->add_option("--age-cutoff", sv.age_cutoff_years, "age cut in years")->capture_default_str();
  s_sv->callback([&] { cmd_survival(g, sv, io); });

  BenchmarkOptions bm;
  auto* s_bm = app.add_subcommand("benchmark", "time aggregated against patch-based training epochs");
  s_bm->add_option("--h2rf-dir", bm.h2rf_dir, "directory of .h2rf files; synthetic data when absent");
  s_bm->add_option("--expression", bm.expression, "expression CSV (with --h2rf-dir)");
  s_bm->add_option("--panel", bm.panel, "gene panel JSON (with --h2rf-dir)");
  s_bm->add_flag("--log-scale", bm.log_scale, "expression is already log2(1 + x)");
  s_bm->add_option("--patients", bm.patients)->capture_default_str();
  s_bm->add_option("--patches", bm.patches, "patches per patient")->capture_default_str();
  s_bm->add_option("--feature-width", bm.features)->capture_default_str();
  s_bm->add_option("--genes", bm.genes)->capture_default_str();
  s_bm->add_option("--noise", bm.noise_sigma)->capture_default_str();
  s_bm->add_option("--aggregated-epochs", bm.aggregated_epochs)->capture_default_str();
  s_bm->add_option("--patchwise-epochs", bm.patchwise_epochs)->capture_default_str();
  s_bm->add_option("--watts", bm.watts, "power draw per device")->capture_default_str();
  s_bm->add_option("--devices", bm.devices)->capture_default_str();
  add_train_flags(s_bm, bm.config);
  s_bm->callback([&] { cmd_benchmark(g, bm, io); });

  std::vector<const char*> argv;
  argv.push_back("histoexpr");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace histoexpr::cli
