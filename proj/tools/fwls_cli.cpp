// fwls: fit, cross-validate, extend and apply feature-weighted linear blends.

#include <fmt/format.h>

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fwls/cf/benchmark.hpp"
#include "fwls/core.hpp"
#include "fwls/csv.hpp"
#include "fwls/cv.hpp"
#include "fwls/gram.hpp"
#include "fwls/ridge.hpp"
#include "fwls/store.hpp"

namespace fs = std::filesystem;
using namespace fwls;

namespace {

struct LayoutFlags {
  bool no_f0 = false;
  bool g0 = false;

  csv::ReadOptions options() const { return {.add_f0 = !no_f0, .add_g0 = g0}; }

  void add_to(CLI::App* cmd) {
    cmd->add_flag("--no-f0", no_f0, "Do not prepend the constant meta-feature");
    cmd->add_flag("--g0", g0, "Prepend a constant model (an intercept per meta-feature)");
  }
};

/// Writes through a sibling temp file and a rename, so a failed command
/// never leaves a half-written output behind.
void write_atomically(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    body(out);
    out.flush();
    if (!out) throw Error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

/// Model and feature names from a stacked csv header, laid out as read_stacked would.
std::pair<std::vector<std::string>, std::vector<std::string>> header_names(
    const fs::path& path, const csv::ReadOptions& opt) {
  auto in = csv::open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("stacked csv: empty input", 1);
  std::vector<std::string> g, f;
  if (opt.add_g0) g.emplace_back("const");
  if (opt.add_f0) f.emplace_back("const");
  const auto cells = csv::split(line);
  for (std::size_t c = 2; c < cells.size(); ++c) {
    const auto h = csv::trim(cells[c]);
    if (h.starts_with("g:")) g.emplace_back(h.substr(2));
    else if (h.starts_with("f:")) f.emplace_back(h.substr(2));
    else throw ParseError("stacked csv: column " + std::to_string(c + 1) + " needs a g: or f: prefix", 1, c + 1);
  }
  return {g, f};
}

fs::path sidecar(const fs::path& coeffs) {
  fs::path p = coeffs;
  p.replace_extension(".std.csv");
  return p;
}

// ---- fit -------------------------------------------------------------------

struct FitArgs {
  std::string input, state_in, state_out, coeffs_out, header_from;
  double lambda = kDefaultLambda;
  bool standardize = false;
  std::size_t threads = default_workers();
  LayoutFlags layout;
};

int cmd_fit(const FitArgs& a) {
  GramState gs;
  std::vector<std::string> models, features;
  std::optional<Standardizer> std_params;
  if (!a.input.empty()) {
    StackedDataset ds = csv::read_stacked(fs::path(a.input), a.layout.options());
    if (a.standardize) {
      std_params = Standardizer::fit(ds);
      ds = std_params->apply(ds);
    }
    gs = parallel_accumulate(ds, a.threads);
    models = ds.model_names();
    features = ds.feature_names();
  } else {
    gs = store::load(a.state_in);
    if (!a.header_from.empty()) {
      std::tie(models, features) = header_names(a.header_from, a.layout.options());
      if (models.size() != gs.mapping.n_models() || features.size() != gs.mapping.n_features())
        throw AlignmentMismatch(fmt::format(
            "header of {} has {} models x {} features but the state is {} x {}", a.header_from,
            models.size(), features.size(), gs.mapping.n_models(), gs.mapping.n_features()));
    } else {
      for (std::size_t i = 0; i < gs.mapping.n_models(); ++i) models.push_back(fmt::format("g{}", i));
      for (std::size_t j = 0; j < gs.mapping.n_features(); ++j) features.push_back(fmt::format("f{}", j));
    }
  }

  const SolvedBlend fit = solve(gs, a.lambda);
  if (!a.state_out.empty()) store::save(gs, a.state_out, a.lambda);
  if (!a.coeffs_out.empty()) {
    write_atomically(a.coeffs_out, [&](std::ostream& out) {
      csv::write_coefficients(out, fit.coeffs, models, features);
    });
    if (std_params)
      write_atomically(sidecar(a.coeffs_out), [&](std::ostream& out) {
        csv::write_standardizer(out, *std_params, features);
      });
  }
  fmt::print("rows {}  models {}  features {}  columns {}\n", gs.n_rows, gs.mapping.n_models(),
             gs.mapping.n_features(), gs.dim());
  fmt::print("lambda {:g}", fit.lambda);
  if (fit.jittered()) fmt::print("  (effective {:g} after jitter)", fit.effective_lambda);
  fmt::print("\ntrain RMSE {:.9f}\n", fit.train_rmse);
  return 0;
}

// ---- cv --------------------------------------------------------------------

struct CvArgs {
  std::string input, features = "forward", report_out, baseline, lambda_grid;
  double lambda = kDefaultLambda;
  std::size_t k = 10;
  std::uint64_t seed = 1;
  LayoutFlags layout;
};

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> grid;
  for (auto cell : csv::split(text)) grid.push_back(csv::parse_number(cell, 0, grid.size() + 1));
  if (grid.empty()) throw ContractViolation("--lambda-grid: no values");
  return grid;
}

std::size_t feature_index(const StackedDataset& ds, std::string_view name) {
  const auto& names = ds.feature_names();
  for (std::size_t j = 0; j < names.size(); ++j)
    if (names[j] == name) return j;
  throw ContractViolation("unknown meta-feature '" + std::string(name) + "'");
}

int cmd_cv(const CvArgs& a) {
  const StackedDataset ds = csv::read_stacked(fs::path(a.input), a.layout.options());
  const cv::FoldPlan plan = cv::make_folds(ds.n_rows(), a.k, a.seed);
  const cv::FoldStatistics stats(ds, plan);
  const bool forward = a.features == "forward";

  std::vector<std::size_t> subset;
  if (forward) {
    subset.resize(ds.n_features());
    std::iota(subset.begin(), subset.end(), 0);
  } else {
    for (auto name : csv::split(a.features)) subset.push_back(feature_index(ds, csv::trim(name)));
  }
  double lambda = a.lambda;
  if (!a.lambda_grid.empty()) lambda = cv::select_lambda(stats, subset, parse_grid(a.lambda_grid));

  cv::CvReport report;
  if (forward) {
    const std::vector<std::size_t> candidates(subset.begin() + 1, subset.end());
    report = cv::forward_select(stats, candidates, lambda, {0});
  } else {
    report = cv::cumulative_report(stats, subset, lambda);
  }

  std::optional<double> merged;
  if (a.baseline == "merged") {
    // Meta-features as plain inputs: everything but the constant.
    std::vector<std::size_t> extra;
    for (std::size_t j : report.selected)
      if (ds.feature_names()[j] != "const") extra.push_back(j);
    merged = cv::merged_baseline_rmse(ds, extra, lambda, plan);
  }

  std::ostringstream text;
  report.write_table(text);
  if (merged) text << fmt::format("merged-inputs baseline OOS RMSE {:.6f}\n", *merged);
  if (!a.report_out.empty()) {
    fs::path base(a.report_out);
    fs::path csv_path = base, txt_path = base;
    csv_path.replace_extension(".csv");
    txt_path.replace_extension(".txt");
    write_atomically(csv_path, [&](std::ostream& out) { report.write_csv(out); });
    write_atomically(txt_path, [&](std::ostream& out) { out << text.str(); });
  }
  std::cout << text.str();
  return 0;
}

// ---- extend ----------------------------------------------------------------

struct ExtendArgs {
  std::string state_in, dataset, new_model, new_feature, state_out;
  LayoutFlags layout;
};

int cmd_extend(const ExtendArgs& a) {
  const GramState gs = store::load(a.state_in);
  const StackedDataset ds = csv::read_stacked(fs::path(a.dataset), a.layout.options());
  const bool model = !a.new_model.empty();
  const csv::ColumnFile col = csv::read_column(fs::path(model ? a.new_model : a.new_feature));
  const auto want = model ? csv::ColumnFile::Kind::Model : csv::ColumnFile::Kind::Feature;
  if (col.kind != want)
    throw ContractViolation(fmt::format("{}: header declares a {} column", model ? a.new_model : a.new_feature,
                                        col.kind == csv::ColumnFile::Kind::Model ? "g: model" : "f: feature"));
  if (col.values.size() != ds.n_rows())
    throw AlignmentMismatch(fmt::format("new column has {} rows but the dataset has {}",
                                        col.values.size(), ds.n_rows()));
  for (std::size_t r = 0; r < ds.n_rows(); ++r)
    if (ds.has_ids() && col.ids[r] != ds.row_ids()[r])
      throw AlignmentMismatch(fmt::format(
          "row {} of the new column has id '{}' but the dataset has '{}'; columns must follow "
          "dataset row order",
          r + 1, col.ids[r], ds.row_ids()[r]));
  const GramState ext = model ? store::extend_with_model(gs, col.values, ds)
                              : store::extend_with_feature(gs, col.values, ds);
  const double hint = store::read(a.state_in).lambda_hint;
  store::save(ext, a.state_out, hint);
  fmt::print("extended {} x {} -> {} x {} ({} rows)\n", gs.mapping.n_models(), gs.mapping.n_features(),
             ext.mapping.n_models(), ext.mapping.n_features(), ext.n_rows);
  return 0;
}

// ---- bench -----------------------------------------------------------------

struct BenchArgs {
  std::string config, out;
  std::optional<std::uint64_t> seed;
  bool quick = false;
};

int cmd_bench(const BenchArgs& a) {
  cf::BenchmarkConfig cfg;
  if (!a.config.empty()) {
    auto in = csv::open_input(a.config);
    cfg = cf::read_config(in);
  }
  if (a.quick) cfg = cf::quick_profile(cfg);
  if (a.seed) cfg.generator.seed = *a.seed;
  const cf::BenchmarkReport rep = cf::run_benchmark(cfg);
  const fs::path out(a.out);
  fs::create_directories(out);
  write_atomically(out / "summary.csv", [&](std::ostream& o) { rep.write_csv(o); });
  write_atomically(out / "summary.txt", [&](std::ostream& o) { rep.write_table(o); });
  write_atomically(out / "forward.csv", [&](std::ostream& o) { rep.result.forward.write_csv(o); });
  write_atomically(out / "config.txt", [&](std::ostream& o) { cf::write_config(o, cfg); });
  rep.write_table(std::cout);
  fmt::print("\nwall time {:.1f} s; reports in {}\n", rep.seconds, out.string());
  return 0;
}

// ---- predict ---------------------------------------------------------------

struct PredictArgs {
  std::string coeffs, input, out;
  LayoutFlags layout;
};

int cmd_predict(const PredictArgs& a) {
  StackedDataset ds = csv::read_stacked(fs::path(a.input), a.layout.options());
  if (const fs::path s = sidecar(a.coeffs); fs::exists(s)) {
    auto in = csv::open_input(s);
    ds = csv::read_standardizer(in, ds.feature_names()).apply(ds);
  }
  const BlendCoefficients c = csv::read_coefficients(fs::path(a.coeffs)).bind(ds);
  auto emit = [&](std::ostream& out) {
    out << "id,prediction\n";
    for (std::size_t r = 0; r < ds.n_rows(); ++r)
      out << (ds.has_ids() ? ds.row_ids()[r] : std::to_string(r)) << ','
          << csv::format_number(blend_predict(c, ds.g(r), ds.f(r))) << '\n';
  };
  if (a.out.empty() || a.out == "-") emit(std::cout);
  else write_atomically(a.out, emit);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Feature-weighted linear stacking"};
  app.require_subcommand(1);

  FitArgs fit;
  auto* c_fit = app.add_subcommand("fit", "Solve for blend coefficients");
  auto* fit_in = c_fit->add_option("--input", fit.input, "Stacked csv (id,y,g:...,f:...)")->check(CLI::ExistingFile);
  auto* fit_state = c_fit->add_option("--state-in", fit.state_in, "Start from a saved state instead of a csv")
                        ->check(CLI::ExistingFile);
  fit_in->excludes(fit_state);
  c_fit->add_option("--header-from", fit.header_from, "With --state-in: take names from this csv's header")
      ->needs(fit_state)
      ->check(CLI::ExistingFile);
  c_fit->add_option("--lambda", fit.lambda, "Ridge penalty")->capture_default_str();
  c_fit->add_option("--state-out", fit.state_out, "Also save the accumulated state");
  c_fit->add_option("--coeffs-out", fit.coeffs_out, "Coefficient csv (model,feature,v_ij)");
  c_fit->add_flag("--standardize", fit.standardize, "Standardize meta-features (parameters go to <coeffs>.std.csv)")
      ->excludes(fit_state);
  c_fit->add_option("--threads", fit.threads, "Accumulation workers")->capture_default_str()->check(CLI::PositiveNumber);
  fit.layout.add_to(c_fit);

  CvArgs cva;
  auto* c_cv = app.add_subcommand("cv", "Cross-validated RMSE and forward meta-feature selection");
  c_cv->add_option("--input", cva.input, "Stacked csv")->required()->check(CLI::ExistingFile);
  auto* cv_lambda = c_cv->add_option("--lambda", cva.lambda, "Ridge penalty")->capture_default_str();
  c_cv->add_option("--lambda-grid", cva.lambda_grid, "Comma-separated lambdas; the CV-best one is used")
      ->excludes(cv_lambda);
  c_cv->add_option("-k,--folds", cva.k, "Number of folds")->capture_default_str();
  c_cv->add_option("--seed", cva.seed, "Fold assignment seed")->capture_default_str();
  c_cv->add_option("--features", cva.features, "'forward' or a comma-separated feature list")->capture_default_str();
  c_cv->add_option("--baseline", cva.baseline, "Also report a baseline")->check(CLI::IsMember({"merged"}));
  c_cv->add_option("--report-out", cva.report_out, "Write <path>.csv and <path>.txt");
  cva.layout.add_to(c_cv);

  ExtendArgs ext;
  auto* c_ext = app.add_subcommand("extend", "Add a model or meta-feature to a saved state");
  c_ext->add_option("--state-in", ext.state_in, "State built from --dataset")->required()->check(CLI::ExistingFile);
  c_ext->add_option("--dataset", ext.dataset, "The stacked csv the state was built from")
      ->required()
      ->check(CLI::ExistingFile);
  auto* nm = c_ext->add_option("--new-model", ext.new_model, "csv with header id,g:<name>")->check(CLI::ExistingFile);
  auto* nf = c_ext->add_option("--new-feature", ext.new_feature, "csv with header id,f:<name>")->check(CLI::ExistingFile);
  nm->excludes(nf);
  c_ext->add_option("--state-out", ext.state_out, "Extended state")->required();
  ext.layout.add_to(c_ext);

  BenchArgs bench;
  auto* c_bench = app.add_subcommand("bench", "Run the collaborative-filtering blending benchmark");
  c_bench->add_option("--config", bench.config, "key = value config file")->check(CLI::ExistingFile);
  c_bench->add_option("--out", bench.out, "Output directory (created if absent)")->required();
  c_bench->add_option("--seed", bench.seed, "Override the generator seed");
  c_bench->add_flag("--quick", bench.quick, "Small profile for smoke runs");

  PredictArgs pred;
  auto* c_pred = app.add_subcommand("predict", "Apply a coefficient file to a stacked csv");
  c_pred->add_option("--coeffs", pred.coeffs, "Coefficient csv from fit")->required()->check(CLI::ExistingFile);
  c_pred->add_option("--input", pred.input, "Stacked csv")->required()->check(CLI::ExistingFile);
  c_pred->add_option("--out", pred.out, "Output csv (default stdout)");
  pred.layout.add_to(c_pred);

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_fit->parsed()) {
      if (fit.input.empty() && fit.state_in.empty())
        throw CLI::RequiredError("--input or --state-in");
      return cmd_fit(fit);
    }
    if (c_cv->parsed()) return cmd_cv(cva);
    if (c_ext->parsed()) {
      if (ext.new_model.empty() && ext.new_feature.empty())
        throw CLI::RequiredError("--new-model or --new-feature");
      return cmd_extend(ext);
    }
    if (c_bench->parsed()) return cmd_bench(bench);
    if (c_pred->parsed()) return cmd_predict(pred);
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const SingularSystem& e) {
    std::cerr << fmt::format("fwls: error: singular system at lambda {:g}: {}\n", e.lambda(), e.what());
    return 1;
  } catch (const ParseError& e) {
    std::cerr << "fwls: error: " << e.what();
    if (e.line() > 0) std::cerr << " (line " << e.line() << (e.column() ? fmt::format(", column {}", e.column()) : "") << ")";
    std::cerr << '\n';
    return 1;
  } catch (const AlignmentMismatch& e) {
    std::cerr << "fwls: error: " << e.what()
              << "\n  the new column would be paired with the wrong examples; rebuild the state "
                 "from the dataset you are extending\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "fwls: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
