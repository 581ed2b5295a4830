// sqda: command-line front end for the SDAR library.
//
//   sqda simulate --model 2 --p 100 --reps 20 --out table.csv
//   sqda fit      --data train.csv --label-col y --cv --model-out m.json
//   sqda predict  --model m.json --data test.csv --out labels.csv
//   sqda bench    --spec spec.json --out table.csv
//   sqda tune     --data train.csv --label-col y
//
// Exit codes: 0 ok, 2 validation error, 3 numerical failure, 4 I/O error.

#include "sqda/sqda.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <sstream>

namespace {

using namespace sqda;

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Validation: return kExitValidation;
    case ErrorCategory::Numerical: return kExitNumerical;
    case ErrorCategory::Io: return kExitIo;
  }
  return kExitValidation;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    write_file(path, text);
  }
}

void report_run(const ExperimentReport& rep) {
  std::fprintf(stderr, "runtime %.2fs, %d capped solves\n", rep.runtime_seconds, rep.nonconverged_solves);
  for (std::size_t r = 0; r < rep.replications.size(); ++r) {
    for (const auto& f : rep.replications[r].failures) std::fprintf(stderr, "replication %zu: %s\n", r, f.c_str());
  }
}

struct SimulateArgs {
  std::string model = "2";
  Index p = 100;
  std::optional<Index> n1, n2, n_test;
  std::optional<int> reps;
  std::uint64_t seed = 1;
  std::string methods;
  std::string out;
  std::string format = "csv";
};

int run_simulate(const SimulateArgs& a) {
  ExperimentSpec s = default_spec(a.model, a.p);
  if (a.n1) s.n1 = *a.n1;
  if (a.n2) s.n2 = *a.n2;
  if (a.n_test) s.n_test = *a.n_test;
  if (a.reps) s.replications = *a.reps;
  s.seed = a.seed;
  if (!a.methods.empty()) s.methods = split_list(a.methods);
  const TableFormat fmt = parse_table_format(a.format);
  const ExperimentReport rep = run_experiment_report(s);
  emit(a.out, emit_table(rep.table, fmt));
  report_run(rep);
  return 0;
}

struct FitArgs {
  std::string data;
  std::string label_col;
  Index screen_top = 0;
  std::optional<double> lambda1, lambda2;
  bool cv = false;
  std::string model_out;
};

int run_fit(const FitArgs& a) {
  const IngestedData in = ingest_csv(a.data, a.label_col, a.screen_top);
  const LabeledDataset& d = in.data;
  const auto classes = d.classes();
  const Index p = d.cols();
  Index n_small = d.rows();
  for (int k : classes) n_small = std::min(n_small, d.count(k));
  FitConfig cfg = default_fit_config(p, n_small, n_small);
  if (a.cv) {
    detail::require(classes.size() == 2, ErrorKind::InvalidArgument, "--cv supports two classes only");
    detail::require(!a.lambda1 && !a.lambda2, ErrorKind::InvalidArgument, "--cv and explicit lambdas conflict");
    ExperimentSpec spec = default_spec("csv", p);
    const TuneResult t = tune_lambdas(d, spec);
    cfg.lambda1 = t.lambda1;
    cfg.lambda2 = t.lambda2;
    std::fprintf(stderr, "cv error %.4f over %d valid pairs\n", t.cv_error, t.valid_candidates);
  }
  if (a.lambda1) cfg.lambda1 = *a.lambda1;
  if (a.lambda2) cfg.lambda2 = *a.lambda2;
  StoredModel sm;
  sm.feature_names = in.feature_names;
  sm.class_names = in.class_names;
  if (classes.size() > 2) {
    sm.model = fit_multigroup(d, cfg);
  } else {
    sm.model = fit_sdar(d, cfg);
  }
  save_model(sm, a.model_out);
  std::fprintf(stderr, "lambda1 %s lambda2 %s, %lld features\n", format_shortest(cfg.lambda1).c_str(),
               format_shortest(cfg.lambda2).c_str(), static_cast<long long>(p));
  return 0;
}

int run_predict(const std::string& model_path, const std::string& data_path, const std::string& out) {
  const StoredModel sm = load_model(model_path);
  const Matrix x = read_features_csv(read_file(data_path), sm.feature_names);
  const std::vector<int> labels = predict(sm.model, x);
  std::string text = "label\n";
  for (int k : labels) {
    const auto kk = static_cast<std::size_t>(k - 1);
    text += kk < sm.class_names.size() ? detail::csv_escape(sm.class_names[kk]) : std::to_string(k);
    text += '\n';
  }
  emit(out, text);
  return 0;
}

int run_bench_cmd(const std::string& spec_path, const std::string& out) {
  const ExperimentSpec s = spec_from_json(read_file(spec_path));
  const ExperimentReport rep = run_bench(s);
  emit(out, emit_table(rep.table, TableFormat::Csv));
  report_run(rep);
  return 0;
}

struct TuneArgs {
  std::string data;
  std::string label_col;
  double grid_scale = 2.0;
  int grid_max_k = 15;
  int folds = 5;
};

int run_tune(const TuneArgs& a) {
  const IngestedData in = ingest_csv(a.data, a.label_col);
  ExperimentSpec s = default_spec("csv", in.data.cols());
  s.grid1 = LambdaGrid::standard(a.grid_scale, a.grid_max_k);
  s.grid2 = s.grid1;
  s.cv_folds = a.folds;
  detail::require(a.grid_max_k >= 1, ErrorKind::InvalidArgument, "--grid-max-k must be >= 1");
  detail::require(a.grid_scale > 0, ErrorKind::InvalidArgument, "--grid-scale must be positive");
  detail::require(a.folds >= 2, ErrorKind::InvalidArgument, "--folds must be >= 2");
  const TuneResult t = tune_lambdas(in.data, s);
  Json j{{"lambda1", jsonio::num(t.lambda1)},
         {"lambda2", jsonio::num(t.lambda2)},
         {"multiplier1", jsonio::num(t.multiplier1)},
         {"multiplier2", jsonio::num(t.multiplier2)},
         {"cv_error", jsonio::num(t.cv_error)},
         {"valid_candidates", t.valid_candidates}};
  std::cout << j.dump(1) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse quadratic discriminant analysis (SDAR / CSDAR)"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "replicated error table for a synthetic model");
  simulate->add_option("--model", sim.model, "1-6, impossibility-1 or impossibility-2")->required();
  simulate->add_option("--p", sim.p, "dimension")->required();
  simulate->add_option("--n1", sim.n1, "class-1 training size");
  simulate->add_option("--n2", sim.n2, "class-2 training size");
  simulate->add_option("--n-test", sim.n_test, "test points per replication");
  simulate->add_option("--reps", sim.reps, "replications");
  simulate->add_option("--seed", sim.seed, "master seed");
  simulate->add_option("--methods", sim.methods, "comma list: sdar,csdar,lda_plugin,qda_plugin,oracle,...");
  simulate->add_option("--out", sim.out, "output file (stdout when omitted)");
  simulate->add_option("--format", sim.format, "csv or markdown");

  FitArgs fit;
  auto* fitc = app.add_subcommand("fit", "fit SDAR (or the multi-group rule) on a CSV file");
  fitc->add_option("--data", fit.data)->required();
  fitc->add_option("--label-col", fit.label_col)->required();
  fitc->add_option("--screen-top", fit.screen_top, "keep the top-k features by |Welch t|");
  fitc->add_option("--lambda1", fit.lambda1);
  fitc->add_option("--lambda2", fit.lambda2);
  fitc->add_flag("--cv", fit.cv, "tune both lambdas by 5-fold CV");
  fitc->add_option("--model-out", fit.model_out)->required();

  std::string pred_model, pred_data, pred_out;
  auto* predictc = app.add_subcommand("predict", "label rows of a CSV file with a saved model");
  predictc->add_option("--model", pred_model)->required();
  predictc->add_option("--data", pred_data)->required();
  predictc->add_option("--out", pred_out);

  std::string bench_spec, bench_out;
  auto* benchc = app.add_subcommand("bench", "run an experiment spec file");
  benchc->add_option("--spec", bench_spec, "JSON spec file")->required();
  benchc->add_option("--out", bench_out);

  TuneArgs tune;
  auto* tunec = app.add_subcommand("tune", "cross-validate lambda1, lambda2 on a CSV file");
  tunec->add_option("--data", tune.data)->required();
  tunec->add_option("--label-col", tune.label_col)->required();
  tunec->add_option("--grid-scale", tune.grid_scale, "grid divisor: lambda = k / scale * sqrt(log p / n)");
  tunec->add_option("--grid-max-k", tune.grid_max_k);
  tunec->add_option("--folds", tune.folds);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  }

  try {
    if (*simulate) return run_simulate(sim);
    if (*fitc) return run_fit(fit);
    if (*predictc) return run_predict(pred_model, pred_data, pred_out);
    if (*benchc) return run_bench_cmd(bench_spec, bench_out);
    if (*tunec) return run_tune(tune);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code(e.category());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumerical;
  }
  return 0;
}
