#pragma once

// Benchmark harness: cross-validated tuning on the lambda grids, plug-in
// baselines and replicated error evaluation.

#include "sqda/classify.hpp"
#include "sqda/copula.hpp"
#include "sqda/datagen.hpp"
#include "sqda/estimate.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace sqda {

/// lambda_k = (k / divisor) * sqrt(log p / n) for each multiplier k.
struct LambdaGrid {
  std::vector<double> multipliers;
  double divisor = 2.0;

  static LambdaGrid standard(double divisor, int max_k = 15) {
    LambdaGrid g;
    g.divisor = divisor;
    for (int k = 1; k <= max_k; ++k) g.multipliers.push_back(k);
    return g;
  }

  double value(std::size_t i, double scale) const { return multipliers[i] / divisor * scale; }
  std::size_t size() const { return multipliers.size(); }
};

/// Work budget for the D program inside the harness. A capped solve still
/// returns a strictly feasible iterate.
inline SolverConfig bench_graph_solver() {
  SolverConfig s;
  s.max_outer_iters = 20;
  s.cg_max_iters = 20;
  s.duality_gap_tol = 1e-2;
  s.cg_tol = 1e-2;
  return s;
}

inline const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> m = {"sdar", "csdar", "lda_plugin", "qda_plugin",
                                             "oracle", "plugin_mean", "plugin_diag"};
  return m;
}

struct ExperimentSpec {
  std::string model = "2";  // "1".."6", "impossibility-1", "impossibility-2" or "csv"
  Index p = 100;
  std::string data_path;     // csv problems only
  std::string label_column;  // csv problems only
  int screen_top = 0;        // csv problems only; 0 keeps every feature
  Index n1 = 200;
  Index n2 = 200;
  Index n_test = 200;
  int replications = 100;
  LambdaGrid grid1 = LambdaGrid::standard(2.0);
  LambdaGrid grid2 = LambdaGrid::standard(2.0);
  int cv_folds = 5;
  std::uint64_t seed = 1;
  std::vector<std::string> methods = {"sdar", "oracle"};
  SparsityOptions sparsity;
  SolverConfig graph_solver = bench_graph_solver();
  SolverConfig direction_solver;
  int threads = 0;  // 0 defers to SDAR_THREADS, then hardware concurrency

  bool is_csv() const { return model == "csv"; }

  int model_id() const {
    if (model == "impossibility-1") return -1;
    if (model == "impossibility-2") return -2;
    return std::atoi(model.c_str());
  }

  void check() const {
    using detail::require;
    const int id = model_id();
    require(is_csv() || (id >= 1 && id <= 6) || id == -1 || id == -2, ErrorKind::InvalidArgument,
            "unknown model '" + model + "'");
    require(is_csv() ? !data_path.empty() && !label_column.empty() : p >= 1, ErrorKind::InvalidArgument,
            "csv problems need data_path and label_column; synthetic ones need p >= 1");
    require(replications >= 1, ErrorKind::InvalidArgument, "replications must be >= 1");
    require(n_test >= 1 || is_csv(), ErrorKind::InvalidArgument, "n_test must be >= 1");
    require(is_csv() || (n1 >= 2 && n2 >= 2), ErrorKind::InvalidArgument, "n1, n2 must be >= 2");
    require(grid1.size() > 0 && grid2.size() > 0, ErrorKind::InvalidArgument, "lambda grids must be nonempty");
    require(grid1.divisor > 0 && grid2.divisor > 0, ErrorKind::InvalidArgument, "grid divisors must be positive");
    for (double k : grid1.multipliers) require(k >= 0, ErrorKind::InvalidArgument, "negative multiplier");
    for (double k : grid2.multipliers) require(k >= 0, ErrorKind::InvalidArgument, "negative multiplier");
    require(cv_folds >= 2, ErrorKind::InvalidArgument, "cv_folds must be >= 2");
    require(!methods.empty(), ErrorKind::InvalidArgument, "no methods requested");
    for (const auto& m : methods) {
      require(std::find(known_methods().begin(), known_methods().end(), m) != known_methods().end(),
              ErrorKind::InvalidArgument, "unknown method '" + m + "'");
    }
    graph_solver.check();
    direction_solver.check();
  }
};

/// Paper defaults: k/4 grids for Model 2 (and its copula twin), k/2 elsewhere.
inline ExperimentSpec default_spec(const std::string& model, Index p) {
  ExperimentSpec s;
  s.model = model;
  s.p = p;
  const double div = (model == "2" || model == "5") ? 4.0 : 2.0;
  s.grid1 = LambdaGrid::standard(div);
  s.grid2 = LambdaGrid::standard(div);
  if (model == "impossibility-1") {
    s.methods = {"plugin_mean", "oracle"};
    s.n_test = 100;
  } else if (model == "impossibility-2") {
    s.methods = {"plugin_diag", "oracle"};
    s.n_test = 100;
  } else if (model == "4" || model == "5" || model == "6") {
    s.methods = {"csdar", "oracle"};
  }
  return s;
}

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("SDAR_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs body(i) for i in [0, count) on up to `threads` workers. Results must
/// be written to per-index slots; the first exception is rethrown.
inline void parallel_for(int count, int threads, const std::function<void(int)>& body) {
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// ---------------------------------------------------------------------------
// Cross-validation
// ---------------------------------------------------------------------------

/// Stratified fold ids: each class is shuffled and dealt round-robin.
inline std::vector<int> stratified_folds(const std::vector<int>& labels, int folds, std::uint64_t seed) {
  std::vector<int> out(labels.size(), 0);
  std::vector<int> ids(labels.begin(), labels.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  Rng rng(seed);
  for (int id : ids) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == id) members.push_back(i);
    }
    for (std::size_t i = members.size(); i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(members[i - 1], members[pick(rng)]);
    }
    for (std::size_t i = 0; i < members.size(); ++i) out[members[i]] = static_cast<int>(i % folds);
  }
  return out;
}

/// The ingredients of one two-class fit plus held-out points, already in
/// the space the discriminant is evaluated in.
struct FoldProblem {
  Matrix sigma1;
  Matrix sigma2;
  Vector mu1;
  Vector mu2;
  double log_prior_ratio = 0.0;
  Index n_small = 0;  // min class size, sets the lambda scale
  Matrix validation;
  std::vector<int> labels;
};

struct TuneResult {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double multiplier1 = 0.0;
  double multiplier2 = 0.0;
  double cv_error = 0.0;
  int valid_candidates = 0;
  int nonconverged_solves = 0;
};

/// Grid search over the Cartesian product. Each fold solves one D program
/// per lambda1 and one beta program per lambda2; every pair is then scored
/// from cached quadratic and linear parts. Candidates whose log-det term
/// fails in any fold are dropped. Ties go to the larger lambda1, then the
/// larger lambda2.
inline TuneResult grid_search(const std::vector<FoldProblem>& folds, Index p, const LambdaGrid& g1,
                              const LambdaGrid& g2, const SolverConfig& graph_solver,
                              const SolverConfig& direction_solver) {
  const std::size_t a = g1.size();
  const std::size_t b = g2.size();
  std::vector<long long> wrong(a * b, 0);
  std::vector<char> valid(a * b, 1);
  long long total = 0;
  TuneResult res;
  for (const FoldProblem& f : folds) {
    const double scale = lambda_scale(p, f.n_small);
    const Index nv = f.validation.rows();
    total += nv;
    const Matrix c = f.validation.rowwise() - f.mu1.transpose();
    const Vector mid = 0.5 * (f.mu1 + f.mu2);
    Matrix quad(nv, static_cast<Index>(a));  // (z-mu1)'D(z-mu1) - logdet
    std::vector<char> d_ok(a, 1);
    for (std::size_t i = 0; i < a; ++i) {
      GraphEstimate g = estimate_differential_graph(f.sigma1, f.sigma2, g1.value(i, scale), graph_solver);
      if (!g.report.converged) ++res.nonconverged_solves;
      try {
        const double ld = logdet_term(g.d_hat, f.sigma1);
        quad.col(static_cast<Index>(i)) = (c * g.d_hat).cwiseProduct(c).rowwise().sum().array() - ld;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::NonPositiveEigenvalue) throw;
        d_ok[i] = 0;
      }
    }
    Matrix lin(nv, static_cast<Index>(b));  // -2 beta'(z - mid)
    const Matrix centered = f.validation.rowwise() - mid.transpose();
    for (std::size_t j = 0; j < b; ++j) {
      DirectionEstimate d = estimate_direction(f.sigma2, f.mu2 - f.mu1, g2.value(j, scale), direction_solver);
      lin.col(static_cast<Index>(j)) = -2.0 * (centered * d.beta_hat);
    }
    for (std::size_t i = 0; i < a; ++i) {
      for (std::size_t j = 0; j < b; ++j) {
        const std::size_t cell = i * b + j;
        if (!d_ok[i]) {
          valid[cell] = 0;
          continue;
        }
        long long w = 0;
        for (Index r = 0; r < nv; ++r) {
          const double q = quad(r, static_cast<Index>(i)) + lin(r, static_cast<Index>(j)) + f.log_prior_ratio;
          w += label_from(q) != f.labels[static_cast<std::size_t>(r)];
        }
        wrong[cell] += w;
      }
    }
  }
  std::optional<std::size_t> best;
  for (std::size_t cell = 0; cell < a * b; ++cell) {
    if (!valid[cell]) continue;
    ++res.valid_candidates;
    if (!best) {
      best = cell;
      continue;
    }
    const std::size_t bi = *best / b, bj = *best % b, i = cell / b, j = cell % b;
    const bool better = wrong[cell] < wrong[*best] ||
                        (wrong[cell] == wrong[*best] &&
                         (g1.multipliers[i] > g1.multipliers[bi] ||
                          (g1.multipliers[i] == g1.multipliers[bi] && g2.multipliers[j] > g2.multipliers[bj])));
    if (better) best = cell;
  }
  if (!best) throw Error(ErrorKind::AllCandidatesInvalid, "every lambda pair gave a non-positive log-det term");
  res.multiplier1 = g1.multipliers[*best / b] / g1.divisor;
  res.multiplier2 = g2.multipliers[*best % b] / g2.divisor;
  res.cv_error = total > 0 ? static_cast<double>(wrong[*best]) / static_cast<double>(total) : 0.0;
  return res;
}

namespace detail {

inline std::pair<LabeledDataset, LabeledDataset> split_fold(const LabeledDataset& data, const std::vector<int>& fold,
                                                            int f) {
  std::vector<Index> tr, va;
  for (std::size_t i = 0; i < fold.size(); ++i) (fold[i] == f ? va : tr).push_back(static_cast<Index>(i));
  return {data.subset(tr), data.subset(va)};
}

inline TuneResult finish_tune(TuneResult r, Index p, Index n_small) {
  const double scale = lambda_scale(p, n_small);
  r.lambda1 = r.multiplier1 * scale;
  r.lambda2 = r.multiplier2 * scale;
  return r;
}

inline bool singleton(const ExperimentSpec& spec) { return spec.grid1.size() == 1 && spec.grid2.size() == 1; }

inline TuneResult singleton_result(const ExperimentSpec& spec, Index p, Index n_small) {
  TuneResult r;
  r.multiplier1 = spec.grid1.multipliers[0] / spec.grid1.divisor;
  r.multiplier2 = spec.grid2.multipliers[0] / spec.grid2.divisor;
  r.valid_candidates = 1;
  return finish_tune(r, p, n_small);
}

}  // namespace detail

/// CV tuning for SDAR. The chosen multipliers are rescaled with the full
/// training data's min class size.
inline TuneResult tune_lambdas(const LabeledDataset& data, const ExperimentSpec& spec, std::uint64_t fold_seed) {
  require_two_classes(data);
  const Index p = data.cols();
  const Index n_small = std::min(data.count(1), data.count(2));
  if (detail::singleton(spec)) return detail::singleton_result(spec, p, n_small);
  const std::vector<int> fold = stratified_folds(data.labels, spec.cv_folds, fold_seed);
  std::vector<FoldProblem> problems;
  for (int f = 0; f < spec.cv_folds; ++f) {
    auto [tr, va] = detail::split_fold(data, fold, f);
    const ClassMoments m1 = class_moments(tr, 1);
    const ClassMoments m2 = class_moments(tr, 2);
    FoldProblem fp;
    fp.sigma1 = m1.sigma_hat;
    fp.sigma2 = m2.sigma_hat;
    fp.mu1 = m1.mu_hat;
    fp.mu2 = m2.mu_hat;
    fp.log_prior_ratio = std::log(m1.pi_hat / m2.pi_hat);
    fp.n_small = std::min(m1.n_k, m2.n_k);
    fp.validation = std::move(va.features);
    fp.labels = std::move(va.labels);
    problems.push_back(std::move(fp));
  }
  TuneResult r = grid_search(problems, p, spec.grid1, spec.grid2, spec.graph_solver, spec.direction_solver);
  return detail::finish_tune(r, p, n_small);
}

inline TuneResult tune_lambdas(const LabeledDataset& data, const ExperimentSpec& spec) {
  return tune_lambdas(data, spec, derive_seed(spec.seed, 3, 0));
}

/// CV tuning for CSDAR; every fold re-estimates the transforms from its
/// own training part.
inline TuneResult tune_lambdas_csdar(const LabeledDataset& data, const ExperimentSpec& spec,
                                     std::uint64_t fold_seed, const CopulaOptions& opt = {}) {
  require_two_classes(data);
  const Index p = data.cols();
  const Index n_small = std::min(data.count(1), data.count(2));
  if (detail::singleton(spec)) return detail::singleton_result(spec, p, n_small);
  const std::vector<int> fold = stratified_folds(data.labels, spec.cv_folds, fold_seed);
  std::vector<FoldProblem> problems;
  for (int f = 0; f < spec.cv_folds; ++f) {
    auto [tr, va] = detail::split_fold(data, fold, f);
    CopulaMoments cm = copula_moments(tr.rows_of(1), tr.rows_of(2), opt);
    CopulaModel shell;
    shell.ecdf1 = cm.ecdf1;
    shell.ecdf2 = cm.ecdf2;
    shell.mu2_hat = cm.mu2_hat;
    shell.sigma2_jj_hat = cm.sigma2_jj_hat;
    shell.n1 = cm.n1;
    shell.n2 = cm.n2;
    FoldProblem fp;
    fp.sigma1 = cm.sigma_tilde1;
    fp.sigma2 = cm.sigma_tilde2;
    fp.mu1 = Vector::Zero(p);
    fp.mu2 = cm.mu2_hat;
    fp.log_prior_ratio = std::log(static_cast<double>(cm.n1) / static_cast<double>(cm.n2));
    fp.n_small = std::min(cm.n1, cm.n2);
    fp.validation = copula_transform(va.features, shell);
    fp.labels = std::move(va.labels);
    problems.push_back(std::move(fp));
  }
  TuneResult r = grid_search(problems, p, spec.grid1, spec.grid2, spec.graph_solver, spec.direction_solver);
  return detail::finish_tune(r, p, n_small);
}

// ---------------------------------------------------------------------------
// Plug-in baselines
// ---------------------------------------------------------------------------

namespace detail {

struct PlugInverse {
  Matrix inverse;
  double logdet = 0.0;  // log (pseudo-)determinant of the matrix actually inverted
};

// Ridge 1e-6 when p < n_min, Moore-Penrose pseudo-inverse otherwise.
inline PlugInverse plugin_inverse(const Matrix& s, Index n_min) {
  const Index p = s.rows();
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(s));
  Vector ev = es.eigenvalues();
  Vector inv(p);
  PlugInverse out;
  if (p < n_min) {
    ev.array() += 1e-6;
    inv = ev.cwiseInverse();
    out.logdet = ev.array().log().sum();
  } else {
    const double cut = 1e-10 * std::max(1.0, ev.cwiseAbs().maxCoeff());
    for (Index i = 0; i < p; ++i) {
      if (ev[i] > cut) {
        inv[i] = 1.0 / ev[i];
        out.logdet += std::log(ev[i]);
      } else {
        inv[i] = 0.0;
      }
    }
  }
  out.inverse = symmetrized(es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose());
  return out;
}

}  // namespace detail

/// Pooled-covariance LDA plug-in (D = 0).
inline SdarModel fit_lda_plugin(const LabeledDataset& data) {
  require_two_classes(data);
  const ClassMoments m1 = class_moments(data, 1);
  const ClassMoments m2 = class_moments(data, 2);
  const double n = static_cast<double>(m1.n_k + m2.n_k);
  const Matrix pooled = (static_cast<double>(m1.n_k) * m1.sigma_hat + static_cast<double>(m2.n_k) * m2.sigma_hat) / n;
  const auto inv = detail::plugin_inverse(pooled, std::min(m1.n_k, m2.n_k));
  SdarModel m;
  m.mu1_hat = m1.mu_hat;
  m.mu2_hat = m2.mu_hat;
  m.d_hat = Matrix::Zero(data.cols(), data.cols());
  m.beta_hat = inv.inverse * (m2.mu_hat - m1.mu_hat);
  m.log_prior_ratio = 2.0 * std::log(m1.pi_hat / m2.pi_hat);
  return m;
}

/// Per-class QDA plug-in; the log-det term is log|S1| - log|S2| of the
/// matrices actually inverted.
inline SdarModel fit_qda_plugin(const LabeledDataset& data) {
  require_two_classes(data);
  const ClassMoments m1 = class_moments(data, 1);
  const ClassMoments m2 = class_moments(data, 2);
  const Index n_min = std::min(m1.n_k, m2.n_k);
  const auto i1 = detail::plugin_inverse(m1.sigma_hat, n_min);
  const auto i2 = detail::plugin_inverse(m2.sigma_hat, n_min);
  SdarModel m;
  m.mu1_hat = m1.mu_hat;
  m.mu2_hat = m2.mu_hat;
  m.d_hat = detail::symmetrized(i2.inverse - i1.inverse);
  m.beta_hat = i2.inverse * (m2.mu_hat - m1.mu_hat);
  m.logdet_term = i1.logdet - i2.logdet;
  m.log_prior_ratio = 2.0 * std::log(m1.pi_hat / m2.pi_hat);
  return m;
}

/// Known covariances, estimated means (the Table 1 plug-in rule).
inline SdarModel fit_plugin_mean(const LabeledDataset& data, const GaussianPairParams& theta) {
  require_two_classes(data);
  SdarModel m = oracle_model(theta);
  const Vector mu1 = data.rows_of(1).colwise().mean();
  const Vector mu2 = data.rows_of(2).colwise().mean();
  m.mu1_hat = mu1;
  m.mu2_hat = mu2;
  m.beta_hat = detail::spd_inverse(theta.sigma2) * (mu2 - mu1);
  return m;
}

/// Known means, estimated diagonal variances (the Table 2 plug-in rule).
inline SdarModel fit_plugin_diag(const LabeledDataset& data, const GaussianPairParams& theta) {
  require_two_classes(data);
  auto variances = [](const Matrix& x, const Vector& mu) -> Vector {
    return (x.rowwise() - mu.transpose()).array().square().colwise().mean().transpose();
  };
  const Vector v1 = variances(data.rows_of(1), theta.mu1);
  const Vector v2 = variances(data.rows_of(2), theta.mu2);
  detail::require((v1.array() > 0).all() && (v2.array() > 0).all(), ErrorKind::DegenerateVariance,
                  "a plug-in variance is zero");
  SdarModel m;
  m.mu1_hat = theta.mu1;
  m.mu2_hat = theta.mu2;
  m.d_hat = Matrix((v2.cwiseInverse() - v1.cwiseInverse()).asDiagonal());
  m.beta_hat = v2.cwiseInverse().cwiseProduct(theta.mu2 - theta.mu1);
  m.logdet_term = v1.array().log().sum() - v2.array().log().sum();
  m.log_prior_ratio = 2.0 * std::log(theta.pi1 / theta.pi2);
  return m;
}

// ---------------------------------------------------------------------------
// Replicated experiments
// ---------------------------------------------------------------------------

struct ErrorCell {
  std::string model;
  Index p = 0;
  std::string method;
  double mean = 0.0;
  double sd = 0.0;
  int reps = 0;    // successful replications
  int failed = 0;  // replications that raised a numerical error
};

struct ErrorTable {
  std::vector<ErrorCell> rows;
};

/// Per-method record for one replication.
struct ReplicationResult {
  std::vector<std::optional<double>> errors;  // one per method; empty when the cell failed
  std::vector<std::string> failures;
  std::vector<std::pair<double, double>> lambdas;  // tuned (lambda1, lambda2) per method; zeros when untuned
  int nonconverged = 0;
};

struct ExperimentReport {
  ErrorTable table;
  std::vector<ReplicationResult> replications;
  double runtime_seconds = 0.0;
  int nonconverged_solves = 0;
};

namespace detail {

inline SyntheticProblem problem_for(const ExperimentSpec& spec, int rep) {
  const std::uint64_t s = derive_seed(spec.seed, 0, static_cast<std::uint64_t>(rep));
  const int id = spec.model_id();
  if (id < 0) return gen_impossibility(-id, spec.p, s);
  return gen_problem(id, spec.p, s, spec.sparsity);
}

// Latent-space view of raw observations for the oracle rule.
inline Matrix to_latent(const SyntheticProblem& pr, const Matrix& x) {
  if (pr.transforms.empty()) return x;
  Matrix w = x;
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) w(i, j) = invert_transform(pr.transforms[static_cast<std::size_t>(j)], x(i, j));
  }
  return w;
}

inline std::vector<int> run_method(const std::string& method, const ExperimentSpec& spec, const SyntheticProblem& pr,
                                   const LabeledDataset& train, const Matrix& test, std::uint64_t fold_seed,
                                   int& nonconverged, std::pair<double, double>* tuned = nullptr) {
  if (method == "oracle") return classify_oracle(to_latent(pr, test), pr.theta);
  if (method == "lda_plugin") return classify_sdar(test, fit_lda_plugin(train));
  if (method == "qda_plugin") return classify_sdar(test, fit_qda_plugin(train));
  if (method == "plugin_mean") return classify_sdar(test, fit_plugin_mean(train, pr.theta));
  if (method == "plugin_diag") return classify_sdar(test, fit_plugin_diag(train, pr.theta));
  FitConfig cfg;
  cfg.solver = spec.direction_solver;
  if (method == "sdar") {
    const TuneResult t = tune_lambdas(train, spec, fold_seed);
    nonconverged += t.nonconverged_solves;
    if (tuned) *tuned = {t.lambda1, t.lambda2};
    const ClassMoments m1 = class_moments(train, 1);
    const ClassMoments m2 = class_moments(train, 2);
    GraphEstimate g = estimate_differential_graph(m1.sigma_hat, m2.sigma_hat, t.lambda1, spec.graph_solver);
    if (!g.report.converged) ++nonconverged;
    DirectionEstimate b = estimate_direction(m2.sigma_hat, m2.mu_hat - m1.mu_hat, t.lambda2, spec.direction_solver);
    const SdarModel model = assemble_sdar(m1.mu_hat, m2.mu_hat, m1.sigma_hat, std::move(g.d_hat), std::move(b.beta_hat),
                                          std::log(m1.pi_hat / m2.pi_hat), t.lambda1, t.lambda2);
    return classify_sdar(test, model);
  }
  // csdar
  const TuneResult t = tune_lambdas_csdar(train, spec, fold_seed);
  nonconverged += t.nonconverged_solves;
  if (tuned) *tuned = {t.lambda1, t.lambda2};
  CopulaMoments cm = copula_moments(train.rows_of(1), train.rows_of(2));
  const Index p = train.cols();
  GraphEstimate g = estimate_differential_graph(cm.sigma_tilde1, cm.sigma_tilde2, t.lambda1, spec.graph_solver);
  if (!g.report.converged) ++nonconverged;
  DirectionEstimate b = estimate_direction(cm.sigma_tilde2, cm.mu2_hat, t.lambda2, spec.direction_solver);
  CopulaModel model;
  model.sdar = assemble_sdar(Vector::Zero(p), cm.mu2_hat, cm.sigma_tilde1, std::move(g.d_hat), std::move(b.beta_hat),
                             std::log(static_cast<double>(cm.n1) / static_cast<double>(cm.n2)), t.lambda1, t.lambda2);
  model.ecdf1 = std::move(cm.ecdf1);
  model.ecdf2 = std::move(cm.ecdf2);
  model.mu2_hat = std::move(cm.mu2_hat);
  model.sigma2_jj_hat = std::move(cm.sigma2_jj_hat);
  model.n1 = cm.n1;
  model.n2 = cm.n2;
  return classify_csdar(test, model);
}

/// `test_seed` overrides the test stream; only used to probe stream isolation.
inline ReplicationResult run_replication(const ExperimentSpec& spec, int rep,
                                         std::optional<std::uint64_t> test_seed = std::nullopt) {
  const auto r = static_cast<std::uint64_t>(rep);
  const SyntheticProblem pr = problem_for(spec, rep);
  const LabeledDataset train = sample(pr, spec.n1, spec.n2, derive_seed(spec.seed, 1, r));
  const LabeledDataset test = sample_mixture(pr, spec.n_test, test_seed.value_or(derive_seed(spec.seed, 2, r)));
  ReplicationResult out;
  for (const auto& method : spec.methods) {
    out.lambdas.emplace_back(0.0, 0.0);
    try {
      const auto labels = run_method(method, spec, pr, train, test.features, derive_seed(spec.seed, 3, r),
                                     out.nonconverged, &out.lambdas.back());
      out.errors.emplace_back(error_rate(labels, test.labels));
    } catch (const Error& e) {
      if (e.category() != ErrorCategory::Numerical) throw;
      out.errors.emplace_back(std::nullopt);
      out.failures.push_back(method + ": " + e.what());
    }
  }
  return out;
}

inline ErrorCell summarize(const std::string& model, Index p, const std::string& method,
                           const std::vector<std::optional<double>>& errs) {
  ErrorCell c;
  c.model = model;
  c.p = p;
  c.method = method;
  double sum = 0.0;
  for (const auto& e : errs) {
    if (e) {
      sum += *e;
      ++c.reps;
    } else {
      ++c.failed;
    }
  }
  if (c.reps > 0) c.mean = sum / c.reps;
  if (c.reps > 1) {
    double ss = 0.0;
    for (const auto& e : errs) {
      if (e) ss += (*e - c.mean) * (*e - c.mean);
    }
    c.sd = std::sqrt(ss / (c.reps - 1));
  }
  return c;
}

}  // namespace detail

/// Replications run concurrently; each derives its streams from
/// (seed, replication index) and the summary walks them in index order,
/// so the table does not depend on scheduling.
inline ExperimentReport run_experiment_report(const ExperimentSpec& spec) {
  spec.check();
  detail::require(!spec.is_csv(), ErrorKind::InvalidArgument, "use run_real_data for csv problems");
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentReport rep;
  rep.replications.resize(static_cast<std::size_t>(spec.replications));
  parallel_for(spec.replications, resolve_threads(spec.threads), [&](int r) {
    rep.replications[static_cast<std::size_t>(r)] = detail::run_replication(spec, r);
  });
  for (std::size_t m = 0; m < spec.methods.size(); ++m) {
    std::vector<std::optional<double>> errs;
    for (const auto& rr : rep.replications) errs.push_back(rr.errors[m]);
    rep.table.rows.push_back(detail::summarize(spec.model, spec.p, spec.methods[m], errs));
  }
  for (const auto& rr : rep.replications) rep.nonconverged_solves += rr.nonconverged;
  rep.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

inline ErrorTable run_experiment(const ExperimentSpec& spec) { return run_experiment_report(spec).table; }

}  // namespace sqda
