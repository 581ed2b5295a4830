#pragma once

// Sample moments and the two constrained l1 programs behind the SDAR rule.

#include "sqda/classify.hpp"
#include "sqda/core.hpp"
#include "sqda/solver.hpp"

#include <algorithm>
#include <cmath>

namespace sqda {

struct FitConfig {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  SolverConfig solver;

  void check() const {
    detail::require(lambda1 >= 0 && lambda2 >= 0 && std::isfinite(lambda1) && std::isfinite(lambda2),
                    ErrorKind::InvalidArgument, "lambda1 and lambda2 must be finite and >= 0");
  }
};

/// c * sqrt(log p / n); the rate every tuning grid is built on.
inline double lambda_scale(Index p, Index n) {
  detail::require(p >= 1 && n >= 1, ErrorKind::InvalidArgument, "lambda_scale needs p, n >= 1");
  return std::sqrt(std::log(static_cast<double>(p)) / static_cast<double>(n));
}

/// Default constants c1 = c2 = 2 with n = min(n1, n2).
inline FitConfig default_fit_config(Index p, Index n1, Index n2) {
  FitConfig cfg;
  cfg.lambda1 = cfg.lambda2 = 2.0 * lambda_scale(p, std::min(n1, n2));
  return cfg;
}

/// Moments of a raw sample with the n_k divisor; pi_hat is supplied.
inline ClassMoments moments_of(const Matrix& rows, double pi_hat) {
  const Index n = rows.rows();
  detail::require(n >= 2, ErrorKind::TooFewSamples, "need at least 2 rows for a covariance");
  const Vector mu = rows.colwise().mean();
  const Matrix c = rows.rowwise() - mu.transpose();
  return ClassMoments(n, mu, (c.transpose() * c) / static_cast<double>(n), pi_hat);
}

inline ClassMoments class_moments(const LabeledDataset& data, int class_id) {
  detail::require_dims(static_cast<Index>(data.labels.size()), data.rows(), "labels");
  const Index nk = data.count(class_id);
  detail::require(nk > 0, ErrorKind::UnknownClass, "class " + std::to_string(class_id) + " not present");
  detail::require(nk >= 2, ErrorKind::TooFewSamples,
                  "class " + std::to_string(class_id) + " has n_k < 2");
  return moments_of(data.rows_of(class_id),
                    static_cast<double>(nk) / static_cast<double>(data.rows()));
}

struct GraphEstimate {
  Matrix d_hat;
  SolveReport report;
};

struct DirectionEstimate {
  Vector beta_hat;
  SolveReport report;
};

/// min |D|_1 s.t. |(S1 D S2 + S2 D S1)/2 - (S1 - S2)|_inf <= lambda, returned
/// symmetrized. Takes the covariances directly so transformed-space callers
/// can reuse it.
inline GraphEstimate estimate_differential_graph(const Matrix& sigma1, const Matrix& sigma2,
                                                 double lambda, const SolverConfig& solver) {
  const Index p = sigma1.rows();
  const Matrix s1 = detail::symmetrized(sigma1);
  const Matrix s2 = detail::symmetrized(sigma2);
  const ConstraintOperator op = sylvester_operator(s1, s2);
  const Matrix target = s1 - s2;
  SolverConfig cfg = solver;
  cfg.lambda = lambda;
  GraphEstimate out;
  out.report = solve_l1_dantzig(op, Eigen::Map<const Vector>(target.data(), p * p), cfg);
  const Eigen::Map<const Matrix> d(out.report.solution.data(), p, p);
  out.d_hat = detail::symmetrized(d);
  return out;
}

inline GraphEstimate estimate_differential_graph(const ClassMoments& m1, const ClassMoments& m2,
                                                 const FitConfig& cfg) {
  cfg.check();
  detail::require_dims(m2.dim(), m1.dim(), "class 2 moments");
  return estimate_differential_graph(m1.sigma_hat, m2.sigma_hat, cfg.lambda1, cfg.solver);
}

/// min |b|_1 s.t. |S b - delta|_inf <= lambda.
inline DirectionEstimate estimate_direction(const Matrix& sigma, const Vector& delta, double lambda,
                                            const SolverConfig& solver) {
  SolverConfig cfg = solver;
  cfg.lambda = lambda;
  DirectionEstimate out;
  out.report = solve_l1_dantzig(matrix_operator(detail::symmetrized(sigma)), delta, cfg);
  out.beta_hat = out.report.solution;
  return out;
}

inline DirectionEstimate estimate_direction(const ClassMoments& m1, const ClassMoments& m2,
                                            const FitConfig& cfg) {
  cfg.check();
  detail::require_dims(m2.dim(), m1.dim(), "class 2 moments");
  return estimate_direction(m2.sigma_hat, m2.mu_hat - m1.mu_hat, cfg.lambda2, cfg.solver);
}

/// Packs estimated pieces into a model; logdet_term may throw
/// NonPositiveEigenvalue when D is too large for the given Sigma1.
inline SdarModel assemble_sdar(const Vector& mu1, const Vector& mu2, const Matrix& sigma1, Matrix d_hat,
                               Vector beta_hat, double log_prior_ratio, double lambda1, double lambda2) {
  SdarModel m;
  m.logdet_term = logdet_term(d_hat, sigma1);
  m.mu1_hat = mu1;
  m.mu2_hat = mu2;
  m.d_hat = std::move(d_hat);
  m.beta_hat = std::move(beta_hat);
  m.log_prior_ratio = log_prior_ratio;
  m.lambda1 = lambda1;
  m.lambda2 = lambda2;
  return m;
}

struct SdarFit {
  SdarModel model;
  SolveReport graph_report;
  SolveReport direction_report;
};

inline void require_two_classes(const LabeledDataset& data) {
  require_valid(data);
  const auto ids = data.classes();
  detail::require(ids.size() <= 2, ErrorKind::MoreThanTwoClasses,
                  "dataset has " + std::to_string(ids.size()) + " classes; use fit_multigroup");
  detail::require(ids.size() == 2 && ids[0] == 1 && ids[1] == 2, ErrorKind::InvalidArgument,
                  "two-class fit needs labels 1 and 2");
}

inline SdarFit fit_sdar_detailed(const LabeledDataset& data, const FitConfig& cfg) {
  cfg.check();
  require_two_classes(data);
  const ClassMoments m1 = class_moments(data, 1);
  const ClassMoments m2 = class_moments(data, 2);
  GraphEstimate g = estimate_differential_graph(m1, m2, cfg);
  DirectionEstimate b = estimate_direction(m1, m2, cfg);
  SdarFit fit;
  fit.model = assemble_sdar(m1.mu_hat, m2.mu_hat, m1.sigma_hat, std::move(g.d_hat), std::move(b.beta_hat),
                            std::log(m1.pi_hat / m2.pi_hat), cfg.lambda1, cfg.lambda2);
  fit.graph_report = std::move(g.report);
  fit.direction_report = std::move(b.report);
  return fit;
}

inline SdarModel fit_sdar(const LabeledDataset& data, const FitConfig& cfg) {
  return fit_sdar_detailed(data, cfg).model;
}

}  // namespace sqda
