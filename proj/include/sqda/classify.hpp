#pragma once

// Discriminant evaluation for the two-class rules: the log-determinant
// identity, the fitted SDAR rule and the exact-parameter oracle.

#include "sqda/core.hpp"

#include <cmath>
#include <vector>

namespace sqda {

namespace detail {

// Symmetric square root with tiny negative eigenvalues clamped to zero.
inline Matrix psd_sqrt(const Matrix& s) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(s));
  if (es.info() != Eigen::Success) {
    throw Error(ErrorKind::NumericalBreakdown, "eigendecomposition failed");
  }
  const Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace detail

/// log|D Sigma1 + I| through the eigenvalues of Sigma1^{1/2} D Sigma1^{1/2} + I,
/// which is similar to D Sigma1 + I. Eigenvalues at or below 1e-12 raise
/// NonPositiveEigenvalue instead of being clamped.
inline double logdet_term(const Matrix& d, const Matrix& sigma1) {
  const Index p = d.rows();
  detail::require_dims(d.cols(), p, "d");
  detail::require_dims(sigma1.rows(), p, "sigma1");
  detail::require_dims(sigma1.cols(), p, "sigma1");
  if (p == 0) return 0.0;
  const Matrix root = detail::psd_sqrt(sigma1);
  Matrix m = root * detail::symmetrized(d) * root;
  m = detail::symmetrized(m);
  m.diagonal().array() += 1.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) {
    throw Error(ErrorKind::NumericalBreakdown, "eigendecomposition failed");
  }
  const double lo = es.eigenvalues().minCoeff();
  if (!(lo > 1e-12)) {
    throw Error(ErrorKind::NonPositiveEigenvalue,
                "D Sigma1 + I has eigenvalue " + std::to_string(lo) + " <= 1e-12");
  }
  return es.eigenvalues().array().log().sum();
}

/// (z-mu1)' D (z-mu1) - 2 beta'(z - (mu1+mu2)/2) - logdet_term + log_prior_ratio.
inline double discriminant(const Vector& z, const SdarModel& model) {
  detail::require_dims(z.size(), model.dim(), "z");
  const Vector c = z - model.mu1_hat;
  const Vector mid = 0.5 * (model.mu1_hat + model.mu2_hat);
  return c.dot(model.d_hat * c) - 2.0 * model.beta_hat.dot(z - mid) - model.logdet_term +
         model.log_prior_ratio;
}

/// Row-wise discriminant for a batch of observations.
inline Vector discriminant(const Matrix& z, const SdarModel& model) {
  detail::require_dims(z.cols(), model.dim(), "z columns");
  const Matrix c = z.rowwise() - model.mu1_hat.transpose();
  const Vector mid = 0.5 * (model.mu1_hat + model.mu2_hat);
  Vector q = (c * model.d_hat).cwiseProduct(c).rowwise().sum();
  q.noalias() -= 2.0 * (z * model.beta_hat);
  q.array() += 2.0 * model.beta_hat.dot(mid) - model.logdet_term + model.log_prior_ratio;
  return q;
}

/// Class 1 when Q > 0; a tie at exactly zero goes to class 2.
inline int label_from(double q) { return q > 0.0 ? 1 : 2; }

inline int classify_sdar(const Vector& z, const SdarModel& model) {
  return label_from(discriminant(z, model));
}

inline std::vector<int> classify_sdar(const Matrix& z, const SdarModel& model) {
  const Vector q = discriminant(z, model);
  std::vector<int> out(static_cast<std::size_t>(q.size()));
  for (Index i = 0; i < q.size(); ++i) out[static_cast<std::size_t>(i)] = label_from(q[i]);
  return out;
}

/// Exact-parameter rule: D = Omega2 - Omega1, beta = Omega2 (mu2 - mu1) and the
/// prior term 2 log(pi1/pi2), so that Q equals twice the log-likelihood ratio.
inline SdarModel oracle_model(const GaussianPairParams& theta) {
  theta.check();
  const Matrix omega1 = detail::spd_inverse(theta.sigma1);
  const Matrix omega2 = detail::spd_inverse(theta.sigma2);
  SdarModel m;
  m.mu1_hat = theta.mu1;
  m.mu2_hat = theta.mu2;
  m.d_hat = detail::symmetrized(omega2 - omega1);
  m.beta_hat = omega2 * (theta.mu2 - theta.mu1);
  m.logdet_term = logdet_term(m.d_hat, theta.sigma1);
  m.log_prior_ratio = 2.0 * std::log(theta.pi1 / theta.pi2);
  return m;
}

inline int classify_oracle(const Vector& z, const GaussianPairParams& theta) {
  return classify_sdar(z, oracle_model(theta));
}

inline std::vector<int> classify_oracle(const Matrix& z, const GaussianPairParams& theta) {
  return classify_sdar(z, oracle_model(theta));
}

/// Fraction of predictions that differ from the truth.
inline double error_rate(const std::vector<int>& predicted, const std::vector<int>& truth) {
  detail::require_dims(static_cast<Index>(predicted.size()), static_cast<Index>(truth.size()),
                       "predicted labels");
  if (truth.empty()) return 0.0;
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) wrong += predicted[i] != truth[i];
  return static_cast<double>(wrong) / static_cast<double>(truth.size());
}

}  // namespace sqda
