#pragma once

// CSDAR: Gaussian-copula discriminant analysis. Each feature is mapped
// through an estimated monotone transform, correlations come from Kendall's
// tau, and the SDAR programs run in the transformed space.

#include "sqda/classify.hpp"
#include "sqda/estimate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

namespace sqda {

/// Standard normal quantile. Acklam's rational approximation followed by
/// two Halley steps against erfc; relative error well below 1e-12 on
/// [1e-300, 1 - 1e-16].
inline double normal_quantile(double prob) {
  detail::require(prob > 0.0 && prob < 1.0, ErrorKind::InvalidArgument,
                  "normal_quantile needs a probability in (0,1)");
  static constexpr std::array<double, 6> a = {-3.969683028665376e+01, 2.209460984245205e+02,
                                              -2.759285104469687e+02, 1.383577518672690e+02,
                                              -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr std::array<double, 5> b = {-5.447609879822406e+01, 1.615858368580409e+02,
                                              -1.556989798598866e+02, 6.680131188771972e+01,
                                              -1.328068155288572e+01};
  static constexpr std::array<double, 6> c = {-7.784894002430293e-03, -3.223964580411365e-01,
                                              -2.400758277161838e+00, -2.549732539343734e+00,
                                              4.374664141464968e+00, 2.938163982698783e+00};
  static constexpr std::array<double, 4> d = {7.784695709041462e-03, 3.224671290700398e-01,
                                              2.445134137142996e+00, 3.754408661907416e+00};
  // Work in the lower tail; 1 - prob is exact for prob >= 1/2.
  const bool upper = prob > 0.5;
  const double q = upper ? 1.0 - prob : prob;
  double x;
  if (q < 0.02425) {
    const double r = std::sqrt(-2.0 * std::log(q));
    x = (((((c[0] * r + c[1]) * r + c[2]) * r + c[3]) * r + c[4]) * r + c[5]) /
        ((((d[0] * r + d[1]) * r + d[2]) * r + d[3]) * r + 1.0);
  } else {
    const double r0 = q - 0.5;
    const double r = r0 * r0;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * r0 /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  for (int it = 0; it < 2; ++it) {
    const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - q;
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    x -= u / (1.0 + 0.5 * x * u);
  }
  return upper ? -x : x;
}

/// Empirical CDF clipped to [1/n^2, 1 - 1/n^2].
struct WinsorizedEcdf {
  std::vector<double> sorted_values;
  Index n = 0;

  double evaluate(double t) const {
    const auto below = std::upper_bound(sorted_values.begin(), sorted_values.end(), t) -
                       sorted_values.begin();
    const double nn = static_cast<double>(n);
    const double lo = 1.0 / (nn * nn);
    return std::clamp(static_cast<double>(below) / nn, lo, 1.0 - lo);
  }
};

inline WinsorizedEcdf winsorized_ecdf(const Vector& samples) {
  detail::require(samples.size() >= 2, ErrorKind::TooFewSamples, "ECDF needs at least 2 samples");
  detail::require(samples.allFinite(), ErrorKind::InvalidArgument, "ECDF samples must be finite");
  WinsorizedEcdf e;
  e.n = samples.size();
  e.sorted_values.assign(samples.data(), samples.data() + samples.size());
  std::sort(e.sorted_values.begin(), e.sorted_values.end());
  return e;
}

inline std::vector<WinsorizedEcdf> feature_ecdfs(const Matrix& rows) {
  std::vector<WinsorizedEcdf> out;
  out.reserve(static_cast<std::size_t>(rows.cols()));
  for (Index j = 0; j < rows.cols(); ++j) out.push_back(winsorized_ecdf(rows.col(j)));
  return out;
}

struct Class2Moments {
  Vector mu2_hat;
  Vector sigma2_jj_hat;
};

/// Transformed-space class-2 mean and variance per feature, measured
/// through the class-1 ECDFs; the variance uses the n2 - 1 divisor.
inline Class2Moments copula_class2_moments(const Matrix& data2, const std::vector<WinsorizedEcdf>& ecdf1) {
  const Index n2 = data2.rows();
  const Index p = data2.cols();
  detail::require(n2 >= 2, ErrorKind::TooFewSamples, "class 2 needs at least 2 rows");
  detail::require_dims(static_cast<Index>(ecdf1.size()), p, "class-1 ECDF count");
  Class2Moments m;
  m.mu2_hat.resize(p);
  m.sigma2_jj_hat.resize(p);
  Vector g(n2);
  for (Index j = 0; j < p; ++j) {
    for (Index i = 0; i < n2; ++i) {
      g[i] = normal_quantile(ecdf1[static_cast<std::size_t>(j)].evaluate(data2(i, j)));
    }
    // Shift by the first value so a constant column gives exactly zero
    // spread whatever the summation order.
    const Eigen::ArrayXd d = g.array() - g[0];
    const double dm = d.mean();
    m.mu2_hat[j] = g[0] + dm;
    m.sigma2_jj_hat[j] = std::max(0.0, (d - dm).square().sum() / static_cast<double>(n2 - 1));
  }
  return m;
}

/// Kendall's tau-a for every column pair, diagonal 1. Pair signs are
/// stacked into blocks so the pair sums become exact matrix products (all
/// partial sums are small integers).
inline Matrix kendall_tau_matrix(const Matrix& data) {
  const Index n = data.rows();
  const Index p = data.cols();
  detail::require(n >= 2, ErrorKind::TooFewSamples, "Kendall's tau needs at least 2 rows");
  const Index block = std::max<Index>(n, 32768);
  Matrix signs(block, p);
  Matrix acc = Matrix::Zero(p, p);
  Index i = 0;
  while (i < n - 1) {
    Index r = 0;
    for (; i < n - 1 && r + (n - i - 1) <= block; ++i) {
      for (Index k = i + 1; k < n; ++k, ++r) {
        for (Index j = 0; j < p; ++j) {
          const double diff = data(i, j) - data(k, j);
          signs(r, j) = static_cast<double>((diff > 0) - (diff < 0));
        }
      }
    }
    acc.noalias() += signs.topRows(r).transpose() * signs.topRows(r);
  }
  Matrix tau = acc * (2.0 / (static_cast<double>(n) * static_cast<double>(n - 1)));
  tau = detail::symmetrized(tau);
  tau.diagonal().setOnes();
  return tau;
}

inline Matrix sine_correlation(const Matrix& tau) {
  Matrix r = tau.unaryExpr([](double t) { return std::sin(0.5 * std::numbers::pi * t); });
  r.diagonal().setOnes();
  return r;
}

/// Eigenvalue clipping at `floor` followed by a unit-diagonal rescale.
inline Matrix nearest_correlation(const Matrix& r, double floor = 1e-8) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(detail::symmetrized(r));
  const Vector ev = es.eigenvalues().cwiseMax(floor);
  Matrix c = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  const Vector s = c.diagonal().cwiseSqrt().cwiseInverse();
  c = s.asDiagonal() * c * s.asDiagonal();
  c = detail::symmetrized(c);
  c.diagonal().setOnes();
  return c;
}

struct CopulaOptions {
  bool project_correlation = false;
};

/// Everything CSDAR estimates before the l1 programs run.
struct CopulaMoments {
  std::vector<WinsorizedEcdf> ecdf1;
  std::vector<WinsorizedEcdf> ecdf2;
  Vector mu2_hat;
  Vector sigma2_jj_hat;
  Matrix r_hat1;
  Matrix r_hat2;
  Matrix sigma_tilde1;
  Matrix sigma_tilde2;
  Index n1 = 0;
  Index n2 = 0;
};

inline CopulaMoments copula_moments(const Matrix& x1, const Matrix& x2, const CopulaOptions& opt = {}) {
  detail::require_dims(x2.cols(), x1.cols(), "class 2 columns");
  CopulaMoments m;
  m.n1 = x1.rows();
  m.n2 = x2.rows();
  m.ecdf1 = feature_ecdfs(x1);
  m.ecdf2 = feature_ecdfs(x2);
  Class2Moments c2 = copula_class2_moments(x2, m.ecdf1);
  for (Index j = 0; j < c2.sigma2_jj_hat.size(); ++j) {
    if (!(c2.sigma2_jj_hat[j] > 0.0)) {
      throw Error(ErrorKind::DegenerateVariance,
                  "transformed class-2 variance is zero at feature " + std::to_string(j + 1));
    }
  }
  m.mu2_hat = std::move(c2.mu2_hat);
  m.sigma2_jj_hat = std::move(c2.sigma2_jj_hat);
  m.r_hat1 = sine_correlation(kendall_tau_matrix(x1));
  m.r_hat2 = sine_correlation(kendall_tau_matrix(x2));
  if (opt.project_correlation) {
    if (detail::min_eigenvalue(m.r_hat1) < 1e-8) m.r_hat1 = nearest_correlation(m.r_hat1);
    if (detail::min_eigenvalue(m.r_hat2) < 1e-8) m.r_hat2 = nearest_correlation(m.r_hat2);
  }
  m.sigma_tilde1 = m.r_hat1;
  const Vector dv = m.sigma2_jj_hat.cwiseSqrt();
  m.sigma_tilde2 = detail::symmetrized(dv.asDiagonal() * m.r_hat2 * dv.asDiagonal());
  return m;
}

struct CopulaModel {
  std::vector<WinsorizedEcdf> ecdf1;
  std::vector<WinsorizedEcdf> ecdf2;
  Vector mu2_hat;
  Vector sigma2_jj_hat;
  Matrix r_hat1;
  Matrix r_hat2;
  Matrix sigma_tilde1;
  Matrix sigma_tilde2;
  Index n1 = 0;
  Index n2 = 0;
  SdarModel sdar;

  Index dim() const { return mu2_hat.size(); }
};

/// Pooled transform f_j(t): the class-weighted average of the two
/// per-class Gaussianizations, with class 1 pinned to mean 0, variance 1.
inline double pooled_transform(const CopulaModel& m, Index j, double t) {
  const auto jj = static_cast<std::size_t>(j);
  const double g1 = normal_quantile(m.ecdf1[jj].evaluate(t));
  const double g2 = m.mu2_hat[j] + std::sqrt(m.sigma2_jj_hat[j]) * normal_quantile(m.ecdf2[jj].evaluate(t));
  const double n1 = static_cast<double>(m.n1);
  const double n2 = static_cast<double>(m.n2);
  return (n1 * g1 + n2 * g2) / (n1 + n2);
}

inline Vector copula_transform(const Vector& z, const CopulaModel& m) {
  detail::require_dims(z.size(), m.dim(), "z");
  Vector out(z.size());
  for (Index j = 0; j < z.size(); ++j) out[j] = pooled_transform(m, j, z[j]);
  return out;
}

inline Matrix copula_transform(const Matrix& z, const CopulaModel& m) {
  detail::require_dims(z.cols(), m.dim(), "z columns");
  Matrix out(z.rows(), z.cols());
  for (Index i = 0; i < z.rows(); ++i) {
    for (Index j = 0; j < z.cols(); ++j) out(i, j) = pooled_transform(m, j, z(i, j));
  }
  return out;
}

/// Fits the SDAR programs on (0, mu2_hat, sigma_tilde1, sigma_tilde2).
inline CopulaModel copula_from_moments(CopulaMoments cm, const FitConfig& cfg) {
  cfg.check();
  const Index p = cm.mu2_hat.size();
  GraphEstimate g = estimate_differential_graph(cm.sigma_tilde1, cm.sigma_tilde2, cfg.lambda1, cfg.solver);
  DirectionEstimate b = estimate_direction(cm.sigma_tilde2, cm.mu2_hat, cfg.lambda2, cfg.solver);
  CopulaModel m;
  m.sdar = assemble_sdar(Vector::Zero(p), cm.mu2_hat, cm.sigma_tilde1, std::move(g.d_hat), std::move(b.beta_hat),
                         std::log(static_cast<double>(cm.n1) / static_cast<double>(cm.n2)), cfg.lambda1,
                         cfg.lambda2);
  m.ecdf1 = std::move(cm.ecdf1);
  m.ecdf2 = std::move(cm.ecdf2);
  m.mu2_hat = std::move(cm.mu2_hat);
  m.sigma2_jj_hat = std::move(cm.sigma2_jj_hat);
  m.r_hat1 = std::move(cm.r_hat1);
  m.r_hat2 = std::move(cm.r_hat2);
  m.sigma_tilde1 = std::move(cm.sigma_tilde1);
  m.sigma_tilde2 = std::move(cm.sigma_tilde2);
  m.n1 = cm.n1;
  m.n2 = cm.n2;
  return m;
}

inline CopulaModel fit_csdar(const LabeledDataset& data, const FitConfig& cfg, const CopulaOptions& opt = {}) {
  require_two_classes(data);
  return copula_from_moments(copula_moments(data.rows_of(1), data.rows_of(2), opt), cfg);
}

inline int classify_csdar(const Vector& z, const CopulaModel& model) {
  return classify_sdar(copula_transform(z, model), model.sdar);
}

inline std::vector<int> classify_csdar(const Matrix& z, const CopulaModel& model) {
  return classify_sdar(copula_transform(z, model), model.sdar);
}

}  // namespace sqda
