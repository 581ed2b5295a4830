#include "sqda/copula.hpp"
#include "sqda/datagen.hpp"
#include "support/random.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace sqda;
using namespace sqda::testing_support;

namespace {

// Bisection on the complementary error function: slow but independent of
// the rational approximation under test.
double quantile_by_bisection(double p) {
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double cdf = 0.5 * std::erfc(-mid / std::sqrt(2.0));
    (cdf < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

Matrix correlated_pair(Index n, double rho, std::mt19937_64& rng) {
  const Matrix z = gaussian_matrix(n, 2, rng);
  Matrix x(n, 2);
  x.col(0) = z.col(0);
  x.col(1) = rho * z.col(0) + std::sqrt(1 - rho * rho) * z.col(1);
  return x;
}

LabeledDataset stack(const Matrix& x1, const Matrix& x2) {
  LabeledDataset d;
  d.features.resize(x1.rows() + x2.rows(), x1.cols());
  d.features << x1, x2;
  for (Index i = 0; i < d.rows(); ++i) d.labels.push_back(i < x1.rows() ? 1 : 2);
  return d;
}

}  // namespace

TEST(NormalQuantile, MatchesBisectionOracle) {
  for (double p : {1e-10, 1e-6, 0.001, 0.02, 0.1, 0.3, 0.5, 0.7, 0.975, 0.999, 1 - 1e-8}) {
    const double ref = quantile_by_bisection(p);
    EXPECT_LE(std::abs(normal_quantile(p) - ref), 1e-9 * std::max(1.0, std::abs(ref))) << p;
  }
  EXPECT_EQ(normal_quantile(0.5), 0.0);
  EXPECT_THROW(normal_quantile(0.0), Error);
  EXPECT_THROW(normal_quantile(1.0), Error);
}

TEST(WinsorizedEcdf, Examples) {
  const WinsorizedEcdf e = winsorized_ecdf(Vector{{1.0, 2.0, 3.0}});
  EXPECT_DOUBLE_EQ(e.evaluate(0.0), 1.0 / 9);
  EXPECT_DOUBLE_EQ(e.evaluate(10.0), 8.0 / 9);
  EXPECT_DOUBLE_EQ(winsorized_ecdf(Vector{{1.0, 2.0, 3.0, 4.0}}).evaluate(2.5), 0.5);
  EXPECT_THROW(winsorized_ecdf(Vector::Ones(1)), Error);
}

TEST(Class2Moments, SameDistributionGivesStandardMoments) {
  std::mt19937_64 rng(31);
  const Matrix x1 = gaussian_matrix(4000, 3, rng);
  const Matrix x2 = gaussian_matrix(4000, 3, rng);
  const Class2Moments m = copula_class2_moments(x2, feature_ecdfs(x1));
  for (Index j = 0; j < 3; ++j) {
    EXPECT_NEAR(m.mu2_hat[j], 0.0, 0.08);
    EXPECT_NEAR(m.sigma2_jj_hat[j], 1.0, 0.1);
  }
}

TEST(Class2Moments, ConstantAtMedianHasZeroSpread) {
  const Vector x1{{1.0, 2.0, 3.0, 4.0, 5.0}};
  const Matrix x2 = Matrix::Constant(6, 1, 3.0);
  const Class2Moments m = copula_class2_moments(x2, {winsorized_ecdf(x1)});
  EXPECT_EQ(m.sigma2_jj_hat[0], 0.0);
}

TEST(Class2Moments, SaturatesAtUpperClip) {
  const Vector x1{{1.0, 2.0, 3.0, 4.0}};
  const Matrix x2 = Matrix::Constant(5, 1, 100.0) + Vector{{0.0, 1.0, 2.0, 3.0, 4.0}};
  const Class2Moments m = copula_class2_moments(x2, {winsorized_ecdf(x1)});
  EXPECT_NEAR(m.mu2_hat[0], normal_quantile(1.0 - 1.0 / 16), 1e-14);
  EXPECT_EQ(m.sigma2_jj_hat[0], 0.0);
}

TEST(KendallTau, Examples) {
  Matrix x(4, 3);
  x.col(0) << 1, 2, 3, 4;
  x.col(1) << 1, 3, 2, 4;
  x.col(2) = -x.col(0);
  const Matrix tau = kendall_tau_matrix(x);
  EXPECT_DOUBLE_EQ(tau(0, 1), 2.0 / 3);
  EXPECT_DOUBLE_EQ(tau(0, 2), -1.0);
  EXPECT_EQ(tau(0, 0), 1.0);
  EXPECT_EQ(tau, tau.transpose());
}

TEST(KendallTau, MatchesPairEnumeration) {
  std::mt19937_64 rng(32);
  const Matrix x = gaussian_matrix(40, 4, rng);
  const Matrix tau = kendall_tau_matrix(x);
  for (Index a = 0; a < 4; ++a) {
    for (Index b = a + 1; b < 4; ++b) {
      double s = 0;
      for (Index i = 0; i < 40; ++i)
        for (Index k = i + 1; k < 40; ++k) {
          const double v = (x(i, a) - x(k, a)) * (x(i, b) - x(k, b));
          s += (v > 0) - (v < 0);
        }
      EXPECT_NEAR(tau(a, b), s * 2.0 / (40.0 * 39.0), 1e-15);
    }
  }
}

TEST(SineCorrelation, ExamplesAndRange) {
  EXPECT_EQ(sine_correlation(Matrix::Zero(2, 2))(0, 1), 0.0);
  EXPECT_EQ(sine_correlation(Matrix::Ones(2, 2))(0, 1), 1.0);
  std::mt19937_64 rng(33);
  const Matrix r = sine_correlation(kendall_tau_matrix(gaussian_matrix(50, 6, rng)));
  EXPECT_LE(r.cwiseAbs().maxCoeff(), 1.0);
  for (Index j = 0; j < 6; ++j) EXPECT_EQ(r(j, j), 1.0);
}

TEST(SineCorrelation, RecoversGaussianCorrelation) {
  std::mt19937_64 rng(34);
  const Matrix r = sine_correlation(kendall_tau_matrix(correlated_pair(5000, 0.5, rng)));
  EXPECT_GE(r(0, 1), 0.45);
  EXPECT_LE(r(0, 1), 0.55);
}

TEST(NearestCorrelation, ProducesUnitDiagonalPsd) {
  const Matrix r{{1.0, 0.9, -0.9}, {0.9, 1.0, 0.9}, {-0.9, 0.9, 1.0}};
  ASSERT_LT(detail::min_eigenvalue(r), 0.0);
  const Matrix c = nearest_correlation(r);
  EXPECT_GE(detail::min_eigenvalue(c), -1e-12);
  for (Index j = 0; j < 3; ++j) EXPECT_EQ(c(j, j), 1.0);
}

TEST(Csdar, TransformIsNondecreasing) {
  std::mt19937_64 rng(35);
  const LabeledDataset d = stack(gaussian_matrix(80, 2, rng), 0.5 + gaussian_matrix(80, 2, rng).array() * 1.5);
  const CopulaModel m = fit_csdar(d, default_fit_config(2, 80, 80));
  for (Index j = 0; j < 2; ++j) {
    double prev = -1e300;
    for (double t = -8.0; t <= 8.0; t += 0.01) {
      const double v = pooled_transform(m, j, t);
      EXPECT_GE(v, prev);
      prev = v;
    }
  }
}

TEST(Csdar, FarOutlierStaysFinite) {
  std::mt19937_64 rng(36);
  const LabeledDataset d = stack(gaussian_matrix(60, 3, rng), 1.0 + gaussian_matrix(60, 3, rng).array());
  const CopulaModel m = fit_csdar(d, default_fit_config(3, 60, 60));
  const Vector z = Vector::Constant(3, -1e6);
  EXPECT_TRUE(copula_transform(z, m).allFinite());
  const int label = classify_csdar(z, m);
  EXPECT_TRUE(label == 1 || label == 2);
}

TEST(Csdar, NullProblemSendsEverythingToClassTwo) {
  std::mt19937_64 rng(37);
  const Matrix x = gaussian_matrix(100, 3, rng);
  const LabeledDataset d = stack(x, x);
  const CopulaModel m = fit_csdar(d, default_fit_config(3, 100, 100));
  EXPECT_EQ(m.sdar.d_hat, Matrix::Zero(3, 3));
  EXPECT_EQ(m.sdar.beta_hat, Vector::Zero(3));
  for (int label : classify_csdar(gaussian_matrix(50, 3, rng), m)) EXPECT_EQ(label, 2);
}

TEST(Csdar, DegenerateClassTwoVarianceNamesFeature) {
  std::mt19937_64 rng(38);
  Matrix x1 = gaussian_matrix(31, 2, rng);
  Matrix x2 = gaussian_matrix(30, 2, rng);
  x1.col(1) = Vector::LinSpaced(31, 0.0, 30.0);
  x2.col(1).setConstant(15.0);  // class-1 median
  try {
    fit_csdar(stack(x1, x2), FitConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateVariance);
    EXPECT_NE(std::string(e.what()).find("feature 2"), std::string::npos);
  }
}

TEST(Csdar, ClassOneMomentsArePinned) {
  std::mt19937_64 rng(39);
  const LabeledDataset d = stack(3.0 + gaussian_matrix(50, 2, rng).array(), gaussian_matrix(50, 2, rng));
  const CopulaModel m = fit_csdar(d, default_fit_config(2, 50, 50));
  EXPECT_EQ(m.sdar.mu1_hat, Vector::Zero(2));
  EXPECT_EQ(m.sigma_tilde1.diagonal(), Vector::Ones(2));
}

TEST(Csdar, MonotoneTransformsLeaveLabelsBitIdentical) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const SyntheticProblem pr = gen_model(2, 10, seed, SparsityOptions{3, 3});
    const LabeledDataset train = sample(pr, 100, 100, seed + 10);
    const LabeledDataset test = sample_mixture(pr, 200, seed + 20);
    auto warp = [](const Matrix& x) {
      Matrix y = x;
      for (Index j = 0; j < x.cols(); ++j) {
        for (Index i = 0; i < x.rows(); ++i) {
          const double v = x(i, j);
          y(i, j) = j % 3 == 0 ? v * v * v : j % 3 == 1 ? std::exp(v) : 2.0 * v + 7.0;
        }
      }
      return y;
    };
    LabeledDataset warped = train;
    warped.features = warp(train.features);
    const FitConfig cfg = default_fit_config(10, 100, 100);
    const CopulaModel a = fit_csdar(train, cfg);
    const CopulaModel b = fit_csdar(warped, cfg);
    EXPECT_EQ(kendall_tau_matrix(train.features), kendall_tau_matrix(warped.features));
    EXPECT_EQ(classify_csdar(test.features, a), classify_csdar(warp(test.features), b));
  }
}

TEST(Csdar, TracksSdarOnGaussianData) {
  double gap = 0.0;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const SyntheticProblem pr = gen_model(2, 30, seed);
    const LabeledDataset train = sample(pr, 200, 200, seed + 1);
    const LabeledDataset test = sample_mixture(pr, 1000, seed + 2);
    const FitConfig cfg = default_fit_config(30, 200, 200);
    const double e_sdar = error_rate(classify_sdar(test.features, fit_sdar(train, cfg)), test.labels);
    const double e_csdar = error_rate(classify_csdar(test.features, fit_csdar(train, cfg)), test.labels);
    gap += std::abs(e_sdar - e_csdar) / 4.0;
  }
  EXPECT_LE(gap, 0.05);
}

TEST(Csdar, AgreesWithGaussianRuleOnIdentityTransforms) {
  // With identity transforms the copula space is the data rescaled to unit
  // class-1 variance, so the exact rule there must match the exact rule on z.
  const SyntheticProblem pr = gen_model(2, 10, 8, SparsityOptions{3, 3});
  const LabeledDataset train = sample(pr, 2000, 2000, 9);
  const LabeledDataset test = sample_mixture(pr, 500, 10);
  CopulaModel m = fit_csdar(train, default_fit_config(10, 2000, 2000));
  const Vector inv_sd = pr.theta.sigma1.diagonal().cwiseSqrt().cwiseInverse();
  GaussianPairParams scaled = pr.theta;
  scaled.mu1 = inv_sd.cwiseProduct(pr.theta.mu1);
  scaled.mu2 = inv_sd.cwiseProduct(pr.theta.mu2);
  scaled.sigma1 = detail::symmetrized(inv_sd.asDiagonal() * pr.theta.sigma1 * inv_sd.asDiagonal());
  scaled.sigma2 = detail::symmetrized(inv_sd.asDiagonal() * pr.theta.sigma2 * inv_sd.asDiagonal());
  m.sdar = oracle_model(scaled);
  const auto direct = classify_oracle(test.features, pr.theta);
  const auto through = classify_csdar(test.features, m);
  int agree = 0;
  for (std::size_t i = 0; i < direct.size(); ++i) agree += direct[i] == through[i];
  EXPECT_GE(agree, 475);
}
