#include "sqda/classify.hpp"
#include "sqda/datagen.hpp"
#include "sqda/experiment.hpp"
#include "sqda/multigroup.hpp"
#include "support/random.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace sqda;
using namespace sqda::testing_support;

namespace {

SdarModel null_model(Index p) {
  SdarModel m;
  m.mu1_hat = m.mu2_hat = m.beta_hat = Vector::Zero(p);
  m.d_hat = Matrix::Zero(p, p);
  return m;
}

SdarModel lda_example() {
  SdarModel m = null_model(3);
  m.mu1_hat = Vector::Unit(3, 0);
  m.mu2_hat = -Vector::Unit(3, 0);
  m.beta_hat = -2.0 * Vector::Unit(3, 0);
  return m;
}

}  // namespace

TEST(Discriminant, NullModelIsZero) {
  std::mt19937_64 rng(1);
  const SdarModel m = null_model(4);
  for (int i = 0; i < 5; ++i) {
    const Vector z = gaussian_vector(4, rng);
    EXPECT_EQ(discriminant(z, m), 0.0);
    EXPECT_EQ(classify_sdar(z, m), 2);
  }
}

TEST(Discriminant, LdaExample) {
  const SdarModel m = lda_example();
  EXPECT_NEAR(discriminant(Vector(Vector::Unit(3, 0)), m), 4.0, 1e-15);
  EXPECT_EQ(classify_sdar(Vector(Vector::Unit(3, 0)), m), 1);
}

TEST(Discriminant, BatchMatchesPointwise) {
  std::mt19937_64 rng(2);
  const SdarModel m = oracle_model(random_theta(4, rng));
  const Matrix z = gaussian_matrix(20, 4, rng);
  const Vector q = discriminant(z, m);
  for (Index i = 0; i < 20; ++i) EXPECT_NEAR(q[i], discriminant(Vector(z.row(i).transpose()), m), 1e-10);
}

TEST(Discriminant, DimensionMismatchThrows) {
  EXPECT_THROW(discriminant(Vector(Vector::Zero(2)), null_model(3)), Error);
}

TEST(Discriminant, ExactTermsGiveTwiceTheLogLikelihoodRatio) {
  std::mt19937_64 rng(3);
  for (Index p : {1, 2, 5, 20}) {
    for (int i = 0; i < 10; ++i) {
      const GaussianPairParams t = random_theta(p, rng);
      const Vector z = t.mu1 + gaussian_vector(p, rng);
      const double q = discriminant(z, oracle_model(t));
      const double ref = 2.0 * log_likelihood_ratio(z, t);
      EXPECT_LE(std::abs(q - ref), 1e-8 * (1.0 + std::abs(ref))) << "p=" << p;
    }
  }
}

TEST(LogdetTerm, Examples) {
  EXPECT_EQ(logdet_term(Matrix::Zero(3, 3), Matrix::Identity(3, 3)), 0.0);
  EXPECT_NEAR(logdet_term(Matrix::Constant(1, 1, 3.0), Matrix::Constant(1, 1, 2.0)), std::log(7.0), 1e-14);
}

TEST(LogdetTerm, EqualsLogDeterminantRatio) {
  std::mt19937_64 rng(4);
  for (Index p : {1, 3, 5, 10}) {
    const Matrix s1 = random_spd(p, rng), s2 = random_spd(p, rng);
    const Matrix d = detail::spd_inverse(s2) - detail::spd_inverse(s1);
    const double ref = std::log(s1.determinant()) - std::log(s2.determinant());
    const double v = logdet_term(d, s1);
    EXPECT_LE(std::abs(v - ref), 1e-9 * (1.0 + std::abs(ref)));
    EXPECT_NEAR(logdet_term(-d, s2), -v, 1e-9 * (1.0 + std::abs(v)));
  }
}

TEST(LogdetTerm, NonPositiveEigenvalueThrows) {
  try {
    logdet_term(Matrix::Constant(1, 1, -1.0), Matrix::Identity(1, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonPositiveEigenvalue);
  }
}

TEST(ClassifyOracle, SymmetryAxisTiesToClassTwo) {
  GaussianPairParams t;
  t.mu1 = Vector{{1.0, 0.0}};
  t.mu2 = Vector{{-1.0, 0.0}};
  t.sigma1 = t.sigma2 = Matrix::Identity(2, 2);
  EXPECT_EQ(classify_oracle(Vector{{0.0, 0.7}}, t), 2);
  EXPECT_EQ(classify_oracle(Vector{{0.1, 0.7}}, t), 1);
}

TEST(ClassifyOracle, DominantPriorWins) {
  GaussianPairParams t;
  t.pi1 = 0.999;
  t.pi2 = 0.001;
  t.mu1 = Vector::Zero(3);
  t.mu2 = Vector::Constant(3, 0.01);
  t.sigma1 = Matrix::Identity(3, 3);
  t.sigma2 = 1.01 * Matrix::Identity(3, 3);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(classify_oracle(gaussian_vector(3, rng), t), 1);
}

TEST(ClassifyOracle, AgreesWithDensityRatioSign) {
  std::mt19937_64 rng(6);
  int agree = 0;
  for (int i = 0; i < 1000; ++i) {
    const GaussianPairParams t = random_theta(1 + i % 5, rng);
    const Vector z = (i % 2 ? t.mu1 : t.mu2) + gaussian_vector(t.dim(), rng);
    const int ref = log_likelihood_ratio(z, t) > 0 ? 1 : 2;
    agree += classify_oracle(z, t) == ref;
  }
  EXPECT_EQ(agree, 1000);
}

TEST(ClassifySdar, LabelsInvariantUnderPositiveScaling) {
  std::mt19937_64 rng(7);
  const SdarModel m = oracle_model(random_theta(3, rng));
  SdarModel scaled = m;
  const double c = 2.5;
  scaled.d_hat *= c;
  scaled.beta_hat *= c;
  scaled.logdet_term *= c;
  scaled.log_prior_ratio *= c;
  const Matrix z = gaussian_matrix(100, 3, rng);
  EXPECT_EQ(classify_sdar(z, m), classify_sdar(z, scaled));
}

TEST(ClassifyOracle, BayesRuleIsNotBeaten) {
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    const SyntheticProblem pr = gen_model(2, 30, seed);
    const LabeledDataset train = sample(pr, 200, 200, seed + 100);
    const LabeledDataset test = sample_mixture(pr, 2000, seed + 200);
    const double oracle = error_rate(classify_oracle(test.features, pr.theta), test.labels);
    const double se = std::sqrt(oracle * (1 - oracle) / 2000.0);
    for (const SdarModel& m : {fit_lda_plugin(train), fit_qda_plugin(train)}) {
      const double err = error_rate(classify_sdar(test.features, m), test.labels);
      EXPECT_LE(oracle, err + 2 * se);
    }
  }
}

TEST(ErrorRate, CountsMismatches) {
  EXPECT_DOUBLE_EQ(error_rate({1, 2, 2, 1}, {1, 1, 2, 2}), 0.5);
  EXPECT_THROW(error_rate({1}, {1, 2}), Error);
}

// Multigroup rule.

namespace {

ClassMoments exact_moments(const Vector& mu, const Matrix& sigma, double pi) { return ClassMoments(100, mu, sigma, pi); }

}  // namespace

TEST(Multigroup, TwoClassesWithEqualCovarianceMatchLda) {
  std::mt19937_64 rng(21);
  const Matrix sigma = random_spd(4, rng);
  const Vector mu1 = gaussian_vector(4, rng), mu2 = gaussian_vector(4, rng);
  FitConfig cfg;
  cfg.lambda1 = 0.0;
  cfg.lambda2 = 0.0;
  const MultigroupModel mg = multigroup_from_moments({exact_moments(mu1, sigma, 0.5), exact_moments(mu2, sigma, 0.5)}, cfg);
  EXPECT_EQ(mg.d_hat[1], Matrix::Zero(4, 4));
  SdarModel lda;
  lda.mu1_hat = mu1;
  lda.mu2_hat = mu2;
  lda.d_hat = Matrix::Zero(4, 4);
  lda.beta_hat = detail::spd_inverse(sigma) * (mu2 - mu1);
  const Matrix z = gaussian_matrix(300, 4, rng);
  EXPECT_EQ(classify_multigroup(z, mg), classify_sdar(z, lda));
}

TEST(Multigroup, IdenticalClassesTieToSmallestIndex) {
  const Matrix sigma = Matrix::Identity(3, 3);
  const Vector mu = Vector::Zero(3);
  FitConfig cfg;
  const MultigroupModel mg = multigroup_from_moments(
      {exact_moments(mu, sigma, 1.0 / 3), exact_moments(mu, sigma, 1.0 / 3), exact_moments(mu, sigma, 1.0 / 3)}, cfg);
  std::mt19937_64 rng(22);
  for (int i = 0; i < 20; ++i) {
    const Vector z = gaussian_vector(3, rng);
    const Vector q = multigroup_scores(z, mg);
    EXPECT_NEAR(q[1], q[2], 1e-12);
    EXPECT_EQ(classify_multigroup(z, mg), 1);
  }
}

TEST(Multigroup, ExactParametersGiveDensityArgmax) {
  std::mt19937_64 rng(23);
  const Index p = 3;
  std::vector<Vector> mus = {Vector::Zero(p), 3.0 * Vector::Unit(p, 0), 3.0 * Vector::Unit(p, 1)};
  std::vector<Matrix> sigmas = {Matrix::Identity(p, p), 0.5 * Matrix::Identity(p, p), 1.5 * Matrix::Identity(p, p)};
  const std::vector<double> pis = {0.5, 0.3, 0.2};
  std::vector<ClassMoments> m;
  for (int k = 0; k < 3; ++k) m.push_back(exact_moments(mus[k], sigmas[k], pis[k]));
  FitConfig cfg;  // lambda 0 recovers the exact terms from population moments
  const MultigroupModel mg = multigroup_from_moments(m, cfg);
  int agree = 0;
  for (int i = 0; i < 1000; ++i) {
    const int k = i % 3;
    const Vector z = mus[k] + std::sqrt(sigmas[k](0, 0)) * gaussian_vector(p, rng);
    int best = 0;
    double best_v = -1e300;
    for (int j = 0; j < 3; ++j) {
      const double v = std::log(pis[j]) + detail::gaussian_log_density(z, mus[j], sigmas[j]);
      if (v > best_v) {
        best_v = v;
        best = j;
      }
    }
    agree += classify_multigroup(z, mg) == best + 1;
  }
  EXPECT_EQ(agree, 1000);
}

TEST(Multigroup, FitRequiresContiguousLabels) {
  LabeledDataset d;
  d.features = Matrix::Random(6, 2);
  d.labels = {1, 1, 3, 3, 1, 3};
  EXPECT_THROW(fit_multigroup(d, FitConfig{}), Error);
}
