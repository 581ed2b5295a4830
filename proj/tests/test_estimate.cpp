#include "sqda/datagen.hpp"
#include "sqda/estimate.hpp"
#include "support/lp_oracle.hpp"
#include "support/random.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace sqda;
using namespace sqda::testing_support;

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

SolverConfig tight() { return SolverConfig{}; }

double constraint_violation(const Matrix& s1, const Matrix& s2, const Matrix& d) {
  return (0.5 * (s1 * d * s2 + s2 * d * s1) - (s1 - s2)).cwiseAbs().maxCoeff();
}

}  // namespace

TEST(LambdaDefaults, TwiceTheRate) {
  const FitConfig cfg = default_fit_config(100, 200, 150);
  EXPECT_DOUBLE_EQ(cfg.lambda1, 2.0 * std::sqrt(std::log(100.0) / 150.0));
  EXPECT_EQ(cfg.lambda1, cfg.lambda2);
}

TEST(DifferentialGraph, EqualCovariancesGiveZero) {
  std::mt19937_64 rng(1);
  const Matrix s = random_spd(5, rng);
  for (double lambda : {0.0, 0.01, 1.0}) {
    const GraphEstimate g = estimate_differential_graph(s, s, lambda, tight());
    EXPECT_EQ(g.d_hat, Matrix::Zero(5, 5));
  }
}

TEST(DifferentialGraph, PopulationDiagonalExample) {
  const Matrix s1 = Matrix::Identity(2, 2);
  const Matrix s2 = Vector{{0.5, 1.0}}.asDiagonal();
  const GraphEstimate g = estimate_differential_graph(s1, s2, 0.0, tight());
  const Matrix expected = Vector{{1.0, 0.0}}.asDiagonal();
  EXPECT_LE((g.d_hat - expected).cwiseAbs().maxCoeff(), 1e-6);
  // The 4-variable LP agrees on the optimal objective.
  Matrix kron(4, 4);
  for (Index i = 0; i < 2; ++i)
    for (Index j = 0; j < 2; ++j) kron.block(2 * i, 2 * j, 2, 2) = 0.5 * (s1(i, j) * s2 + s2(i, j) * s1);
  const Matrix target = s1 - s2;
  const auto lp = oracle::dantzig_lp_value(kron, Eigen::Map<const Vector>(target.data(), 4), 1e-9);
  ASSERT_TRUE(lp.has_value());
  EXPECT_NEAR(g.report.objective, *lp, 1e-6);
}

TEST(DifferentialGraph, FeasibleAndSymmetricOnSampleMoments) {
  std::mt19937_64 rng(2);
  const SyntheticProblem pr = gen_model(2, 12, 3, SparsityOptions{4, 4});
  const LabeledDataset d = sample(pr, 150, 150, 4);
  const ClassMoments m1 = class_moments(d, 1), m2 = class_moments(d, 2);
  const double lambda = 2.0 * lambda_scale(12, 150);
  const GraphEstimate g = estimate_differential_graph(m1.sigma_hat, m2.sigma_hat, lambda, tight());
  EXPECT_EQ(g.d_hat, g.d_hat.transpose());
  EXPECT_LE(constraint_violation(m1.sigma_hat, m2.sigma_hat, g.d_hat), lambda * (1 + 1e-5));
}

TEST(DifferentialGraph, RecoversModelTwoDifference) {
  const Index p = 10;
  const SyntheticProblem pr = gen_model(2, p, 77, SparsityOptions{3, 4});
  const LabeledDataset d = sample(pr, 2000, 2000, 78);
  FitConfig cfg;
  cfg.lambda1 = 3.0 * lambda_scale(p, 2000);
  const GraphEstimate g = estimate_differential_graph(class_moments(d, 1), class_moments(d, 2), cfg);
  EXPECT_LE((g.d_hat - pr.d_true).norm(), 0.8);
}

TEST(Direction, EqualMeansGiveZero) {
  std::mt19937_64 rng(5);
  const Matrix s = random_spd(4, rng);
  for (double lambda : {0.0, 0.3}) {
    EXPECT_EQ(estimate_direction(s, Vector::Zero(4), lambda, tight()).beta_hat, Vector::Zero(4));
  }
}

TEST(Direction, IdentityCovarianceRecoversDelta) {
  const Vector delta = 2.0 * Vector::Unit(6, 0);
  const DirectionEstimate b = estimate_direction(Matrix::Identity(6, 6), delta, 0.0, tight());
  EXPECT_LE((b.beta_hat - delta).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Direction, RecoversSparseAr1Direction) {
  const Index p = 10;
  const SyntheticProblem pr = gen_model(2, p, 91, SparsityOptions{3, 4});
  const LabeledDataset d = sample(pr, 2000, 2000, 92);
  FitConfig cfg;
  cfg.lambda2 = 3.0 * lambda_scale(p, 2000);
  const DirectionEstimate b = estimate_direction(class_moments(d, 1), class_moments(d, 2), cfg);
  EXPECT_LE((b.beta_hat - pr.beta_true).norm(), 0.5);
}

TEST(Direction, ZeroIsOptimalWhenFeasible) {
  std::mt19937_64 rng(6);
  const Matrix s = random_spd(5, rng);
  const Vector delta{{0.1, -0.2, 0.05, 0.0, 0.15}};
  const DirectionEstimate b = estimate_direction(s, delta, 0.2, tight());
  EXPECT_LE(b.beta_hat.lpNorm<1>(), 0.0);
}

TEST(FitSdar, IdenticalBalancedClassesGiveNullModel) {
  LabeledDataset d;
  std::mt19937_64 rng(7);
  const Matrix x = gaussian_matrix(30, 4, rng);
  d.features.resize(60, 4);
  d.features << x, x;
  for (int i = 0; i < 60; ++i) d.labels.push_back(i < 30 ? 1 : 2);
  FitConfig cfg;
  cfg.lambda1 = cfg.lambda2 = 10.0;
  const SdarModel m = fit_sdar(d, cfg);
  EXPECT_EQ(m.d_hat, Matrix::Zero(4, 4));
  EXPECT_EQ(m.beta_hat, Vector::Zero(4));
  EXPECT_EQ(m.logdet_term, 0.0);
  EXPECT_EQ(m.log_prior_ratio, 0.0);
  EXPECT_EQ(m.lambda1, 10.0);
}

TEST(FitSdar, PriorRatioFromCounts) {
  std::mt19937_64 rng(8);
  LabeledDataset d;
  d.features = gaussian_matrix(200, 3, rng);
  for (int i = 0; i < 200; ++i) d.labels.push_back(i < 120 ? 1 : 2);
  const SdarModel m = fit_sdar(d, default_fit_config(3, 120, 80));
  EXPECT_NEAR(m.log_prior_ratio, std::log(1.5), 1e-15);
}

TEST(FitSdar, RejectsThreeClasses) {
  std::mt19937_64 rng(9);
  LabeledDataset d;
  d.features = gaussian_matrix(9, 2, rng);
  d.labels = {1, 1, 1, 2, 2, 2, 3, 3, 3};
  try {
    fit_sdar(d, FitConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MoreThanTwoClasses);
  }
}

TEST(FitSdar, ScalarProblem) {
  std::mt19937_64 rng(10);
  LabeledDataset d;
  d.features.resize(200, 1);
  for (int i = 0; i < 200; ++i) {
    d.features(i, 0) = i < 100 ? rng() % 1000 / 1000.0 : 2.0 + 2.0 * (rng() % 1000 / 1000.0);
    d.labels.push_back(i < 100 ? 1 : 2);
  }
  const SdarModel m = fit_sdar(d, default_fit_config(1, 100, 100));
  EXPECT_EQ(classify_sdar(Vector(Vector::Constant(1, 0.5)), m), 1);
  EXPECT_EQ(classify_sdar(Vector(Vector::Constant(1, 3.0)), m), 2);
}

TEST(Adaptivity, EqualSampleCovariancesGiveAffineRule) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const SyntheticProblem pr = gen_model(2, 8, seed, SparsityOptions{3, 3});
    const LabeledDataset d = sample(pr, 60, 60, seed + 50);
    ClassMoments m1 = class_moments(d, 1), m2 = class_moments(d, 2);
    const Matrix pooled = 0.5 * (m1.sigma_hat + m2.sigma_hat);
    m1 = ClassMoments(m1.n_k, m1.mu_hat, pooled, m1.pi_hat);
    m2 = ClassMoments(m2.n_k, m2.mu_hat, pooled, m2.pi_hat);
    const FitConfig cfg = default_fit_config(8, 60, 60);
    GraphEstimate g = estimate_differential_graph(m1, m2, cfg);
    ASSERT_EQ(g.d_hat, Matrix::Zero(8, 8));
    DirectionEstimate b = estimate_direction(m1, m2, cfg);
    const SdarModel m = assemble_sdar(m1.mu_hat, m2.mu_hat, m1.sigma_hat, g.d_hat, b.beta_hat, 0.0, cfg.lambda1, cfg.lambda2);
    std::mt19937_64 rng(seed);
    const Vector z0 = gaussian_vector(8, rng), z1 = gaussian_vector(8, rng);
    // Affine along a segment: the midpoint value is the mean of the ends.
    const double q0 = discriminant(z0, m), q1 = discriminant(z1, m), qm = discriminant(Vector(0.5 * (z0 + z1)), m);
    EXPECT_NEAR(qm, 0.5 * (q0 + q1), 1e-10 * (1 + std::abs(q0) + std::abs(q1)));
  }
}

TEST(RateCheck, ErrorsShrinkWithSampleSize) {
  const Index p = 20;
  const SparsityOptions sp{4, 4};
  SolverConfig solver;
  solver.duality_gap_tol = 1e-5;
  auto errors = [&](Index n) {
    std::vector<double> ed, eb;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const SyntheticProblem pr = gen_model(2, p, 1000 + seed, sp);
      const LabeledDataset d = sample(pr, n, n, 5000 + seed);
      FitConfig cfg = default_fit_config(p, n, n);
      cfg.solver = solver;
      const ClassMoments m1 = class_moments(d, 1), m2 = class_moments(d, 2);
      ed.push_back((estimate_differential_graph(m1, m2, cfg).d_hat - pr.d_true).norm());
      eb.push_back((estimate_direction(m1, m2, cfg).beta_hat - pr.beta_true).norm());
    }
    return std::make_pair(median(ed), median(eb));
  };
  const auto small = errors(500);
  const auto large = errors(2000);
  EXPECT_LE(large.first, 0.75 * small.first);
  EXPECT_LE(large.second, 0.75 * small.second);
}
