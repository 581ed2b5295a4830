#pragma once

// Seeded generators: simulation Models 1-6, the two impossibility settings,
// and sampling of training and mixture test sets.

#include "sqda/core.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace sqda {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer over (seed, stream, index). Streams keep problem,
/// training, tuning and test draws apart.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(seed) ^ (stream * 0xd1b54a32d192ed03ULL)) ^ index);
}

enum class Transform { Identity, Cube, Arctan, ArctanCube, Fifth };

inline double apply_transform(Transform t, double x) {
  switch (t) {
    case Transform::Identity: return x;
    case Transform::Cube: return x * x * x;
    case Transform::Arctan: return std::atan(x);
    case Transform::ArctanCube: {
      const double a = std::atan(x);
      return a * a * a;
    }
    case Transform::Fifth: return x * x * x * x * x;
  }
  return x;
}

inline constexpr double kArctanClip = 0.5 * std::numbers::pi - 1e-6;

/// Inverse map; `clipped` is set when an arctan-range latent had to be clipped.
inline double invert_transform(Transform t, double w, bool* clipped = nullptr) {
  auto clip = [&](double v) {
    if (std::abs(v) > kArctanClip) {
      if (clipped) *clipped = true;
      return std::copysign(kArctanClip, v);
    }
    return v;
  };
  switch (t) {
    case Transform::Identity: return w;
    case Transform::Cube: return std::cbrt(w);
    case Transform::Arctan: return std::tan(clip(w));
    case Transform::ArctanCube: return std::tan(clip(std::cbrt(w)));
    case Transform::Fifth: return std::copysign(std::pow(std::abs(w), 0.2), w);
  }
  return w;
}

struct SparsityOptions {
  int s_beta = 10;
  int s_d = 20;
};

/// Ground truth for one simulated problem. `d_true` = Omega2 - Omega1 and
/// `beta_true` = Omega2 (mu2 - mu1).
struct SyntheticProblem {
  std::string model;  // "1".."6", "impossibility-1", "impossibility-2"
  GaussianPairParams theta;
  Matrix omega1;
  Matrix omega2;
  Matrix d_true;
  Vector beta_true;
  std::vector<Transform> transforms;  // empty means identity everywhere
  std::uint64_t seed = 0;
  int d_rescale_steps = 0;

  Index dim() const { return theta.dim(); }
};

namespace detail {

inline Vector standard_normals(Rng& rng, Index n) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = nd(rng);
  return v;
}

inline Matrix base_precision(int model_id, Index p, Rng& rng) {
  Matrix omega(p, p);
  if (model_id == 1) {
    std::normal_distribution<double> nd(0.0, 1.0);
    std::uniform_real_distribution<double> lam(1.0, 2.0);
    Matrix u(p, p);
    for (Index j = 0; j < p; ++j) {
      for (Index i = 0; i < p; ++i) u(i, j) = nd(rng);
    }
    Vector l(p);
    for (Index i = 0; i < p; ++i) l[i] = lam(rng);
    omega = u.transpose() * l.asDiagonal() * u;
    omega.diagonal().array() += 1e-6;
  } else if (model_id == 2) {
    for (Index i = 0; i < p; ++i) {
      for (Index j = 0; j < p; ++j) omega(i, j) = std::pow(0.5, static_cast<double>(std::abs(i - j)));
    }
  } else {
    std::bernoulli_distribution edge(0.05);
    std::uniform_real_distribution<double> mag(0.5, 1.0);
    std::bernoulli_distribution sign(0.5);
    omega.setZero();
    for (Index i = 0; i < p; ++i) {
      for (Index j = i + 1; j < p; ++j) {
        if (edge(rng)) {
          const double m = mag(rng);
          omega(i, j) = omega(j, i) = sign(rng) ? m : -m;
        }
      }
    }
    const double lo = min_eigenvalue(omega);
    omega.diagonal().array() += std::max(-lo, 0.0) + 0.05;
  }
  return symmetrized(omega);
}

// s nonzeros at distinct strictly-upper positions, mirrored below.
inline Matrix sparse_symmetric(Index p, int s, Rng& rng) {
  const Index slots = p * (p - 1) / 2;
  std::vector<Index> idx(static_cast<std::size_t>(slots));
  std::iota(idx.begin(), idx.end(), Index{0});
  for (int k = 0; k < s; ++k) {
    std::uniform_int_distribution<Index> pick(k, slots - 1);
    std::swap(idx[static_cast<std::size_t>(k)], idx[static_cast<std::size_t>(pick(rng))]);
  }
  std::normal_distribution<double> nd(0.0, 1.0);
  Matrix d = Matrix::Zero(p, p);
  for (int k = 0; k < s; ++k) {
    // Decode a linear index into (row, col) with row < col.
    Index rem = idx[static_cast<std::size_t>(k)];
    Index row = 0;
    while (rem >= p - 1 - row) {
      rem -= p - 1 - row;
      ++row;
    }
    const Index col = row + 1 + rem;
    double v = nd(rng);
    while (v == 0.0) v = nd(rng);
    d(row, col) = d(col, row) = v;
  }
  return d;
}

inline void finish_problem(SyntheticProblem& pr) {
  pr.theta.sigma1 = spd_inverse(pr.omega1);
  pr.theta.sigma2 = spd_inverse(pr.omega2);
  pr.d_true = pr.omega2 - pr.omega1;
}

}  // namespace detail

/// Models 1 (random U'LU), 2 (AR(1), rho = 0.5) and 3 (Erdos-Renyi).
inline SyntheticProblem gen_model(int model_id, Index p, std::uint64_t seed, const SparsityOptions& sp = {}) {
  detail::require(model_id >= 1 && model_id <= 3, ErrorKind::InvalidArgument,
                  "gen_model expects model 1, 2 or 3");
  const bool defaults = sp.s_beta == 10 && sp.s_d == 20;
  detail::require(!defaults || p >= 30, ErrorKind::DimensionTooSmall,
                  "models 1-3 need p >= 30, got " + std::to_string(p));
  detail::require(sp.s_beta >= 0 && sp.s_d >= 0 && p >= sp.s_beta && p * (p - 1) / 2 >= sp.s_d && p >= 2,
                  ErrorKind::DimensionTooSmall, "p too small for the requested sparsity");
  Rng rng(seed);
  SyntheticProblem pr;
  pr.model = std::to_string(model_id);
  pr.seed = seed;
  pr.omega2 = detail::base_precision(model_id, p, rng);
  Matrix d = detail::sparse_symmetric(p, sp.s_d, rng);
  // Shrink D until Omega1 keeps a positive margin. The margin never
  // exceeds half of Omega2's own smallest eigenvalue, so the loop ends.
  const double margin = std::min(0.05, 0.5 * detail::min_eigenvalue(pr.omega2));
  while (detail::min_eigenvalue(pr.omega2 + d) <= margin) {
    d *= 0.9;
    ++pr.d_rescale_steps;
  }
  pr.omega1 = detail::symmetrized(pr.omega2 + d);
  detail::finish_problem(pr);

  Vector b = Vector::Zero(p);
  b.head(sp.s_beta).setOnes();
  pr.theta.pi1 = pr.theta.pi2 = 0.5;
  pr.theta.mu1 = Vector::Zero(p);
  pr.theta.mu2 = pr.theta.mu1 - pr.theta.sigma2 * b;
  // mu2 - mu1 = -Sigma2 b, hence Omega2 (mu2 - mu1) = -b.
  pr.beta_true = -b;
  return pr;
}

/// Models 4-6: Models 1-3 observed through x^3 (features 1-5), arctan
/// (11-15), arctan^3 (21-50) and x^5 (51-85), 1-based and inclusive.
inline SyntheticProblem gen_copula_model(int model_id, Index p, std::uint64_t seed,
                                         const SparsityOptions& sp = {}) {
  detail::require(model_id >= 4 && model_id <= 6, ErrorKind::InvalidArgument,
                  "gen_copula_model expects model 4, 5 or 6");
  detail::require(p >= 85, ErrorKind::DimensionTooSmall, "models 4-6 need p >= 85");
  SyntheticProblem pr = gen_model(model_id - 3, p, seed, sp);
  pr.model = std::to_string(model_id);
  pr.transforms.assign(static_cast<std::size_t>(p), Transform::Identity);
  auto fill = [&](int lo, int hi, Transform t) {
    for (int j = lo; j <= hi; ++j) pr.transforms[static_cast<std::size_t>(j - 1)] = t;
  };
  fill(1, 5, Transform::Cube);
  fill(11, 15, Transform::Arctan);
  fill(21, 50, Transform::ArctanCube);
  fill(51, 85, Transform::Fifth);
  return pr;
}

/// Setting 1: mu1 = -mu2 = 1/sqrt(p), identity covariances.
/// Setting 2: mu1 = -mu2 = e1, Sigma1 = I, Omega2 = I + (2/sqrt(p)) on the first p/2 diagonal entries.
inline SyntheticProblem gen_impossibility(int setting, Index p, std::uint64_t seed = 0) {
  detail::require(setting == 1 || setting == 2, ErrorKind::InvalidArgument,
                  "impossibility setting must be 1 or 2");
  detail::require(p >= 1, ErrorKind::DimensionTooSmall, "p must be positive");
  SyntheticProblem pr;
  pr.model = "impossibility-" + std::to_string(setting);
  pr.seed = seed;
  pr.theta.pi1 = pr.theta.pi2 = 0.5;
  const double rp = std::sqrt(static_cast<double>(p));
  pr.omega1 = Matrix::Identity(p, p);
  pr.omega2 = Matrix::Identity(p, p);
  if (setting == 1) {
    pr.theta.mu1 = Vector::Constant(p, 1.0 / rp);
  } else {
    detail::require(p % 2 == 0, ErrorKind::OddDimension, "setting 2 needs an even p");
    pr.theta.mu1 = Vector::Unit(p, 0);
    pr.omega2.diagonal().head(p / 2).array() += 2.0 / rp;
  }
  pr.theta.mu2 = -pr.theta.mu1;
  pr.theta.sigma1 = Matrix::Identity(p, p);
  pr.theta.sigma2 = Matrix::Identity(p, p);
  pr.theta.sigma2.diagonal() = pr.omega2.diagonal().cwiseInverse();
  pr.d_true = pr.omega2 - pr.omega1;
  pr.beta_true = pr.omega2 * (pr.theta.mu2 - pr.theta.mu1);
  return pr;
}

inline SyntheticProblem gen_problem(int model_id, Index p, std::uint64_t seed, const SparsityOptions& sp = {}) {
  return model_id <= 3 ? gen_model(model_id, p, seed, sp) : gen_copula_model(model_id, p, seed, sp);
}

namespace detail {

inline Matrix cholesky_factor(const Matrix& sigma) {
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::FactorizationFailure, "covariance is not positive definite");
  }
  return llt.matrixL();
}

inline void draw_rows(const SyntheticProblem& pr, const std::vector<int>& labels, Rng& rng, Matrix& out) {
  const Index p = pr.dim();
  const Matrix l1 = cholesky_factor(pr.theta.sigma1);
  const Matrix l2 = cholesky_factor(pr.theta.sigma2);
  out.resize(static_cast<Index>(labels.size()), p);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool first = labels[i] == 1;
    Vector w = (first ? pr.theta.mu1 : pr.theta.mu2) + (first ? l1 : l2) * standard_normals(rng, p);
    // Copula models observe f(W) for the latent Gaussian W.
    if (!pr.transforms.empty()) {
      for (Index j = 0; j < p; ++j) w[j] = apply_transform(pr.transforms[static_cast<std::size_t>(j)], w[j]);
    }
    out.row(static_cast<Index>(i)) = w.transpose();
  }
}

}  // namespace detail

/// n1 rows of class 1 followed by n2 rows of class 2.
inline LabeledDataset sample(const SyntheticProblem& pr, Index n1, Index n2, std::uint64_t seed) {
  detail::require(n1 >= 2 && n2 >= 2, ErrorKind::TooFewSamples, "need n1, n2 >= 2");
  LabeledDataset ds;
  ds.labels.assign(static_cast<std::size_t>(n1), 1);
  ds.labels.insert(ds.labels.end(), static_cast<std::size_t>(n2), 2);
  Rng rng(seed);
  detail::draw_rows(pr, ds.labels, rng, ds.features);
  return ds;
}

/// Mixture draws: each label ~ 1 + Bernoulli(pi2), then the class vector.
inline LabeledDataset sample_mixture(const SyntheticProblem& pr, Index n, std::uint64_t seed) {
  detail::require(n >= 1, ErrorKind::InvalidArgument, "mixture size must be positive");
  Rng rng(seed);
  std::bernoulli_distribution second(pr.theta.pi2);
  LabeledDataset ds;
  ds.labels.resize(static_cast<std::size_t>(n));
  for (auto& l : ds.labels) l = second(rng) ? 2 : 1;
  detail::draw_rows(pr, ds.labels, rng, ds.features);
  return ds;
}

}  // namespace sqda
