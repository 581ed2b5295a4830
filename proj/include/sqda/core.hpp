// Domain types shared by every sqda module: datasets, Gaussian two-class
// parameters, per-class moments, fitted SDAR models and solver settings.
#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sqda {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

enum class ErrorKind {
  DimensionMismatch,
  InvalidArgument,
  UnknownClass,
  TooFewSamples,
  MoreThanTwoClasses,
  DimensionTooSmall,
  OddDimension,
  Infeasible,
  NumericalBreakdown,
  NonPositiveEigenvalue,
  FactorizationFailure,
  DegenerateVariance,
  AllCandidatesInvalid,
  ParseError,
  NonNumericCell,
  MissingLabelColumn,
  IoError,
  SchemaVersionMismatch,
  CorruptModel,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::UnknownClass: return "UnknownClass";
    case ErrorKind::TooFewSamples: return "TooFewSamples";
    case ErrorKind::MoreThanTwoClasses: return "MoreThanTwoClasses";
    case ErrorKind::DimensionTooSmall: return "DimensionTooSmall";
    case ErrorKind::OddDimension: return "OddDimension";
    case ErrorKind::Infeasible: return "Infeasible";
    case ErrorKind::NumericalBreakdown: return "NumericalBreakdown";
    case ErrorKind::NonPositiveEigenvalue: return "NonPositiveEigenvalue";
    case ErrorKind::FactorizationFailure: return "FactorizationFailure";
    case ErrorKind::DegenerateVariance: return "DegenerateVariance";
    case ErrorKind::AllCandidatesInvalid: return "AllCandidatesInvalid";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::NonNumericCell: return "NonNumericCell";
    case ErrorKind::MissingLabelColumn: return "MissingLabelColumn";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::SchemaVersionMismatch: return "SchemaVersionMismatch";
    case ErrorKind::CorruptModel: return "CorruptModel";
  }
  return "Unknown";
}

/// Coarse grouping used for CLI exit codes.
enum class ErrorCategory { Validation, Numerical, Io };

inline ErrorCategory category_of(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Infeasible:
    case ErrorKind::NumericalBreakdown:
    case ErrorKind::NonPositiveEigenvalue:
    case ErrorKind::FactorizationFailure:
    case ErrorKind::DegenerateVariance:
    case ErrorKind::AllCandidatesInvalid:
      return ErrorCategory::Numerical;
    case ErrorKind::ParseError:
    case ErrorKind::NonNumericCell:
    case ErrorKind::MissingLabelColumn:
    case ErrorKind::IoError:
    case ErrorKind::SchemaVersionMismatch:
    case ErrorKind::CorruptModel:
      return ErrorCategory::Io;
    default:
      return ErrorCategory::Validation;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  ErrorCategory category() const noexcept { return category_of(kind_); }

 private:
  ErrorKind kind_;
};

namespace detail {

inline void require(bool cond, ErrorKind kind, const std::string& msg) {
  if (!cond) throw Error(kind, msg);
}

inline void require_dims(Index got, Index want, const char* what) {
  if (got != want) {
    std::ostringstream os;
    os << what << ": expected dimension " << want << ", got " << got;
    throw Error(ErrorKind::DimensionMismatch, os.str());
  }
}

inline Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

inline double max_asymmetry(const Matrix& m) {
  return m.rows() == 0 ? 0.0 : (m - m.transpose()).cwiseAbs().maxCoeff();
}

inline double min_eigenvalue(const Matrix& sym) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

// Inverse of an SPD matrix through its Cholesky factor, symmetrized.
inline Matrix spd_inverse(const Matrix& a) {
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::FactorizationFailure, "matrix is not positive definite");
  }
  return symmetrized(llt.solve(Matrix::Identity(a.rows(), a.cols())));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

/// n observations (rows) of p features with integer class ids in 1..K.
struct LabeledDataset {
  Matrix features;
  std::vector<int> labels;

  Index rows() const { return features.rows(); }
  Index cols() const { return features.cols(); }

  /// Sorted distinct class ids.
  std::vector<int> classes() const {
    std::vector<int> ids(labels.begin(), labels.end());
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
  }

  Index count(int class_id) const {
    return static_cast<Index>(std::count(labels.begin(), labels.end(), class_id));
  }

  /// Rows carrying the given class id, in original order.
  Matrix rows_of(int class_id) const {
    Matrix out(count(class_id), cols());
    Index r = 0;
    for (Index i = 0; i < rows(); ++i) {
      if (labels[static_cast<std::size_t>(i)] == class_id) out.row(r++) = features.row(i);
    }
    return out;
  }

  LabeledDataset subset(const std::vector<Index>& idx) const {
    LabeledDataset out;
    out.features.resize(static_cast<Index>(idx.size()), cols());
    out.labels.reserve(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      out.features.row(static_cast<Index>(i)) = features.row(idx[i]);
      out.labels.push_back(labels[static_cast<std::size_t>(idx[i])]);
    }
    return out;
  }
};

struct Violation {
  std::string kind;  // "shape", "class-count", "finiteness"
  std::string message;
  Index row = -1;
  Index col = -1;
};

/// Structured well-formedness check. Never throws; an empty result means valid.
inline std::vector<Violation> validate_dataset(const LabeledDataset& data) {
  std::vector<Violation> out;
  const Index n = data.rows();
  const Index p = data.cols();
  if (static_cast<std::size_t>(n) != data.labels.size()) {
    std::ostringstream os;
    os << "feature rows (" << n << ") and labels (" << data.labels.size() << ") differ";
    out.push_back({"shape", os.str()});
  }
  if (n < 4) out.push_back({"shape", "need at least 4 observations, got " + std::to_string(n)});
  if (p < 1) out.push_back({"shape", "need at least 1 feature"});

  std::map<int, Index> counts;
  for (int id : data.labels) ++counts[id];
  int max_id = 0;
  for (const auto& [id, c] : counts) {
    if (id < 1) {
      out.push_back({"class-count", "class id " + std::to_string(id) + " is not in 1..K"});
      continue;
    }
    max_id = std::max(max_id, id);
  }
  for (int k = 1; k <= max_id; ++k) {
    const auto it = counts.find(k);
    const Index c = it == counts.end() ? 0 : it->second;
    if (c < 2) {
      out.push_back({"class-count", "class " + std::to_string(k) + " has n_k < 2 (n_k = " +
                                        std::to_string(c) + ")"});
    }
  }
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < p; ++j) {
      if (!std::isfinite(data.features(i, j))) {
        std::ostringstream os;
        os << "non-finite value at row " << i << ", column " << j;
        out.push_back({"finiteness", os.str(), i, j});
      }
    }
  }
  return out;
}

inline void require_valid(const LabeledDataset& data) {
  const auto v = validate_dataset(data);
  if (!v.empty()) throw Error(ErrorKind::InvalidArgument, v.front().message);
}

// ---------------------------------------------------------------------------
// Gaussian two-class parameters
// ---------------------------------------------------------------------------

struct GaussianPairParams {
  double pi1 = 0.5;
  double pi2 = 0.5;
  Vector mu1;
  Vector mu2;
  Matrix sigma1;
  Matrix sigma2;

  Index dim() const { return mu1.size(); }

  /// Throws InvalidArgument/DimensionMismatch when the invariants fail.
  void check() const {
    const Index p = mu1.size();
    detail::require_dims(mu2.size(), p, "mu2");
    detail::require_dims(sigma1.rows(), p, "sigma1 rows");
    detail::require_dims(sigma1.cols(), p, "sigma1 cols");
    detail::require_dims(sigma2.rows(), p, "sigma2 rows");
    detail::require_dims(sigma2.cols(), p, "sigma2 cols");
    detail::require(pi1 > 0 && pi1 < 1 && pi2 > 0 && pi2 < 1, ErrorKind::InvalidArgument,
                    "priors must lie in (0,1)");
    detail::require(std::abs(pi1 + pi2 - 1.0) <= 1e-12, ErrorKind::InvalidArgument,
                    "priors must sum to one");
    for (const Matrix* s : {&sigma1, &sigma2}) {
      detail::require(detail::max_asymmetry(*s) <= 1e-10, ErrorKind::InvalidArgument,
                      "covariance is not symmetric");
      detail::require(detail::min_eigenvalue(detail::symmetrized(*s)) > 0,
                      ErrorKind::InvalidArgument, "covariance is not positive definite");
    }
  }
};

namespace detail {

// log N(z; mu, sigma) via Cholesky; never forms the inverse.
inline double gaussian_log_density(const Vector& z, const Vector& mu, const Matrix& sigma) {
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::FactorizationFailure, "covariance factorization failed");
  }
  const Vector w = llt.matrixL().solve(z - mu);
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const double p = static_cast<double>(z.size());
  return -0.5 * (p * std::log(2.0 * std::numbers::pi) + logdet + w.squaredNorm());
}

}  // namespace detail

/// log(pi1 phi(z; mu1, Sigma1)) - log(pi2 phi(z; mu2, Sigma2)), evaluated
/// straight from the two densities. Used as the reference for discriminants.
inline double log_likelihood_ratio(const Vector& z, const GaussianPairParams& theta) {
  detail::require_dims(z.size(), theta.dim(), "z");
  return std::log(theta.pi1) + detail::gaussian_log_density(z, theta.mu1, theta.sigma1) -
         std::log(theta.pi2) - detail::gaussian_log_density(z, theta.mu2, theta.sigma2);
}

// ---------------------------------------------------------------------------
// Moments and models
// ---------------------------------------------------------------------------

struct ClassMoments {
  Index n_k = 0;
  Vector mu_hat;
  Matrix sigma_hat;
  double pi_hat = 0.5;

  ClassMoments() = default;
  ClassMoments(Index n, Vector mu, const Matrix& sigma, double pi)
      : n_k(n), mu_hat(std::move(mu)), sigma_hat(detail::symmetrized(sigma)), pi_hat(pi) {
    detail::require_dims(sigma_hat.rows(), mu_hat.size(), "sigma_hat");
    detail::require_dims(sigma_hat.cols(), mu_hat.size(), "sigma_hat");
  }

  Index dim() const { return mu_hat.size(); }
};

/// Fitted two-class sparse QDA rule. `log_prior_ratio` enters the
/// discriminant exactly as stored.
struct SdarModel {
  Vector mu1_hat;
  Vector mu2_hat;
  Matrix d_hat;
  Vector beta_hat;
  double logdet_term = 0.0;
  double log_prior_ratio = 0.0;
  double lambda1 = 0.0;
  double lambda2 = 0.0;

  Index dim() const { return mu1_hat.size(); }
};

struct SolverConfig {
  double lambda = 0.0;
  int max_outer_iters = 100;
  double duality_gap_tol = 1e-7;
  double cg_tol = 1e-9;
  int cg_max_iters = 500;

  void check() const {
    detail::require(lambda >= 0 && std::isfinite(lambda), ErrorKind::InvalidArgument,
                    "lambda must be a finite nonnegative number");
    detail::require(duality_gap_tol > 0 && cg_tol > 0, ErrorKind::InvalidArgument,
                    "solver tolerances must be positive");
    detail::require(max_outer_iters > 0 && cg_max_iters > 0, ErrorKind::InvalidArgument,
                    "iteration limits must be positive");
  }
};

}  // namespace sqda
