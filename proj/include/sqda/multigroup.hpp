#pragma once

// K-class extension with class 1 as the reference group.

#include "sqda/classify.hpp"
#include "sqda/estimate.hpp"

#include <cmath>
#include <vector>

namespace sqda {

/// Per-class terms of the K-group rule. Index 0 holds class 1, whose
/// statistic is the constant -log pi_1; the remaining entries hold
/// d_hat[k] (estimate of Omega_1 - Omega_k), beta_hat[k] (estimate of
/// Omega_1 (mu_k - mu_1)) and logdet_term[k] = log|(Omega_k - Omega_1) Sigma_1 + I|.
struct MultigroupModel {
  int K = 0;
  std::vector<Vector> mu_hat;
  std::vector<Matrix> d_hat;
  std::vector<Vector> beta_hat;
  std::vector<double> logdet_term;
  std::vector<double> log_prior;

  Index dim() const { return mu_hat.empty() ? 0 : mu_hat.front().size(); }
};

/// Q_k(z) for every class. For k >= 2, with E_k = Omega_k - Omega_1 = -d_hat[k],
///   Q_k = (z-mu_k)' E_k (z-mu_k)/2 - beta_k'(z - (mu_1+mu_k)/2) - logdet_k/2 - log pi_k,
/// which is -log(pi_k phi_k(z)) up to a shift common to all k.
inline Vector multigroup_scores(const Vector& z, const MultigroupModel& model) {
  detail::require_dims(z.size(), model.dim(), "z");
  Vector q(model.K);
  q[0] = -model.log_prior[0];
  for (int k = 1; k < model.K; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    const Vector c = z - model.mu_hat[kk];
    const Vector mid = 0.5 * (model.mu_hat[0] + model.mu_hat[kk]);
    q[k] = -0.5 * c.dot(model.d_hat[kk] * c) - model.beta_hat[kk].dot(z - mid) -
           0.5 * model.logdet_term[kk] - model.log_prior[kk];
  }
  return q;
}

/// argmin_k Q_k(z); ties go to the smallest class index.
inline int classify_multigroup(const Vector& z, const MultigroupModel& model) {
  const Vector q = multigroup_scores(z, model);
  int best = 0;
  for (int k = 1; k < model.K; ++k) {
    if (q[k] < q[best]) best = k;
  }
  return best + 1;
}

inline std::vector<int> classify_multigroup(const Matrix& z, const MultigroupModel& model) {
  std::vector<int> out(static_cast<std::size_t>(z.rows()));
  for (Index i = 0; i < z.rows(); ++i) {
    out[static_cast<std::size_t>(i)] = classify_multigroup(Vector(z.row(i).transpose()), model);
  }
  return out;
}

/// Builds the model from per-class moments; the programs for class k use
/// the Sylvester map on (Sigma_1, Sigma_k) with target Sigma_1 - Sigma_k and
/// the explicit map Sigma_1 with target mu_k - mu_1.
inline MultigroupModel multigroup_from_moments(const std::vector<ClassMoments>& m, const FitConfig& cfg) {
  cfg.check();
  detail::require(m.size() >= 2, ErrorKind::InvalidArgument, "need at least two classes");
  MultigroupModel model;
  model.K = static_cast<int>(m.size());
  const Index p = m[0].dim();
  for (const auto& mk : m) {
    detail::require_dims(mk.dim(), p, "class moments");
    model.mu_hat.push_back(mk.mu_hat);
    model.log_prior.push_back(std::log(mk.pi_hat));
  }
  model.d_hat.push_back(Matrix::Zero(p, p));
  model.beta_hat.push_back(Vector::Zero(p));
  model.logdet_term.push_back(0.0);
  for (std::size_t k = 1; k < m.size(); ++k) {
    GraphEstimate g = estimate_differential_graph(m[0].sigma_hat, m[k].sigma_hat, cfg.lambda1, cfg.solver);
    DirectionEstimate b =
        estimate_direction(m[0].sigma_hat, m[k].mu_hat - m[0].mu_hat, cfg.lambda2, cfg.solver);
    model.logdet_term.push_back(logdet_term(g.d_hat, m[0].sigma_hat));
    model.d_hat.push_back(-g.d_hat);
    model.beta_hat.push_back(std::move(b.beta_hat));
  }
  return model;
}

inline MultigroupModel fit_multigroup(const LabeledDataset& data, const FitConfig& cfg) {
  require_valid(data);
  const auto ids = data.classes();
  const int K = ids.empty() ? 0 : ids.back();
  detail::require(K >= 2 && static_cast<int>(ids.size()) == K, ErrorKind::InvalidArgument,
                  "labels must cover 1..K with K >= 2");
  std::vector<ClassMoments> m;
  for (int k = 1; k <= K; ++k) m.push_back(class_moments(data, k));
  return multigroup_from_moments(m, cfg);
}

}  // namespace sqda
