// Fits SDAR and CSDAR on one draw of the AR(1) model at p = 40 and compares
// their test error with the Bayes rule built from the true parameters.
//
//   ./model2_demo [seed]

#include "sqda/sqda.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>

using namespace sqda;

int main(int argc, char** argv) {
  const std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 7;
  const Index p = 40;
  const Index n = 200;

  const SyntheticProblem pr = gen_model(2, p, derive_seed(seed, 0, 0));
  const LabeledDataset train = sample(pr, n, n, derive_seed(seed, 1, 0));
  const LabeledDataset test = sample(pr, 500, 500, derive_seed(seed, 2, 0));

  const FitConfig cfg = default_fit_config(p, n, n);
  const SdarFit fit = fit_sdar_detailed(train, cfg);
  const SdarModel& m = fit.model;

  // Interior-point iterates are never exactly sparse; count entries that
  // survive a small relative cut.
  const double cut = 1e-3 * m.d_hat.cwiseAbs().maxCoeff();
  Index nnz = 0;
  for (Index i = 0; i < p; ++i) {
    for (Index j = i + 1; j < p; ++j) nnz += std::abs(m.d_hat(i, j)) > cut;
  }
  std::printf("lambda1 %.4f  lambda2 %.4f\n", m.lambda1, m.lambda2);
  std::printf("off-diagonal entries of D_hat above 1e-3 of the max: %lld (truth has %d)\n", static_cast<long long>(nnz),
              SparsityOptions{}.s_d);
  std::printf("||D_hat - D||_F = %.3f  ||D||_F = %.3f\n", (m.d_hat - pr.d_true).norm(), pr.d_true.norm());
  std::printf("||beta_hat - beta||_2 = %.3f  ||beta||_2 = %.3f\n", (m.beta_hat - pr.beta_true).norm(),
              pr.beta_true.norm());

  const double e_sdar = error_rate(classify_sdar(test.features, m), test.labels);
  const CopulaModel cm = fit_csdar(train, cfg);
  const double e_csdar = error_rate(classify_csdar(test.features, cm), test.labels);
  const double e_oracle = error_rate(classify_oracle(test.features, pr.theta), test.labels);
  std::printf("test error  sdar %.3f  csdar %.3f  oracle %.3f\n", e_sdar, e_csdar, e_oracle);
  return 0;
}
