// Independent dense two-phase simplex (Bland's rule) used only as a test
// oracle for the interior-point solver. Small problems only.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace sqda::oracle {

// min c^T y  s.t.  G y <= h,  y >= 0. Returns the optimal value, or nullopt
// when infeasible/unbounded.
inline std::optional<double> simplex_min(const Eigen::VectorXd& c, const Eigen::MatrixXd& g,
                                         const Eigen::VectorXd& h) {
  const int m = static_cast<int>(g.rows());
  const int n = static_cast<int>(g.cols());
  int n_art = 0;
  for (int i = 0; i < m; ++i) n_art += h[i] < 0 ? 1 : 0;
  const int cols = n + m + n_art;  // structural, slack, artificial
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, cols + 1);
  std::vector<int> basis(m);
  int art = 0;
  for (int i = 0; i < m; ++i) {
    const double sgn = h[i] < 0 ? -1.0 : 1.0;
    t.row(i).head(n) = sgn * g.row(i);
    t(i, n + i) = sgn;
    t(i, cols) = sgn * h[i];
    if (h[i] < 0) {
      t(i, n + m + art) = 1.0;
      basis[i] = n + m + art;
      ++art;
    } else {
      basis[i] = n + i;
    }
  }
  const double eps = 1e-11;

  auto run = [&](const Eigen::VectorXd& cost, int allowed_cols) -> bool {
    for (int guard = 0; guard < 100000; ++guard) {
      // reduced costs
      int enter = -1;
      for (int j = 0; j < allowed_cols; ++j) {
        double rc = cost[j];
        for (int i = 0; i < m; ++i) rc -= cost[basis[i]] * t(i, j);
        if (rc < -eps) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return true;
      int leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int i = 0; i < m; ++i) {
        if (t(i, enter) > eps) {
          const double ratio = t(i, cols) / t(i, enter);
          if (ratio < best - 1e-14 || (std::abs(ratio - best) <= 1e-14 && leave >= 0 && basis[i] < basis[leave])) {
            best = ratio;
            leave = i;
          }
        }
      }
      if (leave < 0) return false;  // unbounded
      t.row(leave) /= t(leave, enter);
      for (int i = 0; i < m; ++i) {
        if (i != leave && t(i, enter) != 0.0) t.row(i) -= t(i, enter) * t.row(leave);
      }
      basis[leave] = enter;
    }
    return false;
  };

  if (n_art > 0) {
    Eigen::VectorXd cost1 = Eigen::VectorXd::Zero(cols);
    cost1.tail(n_art).setOnes();
    if (!run(cost1, cols)) return std::nullopt;
    double infeas = 0.0;
    for (int i = 0; i < m; ++i) {
      if (basis[i] >= n + m) infeas += t(i, cols);
    }
    if (infeas > 1e-8) return std::nullopt;
    // Pivot remaining zero-level artificials out of the basis when possible.
    for (int i = 0; i < m; ++i) {
      if (basis[i] < n + m) continue;
      for (int j = 0; j < n + m; ++j) {
        if (std::abs(t(i, j)) > 1e-9) {
          t.row(i) /= t(i, j);
          for (int k = 0; k < m; ++k) {
            if (k != i && t(k, j) != 0.0) t.row(k) -= t(k, j) * t.row(i);
          }
          basis[i] = j;
          break;
        }
      }
    }
  }
  Eigen::VectorXd cost2 = Eigen::VectorXd::Zero(cols);
  cost2.head(n) = c;
  if (!run(cost2, n + m)) return std::nullopt;
  double value = 0.0;
  for (int i = 0; i < m; ++i) value += cost2[basis[i]] * t(i, cols);
  return value;
}

// Optimal value of min ||x||_1 s.t. ||A x - b||_inf <= lambda via x = x+ - x-.
inline std::optional<double> dantzig_lp_value(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, double lambda) {
  const Eigen::Index m = a.rows();
  const Eigen::Index n = a.cols();
  Eigen::MatrixXd g(2 * m, 2 * n);
  g << a, -a, -a, a;
  Eigen::VectorXd h(2 * m);
  h << b.array() + lambda, lambda - b.array();
  return simplex_min(Eigen::VectorXd::Ones(2 * n), g, h);
}

}  // namespace sqda::oracle
