// Dantzig-selector style l1 minimization
//
//     minimize ||x||_1  subject to  ||A x - b||_inf <= lambda
//
// with A given as a matrix-free linear operator. The program is solved as
// the LP  min sum(u)  s.t. |x| <= u, |A x - b| <= lambda  by a primal-dual
// interior-point method whose Newton systems are reduced to
//
//     (A^T S A + diag(sx)) dx = rhs
//
// and solved with preconditioned conjugate gradients (Jacobi unless the
// operator supplies its own). A strictly feasible start comes from the
// operator's exact inverse when it has one, then a least-squares solve,
// then a phase-1 barrier method minimizing ||A x - b||_inf.
#pragma once

#include "sqda/core.hpp"

#include <functional>
#include <limits>
#include <random>

namespace sqda {

/// Linear map x -> A x with its adjoint.
struct ConstraintOperator {
  using Map = std::function<Vector(const Vector&)>;

  Index dim_in = 0;
  Index dim_out = 0;
  Map apply;
  Map apply_adjoint;
  /// Optional: w -> diag(A^T diag(w) A). Enables Jacobi preconditioning.
  Map weighted_gram_diagonal;
  // Optional exact inverse for square invertible A; used for the start point.
  Map solve;
  /// Optional: (w, s) -> approximate inverse of A^T diag(w) A + diag(s).
  std::function<Map(const Vector&, const Vector&)> preconditioner;
};

enum class SolveStatus { Converged, MaxIterations, CgStagnation };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::MaxIterations: return "max-iterations";
    case SolveStatus::CgStagnation: return "cg-stagnation";
  }
  return "unknown";
}

struct SolveReport {
  Vector solution;
  double objective = 0.0;
  double max_constraint_violation = 0.0;  // ||A x - b||_inf
  int iterations = 0;
  bool converged = false;
  double duality_gap = 0.0;
  SolveStatus status = SolveStatus::Converged;
  int cg_iterations = 0;
  bool used_phase1 = false;
};

// ---------------------------------------------------------------------------
// Operators
// ---------------------------------------------------------------------------

inline ConstraintOperator identity_operator(Index n) {
  ConstraintOperator op;
  op.dim_in = op.dim_out = n;
  op.apply = [](const Vector& x) { return x; };
  op.apply_adjoint = [](const Vector& y) { return y; };
  op.weighted_gram_diagonal = [](const Vector& w) { return w; };
  return op;
}

inline ConstraintOperator matrix_operator(const Matrix& m) {
  detail::require(m.allFinite(), ErrorKind::InvalidArgument, "operator matrix has non-finite entries");
  ConstraintOperator op;
  op.dim_in = m.cols();
  op.dim_out = m.rows();
  op.apply = [m](const Vector& x) -> Vector {
    detail::require_dims(x.size(), m.cols(), "matrix_operator input");
    return m * x;
  };
  op.apply_adjoint = [m](const Vector& y) -> Vector {
    detail::require_dims(y.size(), m.rows(), "matrix_operator adjoint input");
    return m.transpose() * y;
  };
  const Matrix sq = m.cwiseAbs2();
  op.weighted_gram_diagonal = [sq](const Vector& w) -> Vector { return sq.transpose() * w; };
  return op;
}

/// D -> (S1 D S2 + S2 D S1) / 2 acting on column-major vec(D). Two p x p
/// products per application for symmetric D, four otherwise; the p^2 x p^2
/// Kronecker matrix is never formed.
/// Self-adjoint for symmetric S1, S2.
inline ConstraintOperator sylvester_operator(const Matrix& sigma1_hat, const Matrix& sigma2_hat) {
  const Index p = sigma1_hat.rows();
  detail::require_dims(sigma1_hat.cols(), p, "sigma1_hat");
  detail::require_dims(sigma2_hat.rows(), p, "sigma2_hat");
  detail::require_dims(sigma2_hat.cols(), p, "sigma2_hat");
  const Matrix s1 = detail::symmetrized(sigma1_hat);
  const Matrix s2 = detail::symmetrized(sigma2_hat);

  ConstraintOperator op;
  op.dim_in = op.dim_out = p * p;
  op.apply = [s1, s2, p](const Vector& x) -> Vector {
    detail::require_dims(x.size(), p * p, "sylvester_operator input");
    const Eigen::Map<const Matrix> d(x.data(), p, p);
    Vector res(p * p);
    Eigen::Map<Matrix> out(res.data(), p, p);
    if (d == d.transpose()) {
      // S2 D S1 = (S1 D S2)^T; the result is exactly symmetric, so symmetric
      // iterates stay symmetric bit for bit.
      out.noalias() = s1 * (d * s2);
      for (Index c = 0; c < p; ++c) {
        for (Index r = c; r < p; ++r) {
          const double v = 0.5 * (out(r, c) + out(c, r));
          out(r, c) = v;
          out(c, r) = v;
        }
      }
    } else {
      out.noalias() = s1 * (d * s2);
      out.noalias() += s2 * (d * s1);
      out *= 0.5;
    }
    return res;
  };
  op.apply_adjoint = op.apply;
  // Entry ((a,b),(c,d)) of the Kronecker form is (S1[a,c] S2[d,b] + S2[a,c] S1[d,b]) / 2,
  // so the weighted column norms collapse into p x p products of Hadamard squares.
  const Matrix p1 = s1.cwiseAbs2();
  const Matrix p2 = s2.cwiseAbs2();
  const Matrix c12 = s1.cwiseProduct(s2);
  op.weighted_gram_diagonal = [p1, p2, c12, p](const Vector& w) -> Vector {
    const Eigen::Map<const Matrix> wm(w.data(), p, p);
    Matrix out = p1 * wm * p2;
    out.noalias() += p2 * wm * p1;
    out.noalias() += 2.0 * (c12 * wm * c12);
    out = 0.125 * (out + out.transpose()).eval();
    return Eigen::Map<const Vector>(out.data(), p * p);
  };
  // Newton systems A^T diag(w) A + diag(s) are preconditioned with the
  // Kronecker surrogate A ~ Sm x Sm, Sm = (S1 + S2)/2, whose error is the
  // second-order term (S1 - S2) x (S1 - S2)/4. With Sm = Q G Q^T and w, s
  // replaced by their means the surrogate is diagonal in the Q x Q basis.
  if (p > 0) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (s1 + s2));
    if (es.info() == Eigen::Success) {
      const Matrix q = es.eigenvectors();
      const Vector g = es.eigenvalues().cwiseMax(0.0);
      const Matrix g2 = (g * g.transpose()).cwiseAbs2();
      op.preconditioner = [q, g2, p](const Vector& w, const Vector& sh) -> ConstraintOperator::Map {
        const Matrix denom = (w.mean() * g2).array() + std::max(sh.mean(), 1e-300);
        return [q, denom, p](const Vector& r) -> Vector {
          const Eigen::Map<const Matrix> rm(r.data(), p, p);
          const Matrix e = (q.transpose() * rm * q).cwiseQuotient(denom);
          const Matrix out = q * e * q.transpose();
          return Eigen::Map<const Vector>(out.data(), p * p);
        };
      };
    }
  }
  // With V^T S1 V = I and V^T S2 V = diag(l), A(D) = V^-T ((V^-1 D V^-T) o H) V^-1
  // where H_ij = (l_i + l_j) / 2, so the inverse costs a few p x p products.
  if (p > 0 && detail::min_eigenvalue(s1) > 0 && detail::min_eigenvalue(s2) > 0) {
    Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> ges(s2, s1);
    if (ges.info() == Eigen::Success && ges.eigenvalues().minCoeff() > 0) {
      const Matrix v = ges.eigenvectors();
      const Vector l = ges.eigenvalues();
      const Matrix h = 0.5 * (l.replicate(1, p) + l.transpose().replicate(p, 1));
      op.solve = [v, h, p](const Vector& y) -> Vector {
        detail::require_dims(y.size(), p * p, "sylvester_operator rhs");
        const Eigen::Map<const Matrix> bm(y.data(), p, p);
        const Matrix e = (v.transpose() * bm * v).cwiseQuotient(h);
        Matrix d = v * e * v.transpose();
        if (bm == bm.transpose()) d = (0.5 * (d + d.transpose())).eval();
        return Eigen::Map<const Vector>(d.data(), p * p);
      };
    }
  }
  return op;
}

/// Max relative deviation of <Ax, y> from <x, A^T y> over random probes.
inline double adjoint_mismatch(const ConstraintOperator& op, int probes = 3, unsigned seed = 7) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  auto draw = [&](Index n) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) v[i] = unif(rng);
    return v;
  };
  double worst = 0.0;
  for (int k = 0; k < probes; ++k) {
    const Vector x = draw(op.dim_in);
    const Vector y = draw(op.dim_out);
    const double lhs = op.apply(x).dot(y);
    const double rhs = x.dot(op.apply_adjoint(y));
    worst = std::max(worst, std::abs(lhs - rhs) / (1.0 + std::abs(lhs) + std::abs(rhs)));
  }
  return worst;
}

namespace detail {

struct CgResult {
  Vector x;
  int iterations = 0;
  double relative_residual = 0.0;
};

// Preconditioned CG for an SPD operator given as a callable.
template <class Apply, class Precondition>
CgResult pcg(const Apply& apply, const Vector& rhs, const Precondition& prec, double tol, int max_iters) {
  CgResult res;
  res.x = Vector::Zero(rhs.size());
  const double bnorm = rhs.norm();
  if (bnorm == 0.0) return res;
  Vector r = rhs;
  Vector z = prec(r);
  Vector d = z;
  double rz = r.dot(z);
  Vector best = res.x;
  double best_rel = 1.0;
  for (int it = 1; it <= max_iters; ++it) {
    const Vector q = apply(d);
    const double dq = d.dot(q);
    if (!(dq > 0) || !std::isfinite(dq)) break;
    const double alpha = rz / dq;
    res.x.noalias() += alpha * d;
    r.noalias() -= alpha * q;
    res.iterations = it;
    const double rel = r.norm() / bnorm;
    if (rel < best_rel) {
      best_rel = rel;
      best = res.x;
    }
    if (rel <= tol) break;
    z = prec(r);
    const double rz_next = r.dot(z);
    d = z + (rz_next / rz) * d;
    rz = rz_next;
  }
  if (best_rel < 1.0) {
    res.x = best;
    res.relative_residual = best_rel;
  } else {
    res.relative_residual = r.norm() / bnorm;
  }
  return res;
}

inline Vector jacobi_inverse(const ConstraintOperator& op, const Vector& weights, const Vector& shift) {
  Vector diag = shift;
  if (op.weighted_gram_diagonal) diag += op.weighted_gram_diagonal(weights);
  const double floor = std::max(1e-300, 1e-14 * diag.cwiseAbs().maxCoeff());
  return diag.unaryExpr([floor](double v) { return 1.0 / std::max(v, floor); });
}

inline ConstraintOperator::Map newton_preconditioner(const ConstraintOperator& op, const Vector& weights,
                                                     const Vector& shift) {
  if (op.preconditioner) return op.preconditioner(weights, shift);
  Vector inv = jacobi_inverse(op, weights, shift);
  return [inv = std::move(inv)](const Vector& r) -> Vector { return inv.cwiseProduct(r); };
}

// A strictly feasible point (||A x - b||_inf < lambda) or Infeasible.
struct StartPoint {
  Vector x;
  Vector ax;
  int cg_iterations = 0;
  bool used_phase1 = false;
};

inline StartPoint feasible_start(const ConstraintOperator& op, const Vector& b, double lambda,
                                 const SolverConfig& cfg) {
  StartPoint sp;
  const Index n = op.dim_in;
  const Index m = op.dim_out;

  if (op.solve) {
    // Solve A x = soft(b, t): the residual is clip(b, t) with t < lambda,
    // so x is strictly feasible and far sparser than A^{-1} b.
    const double t = 0.5 * lambda;
    const Vector target = b.array().sign() * (b.array().abs() - t).max(0.0);
    sp.x = op.solve(target);
    sp.ax = op.apply(sp.x);
    if ((sp.ax - b).cwiseAbs().maxCoeff() < lambda * (1.0 - 1e-3)) return sp;
  }

  // Least squares through the regularized normal equations.
  {
    const Vector ones = Vector::Ones(m);
    Vector gd = op.weighted_gram_diagonal ? op.weighted_gram_diagonal(ones) : Vector::Ones(n);
    const double ridge = 1e-12 * std::max(1.0, gd.maxCoeff());
    const Vector inv = jacobi_inverse(op, ones, Vector::Constant(n, ridge));
    auto normal = [&](const Vector& v) -> Vector {
      Vector out = op.apply_adjoint(op.apply(v));
      out.noalias() += ridge * v;
      return out;
    };
    const auto jacobi = [&](const Vector& r) -> Vector { return inv.cwiseProduct(r); };
    const CgResult ls =
        pcg(normal, op.apply_adjoint(b), jacobi, std::min(cfg.cg_tol, 1e-10), std::max(cfg.cg_max_iters, 200));
    sp.cg_iterations += ls.iterations;
    sp.x = ls.x;
    sp.ax = op.apply(sp.x);
    if ((sp.ax - b).cwiseAbs().maxCoeff() < lambda * (1.0 - 1e-3)) return sp;
  }

  // Phase 1: minimize s subject to |A x - b| <= s with a log barrier.
  sp.used_phase1 = true;
  Vector x = sp.x;
  Vector ax = sp.ax;
  Vector r = ax - b;
  double s = 1.1 * r.cwiseAbs().maxCoeff() + 1e-12 + 1e-3 * lambda;
  const double mc = 2.0 * static_cast<double>(m);
  double t = mc / std::max(s, 1e-12);
  auto barrier = [&](const Vector& rr, double ss, double tt) {
    return tt * ss - ((ss - rr.array()).log().sum() + (ss + rr.array()).log().sum());
  };
  for (int outer = 0; outer < cfg.max_outer_iters; ++outer) {
    for (int newton = 0; newton < 50; ++newton) {
      const Eigen::ArrayXd g1 = 1.0 / (s - r.array());
      const Eigen::ArrayXd g2 = 1.0 / (s + r.array());
      const Vector w = (g1.square() + g2.square()).matrix();
      const Vector c = (g2.square() - g1.square()).matrix();
      const double h = w.sum();
      const Vector gx = op.apply_adjoint((g1 - g2).matrix());
      const double gs = t - (g1 + g2).sum();
      const Vector atc = op.apply_adjoint(c);
      const double ridge = 1e-12 * std::max(1.0, w.maxCoeff());
      const Vector inv = jacobi_inverse(op, w, Vector::Constant(n, ridge));
      auto hess = [&](const Vector& v) -> Vector {
        const Vector av = op.apply(v);
        Vector wv = w.cwiseProduct(av) - c * (c.dot(av) / h);
        Vector out = op.apply_adjoint(wv);
        out.noalias() += ridge * v;
        return out;
      };
      const Vector rhs = -gx + atc * (gs / h);
      const CgResult cg = pcg(hess, rhs, [&](const Vector& v) -> Vector { return inv.cwiseProduct(v); },
                              std::max(cfg.cg_tol, 1e-10), cfg.cg_max_iters);
      sp.cg_iterations += cg.iterations;
      const Vector dx = cg.x;
      const Vector adx = op.apply(dx);
      const double ds = (-gs - c.dot(adx)) / h;
      const double decrement = -(gx.dot(dx) + gs * ds);
      if (!(decrement > 0) || decrement < 1e-12) break;

      double step = 1.0;
      const double f0 = barrier(r, s, t);
      int tries = 0;
      for (; tries < 60; ++tries) {
        const Vector rn = r + step * adx;
        const double sn = s + step * ds;
        if ((sn - rn.array().abs()).minCoeff() > 0) {
          const double fn = barrier(rn, sn, t);
          if (std::isfinite(fn) && fn <= f0 - 0.01 * step * decrement) break;
        }
        step *= 0.5;
      }
      if (tries == 60) break;
      x.noalias() += step * dx;
      ax.noalias() += step * adx;
      r = ax - b;
      s += step * ds;
      const double viol = r.cwiseAbs().maxCoeff();
      if (viol < lambda * (1.0 - 1e-3)) {
        sp.x = x;
        sp.ax = ax;
        return sp;
      }
      if (decrement < 1e-8) break;
    }
    const double viol = r.cwiseAbs().maxCoeff();
    const double gap = mc / t;
    if (viol < lambda && gap < 1e-3 * std::max(lambda, 1e-12)) {
      sp.x = x;
      sp.ax = ax;
      return sp;
    }
    if (s - gap > lambda) {
      std::ostringstream os;
      os << "min ||Ax-b||_inf >= " << (s - gap) << " exceeds lambda = " << lambda;
      throw Error(ErrorKind::Infeasible, os.str());
    }
    if (gap < 1e-14 * std::max(1.0, s)) break;
    t *= 10.0;
  }
  if (r.cwiseAbs().maxCoeff() < lambda) {
    sp.x = x;
    sp.ax = ax;
    return sp;
  }
  throw Error(ErrorKind::Infeasible, "phase 1 found no strictly feasible point");
}

}  // namespace detail

/// Solve min ||x||_1 s.t. ||A x - b||_inf <= cfg.lambda.
///
/// Deterministic in its inputs. Returns the last iterate with
/// `converged == false` when the iteration limit is hit or CG stalls;
/// throws Error(Infeasible) when no feasible point exists. A zero radius
/// is treated as radius `duality_gap_tol`, which stays inside the
/// reported feasibility certificate.
inline SolveReport solve_l1_dantzig(const ConstraintOperator& op, const Vector& b, const SolverConfig& cfg) {
  cfg.check();
  detail::require(op.apply && op.apply_adjoint, ErrorKind::InvalidArgument, "operator is incomplete");
  detail::require_dims(b.size(), op.dim_out, "b");
  detail::require(b.allFinite(), ErrorKind::InvalidArgument, "b has non-finite entries");

  const Index n = op.dim_in;
  const Index m = op.dim_out;
  SolveReport rep;

  const double bmax = m > 0 ? b.cwiseAbs().maxCoeff() : 0.0;
  if (bmax <= cfg.lambda) {
    rep.solution = Vector::Zero(n);
    rep.objective = 0.0;
    rep.max_constraint_violation = bmax;
    rep.converged = true;
    return rep;
  }

  const double lambda = std::max(cfg.lambda, cfg.duality_gap_tol);
  detail::StartPoint start = detail::feasible_start(op, b, lambda, cfg);
  rep.used_phase1 = start.used_phase1;
  rep.cg_iterations = start.cg_iterations;

  Vector x = start.x;
  Vector ax = start.ax;
  const double xmax = x.cwiseAbs().maxCoeff();
  Vector u = 0.95 * x.cwiseAbs() + Vector::Constant(n, 0.10 * (xmax > 0 ? xmax : 1.0));

  using Arr = Eigen::ArrayXd;
  Arr fu1 = (x - u).array();
  Arr fu2 = (-x - u).array();
  Arr fe1 = (ax - b).array() - lambda;
  Arr fe2 = -(ax - b).array() - lambda;
  Arr lu1 = -1.0 / fu1;
  Arr lu2 = -1.0 / fu2;
  Arr le1 = -1.0 / fe1;
  Arr le2 = -1.0 / fe2;
  Vector atv = op.apply_adjoint((le1 - le2).matrix());

  const double mu = 10.0;
  const double ncons = 2.0 * static_cast<double>(n + m);
  auto gap_of = [&]() {
    return -((fu1 * lu1).sum() + (fu2 * lu2).sum() + (fe1 * le1).sum() + (fe2 * le2).sum());
  };
  double sdg = gap_of();
  double tau = mu * ncons / sdg;

  auto residual_norm = [&](const Arr& f_u1, const Arr& f_u2, const Arr& f_e1, const Arr& f_e2,
                           const Arr& l_u1, const Arr& l_u2, const Arr& l_e1, const Arr& l_e2,
                           const Vector& at_v, double tau_) {
    const double inv_tau = 1.0 / tau_;
    double acc = ((l_u1 - l_u2).matrix() + at_v).squaredNorm();
    acc += (1.0 - l_u1 - l_u2).square().sum();
    acc += (-l_u1 * f_u1 - inv_tau).square().sum();
    acc += (-l_u2 * f_u2 - inv_tau).square().sum();
    acc += (-l_e1 * f_e1 - inv_tau).square().sum();
    acc += (-l_e2 * f_e2 - inv_tau).square().sum();
    return std::sqrt(acc);
  };
  double resnorm = residual_norm(fu1, fu2, fe1, fe2, lu1, lu2, le1, le2, atv, tau);

  rep.status = SolveStatus::MaxIterations;
  bool stalled = false;
  int iter = 0;
  while (sdg > cfg.duality_gap_tol && iter < cfg.max_outer_iters) {
    ++iter;
    const double inv_tau = 1.0 / tau;
    const Arr a1 = -lu1 / fu1;
    const Arr a2 = -lu2 / fu2;
    const Arr sig11 = a1 + a2;
    const Arr sig12 = a2 - a1;
    const Arr sigx = sig11 - sig12.square() / sig11;
    const Vector siga = (-le1 / fe1 - le2 / fe2).matrix();

    const Vector w1 = (inv_tau * (1.0 / fu1 - 1.0 / fu2)).matrix() +
                      inv_tau * op.apply_adjoint((1.0 / fe1 - 1.0 / fe2).matrix());
    const Arr w2 = -1.0 - inv_tau * (1.0 / fu1 + 1.0 / fu2);
    const Vector rhs = w1 - (sig12 / sig11 * w2).matrix();

    const auto inv = detail::newton_preconditioner(op, siga, sigx.matrix());
    auto newton = [&](const Vector& v) -> Vector {
      Vector out = op.apply_adjoint(siga.cwiseProduct(op.apply(v)));
      out.array() += sigx * v.array();
      return out;
    };
    const detail::CgResult cg = detail::pcg(newton, rhs, inv, cfg.cg_tol, cfg.cg_max_iters);
    rep.cg_iterations += cg.iterations;
    if (!cg.x.allFinite() || cg.iterations == 0) {
      rep.status = SolveStatus::CgStagnation;
      break;
    }
    // An inexact direction is still used; the residual line search decides.
    if (cg.relative_residual > cfg.cg_tol) stalled = true;
    const Arr dx = cg.x.array();
    const Arr du = (w2 - sig12 * dx) / sig11;
    const Vector adx_v = op.apply(cg.x);
    const Arr adx = adx_v.array();

    const Arr dlu1 = a1 * (dx - du) - lu1 - inv_tau / fu1;
    const Arr dlu2 = a2 * (-dx - du) - lu2 - inv_tau / fu2;
    const Arr dle1 = (-le1 / fe1) * adx - le1 - inv_tau / fe1;
    const Arr dle2 = -(-le2 / fe2) * adx - le2 - inv_tau / fe2;
    const Vector atdv = op.apply_adjoint((dle1 - dle2).matrix());

    // Largest step keeping duals nonnegative and constraints strictly satisfied.
    double smax = 1.0;
    auto limit_dual = [&](const Arr& l, const Arr& dl) {
      for (Index i = 0; i < l.size(); ++i) {
        if (dl[i] < 0) smax = std::min(smax, -l[i] / dl[i]);
      }
    };
    auto limit_primal = [&](const Arr& f, const Arr& df) {
      for (Index i = 0; i < f.size(); ++i) {
        if (df[i] > 0) smax = std::min(smax, -f[i] / df[i]);
      }
    };
    limit_dual(lu1, dlu1);
    limit_dual(lu2, dlu2);
    limit_dual(le1, dle1);
    limit_dual(le2, dle2);
    limit_primal(fu1, dx - du);
    limit_primal(fu2, -dx - du);
    limit_primal(fe1, adx);
    limit_primal(fe2, -adx);
    double step = 0.99 * smax;

    Arr nfu1, nfu2, nfe1, nfe2, nlu1, nlu2, nle1, nle2;
    Vector natv;
    double nres = 0.0;
    bool accepted = false;
    double feasible_step = 0.0;
    auto trial = [&](double st) {
      nfu1 = fu1 + st * (dx - du);
      nfu2 = fu2 + st * (-dx - du);
      nfe1 = fe1 + st * adx;
      nfe2 = fe2 - st * adx;
      if (!(nfu1.maxCoeff() < 0 && nfu2.maxCoeff() < 0 && nfe1.maxCoeff() < 0 && nfe2.maxCoeff() < 0)) {
        return false;
      }
      nlu1 = lu1 + st * dlu1;
      nlu2 = lu2 + st * dlu2;
      nle1 = le1 + st * dle1;
      nle2 = le2 + st * dle2;
      natv = atv + st * atdv;
      nres = residual_norm(nfu1, nfu2, nfe1, nfe2, nlu1, nlu2, nle1, nle2, natv, tau);
      return true;
    };
    for (int bt = 0; bt < 32; ++bt) {
      if (trial(step)) {
        if (feasible_step == 0.0) feasible_step = step;
        if (nres <= (1.0 - 0.01 * step) * resnorm) {
          accepted = true;
          break;
        }
      }
      step *= 0.5;
    }
    if (!accepted && feasible_step > 0.0) {
      // Inexact directions need not reduce the residual; the largest
      // strictly feasible step keeps the iterate usable.
      step = feasible_step;
      accepted = trial(step);
    }
    if (!accepted) {
      rep.status = SolveStatus::CgStagnation;
      break;
    }

    x.array() += step * dx;
    u.array() += step * du;
    ax.noalias() += step * adx_v;
    fu1 = nfu1;
    fu2 = nfu2;
    fe1 = nfe1;
    fe2 = nfe2;
    lu1 = nlu1;
    lu2 = nlu2;
    le1 = nle1;
    le2 = nle2;
    atv = natv;

    sdg = gap_of();
    tau = mu * ncons / sdg;
    resnorm = residual_norm(fu1, fu2, fe1, fe2, lu1, lu2, le1, le2, atv, tau);
  }
  if (sdg <= cfg.duality_gap_tol) {
    rep.status = SolveStatus::Converged;
  } else if (stalled) {
    rep.status = SolveStatus::CgStagnation;
  }

  rep.solution = x;
  rep.objective = x.lpNorm<1>();
  rep.max_constraint_violation = (op.apply(x) - b).cwiseAbs().maxCoeff();
  rep.iterations = iter;
  rep.duality_gap = sdg;
  rep.converged = rep.status == SolveStatus::Converged &&
                  rep.max_constraint_violation <= cfg.lambda + 10.0 * cfg.duality_gap_tol;
  return rep;
}

}  // namespace sqda
