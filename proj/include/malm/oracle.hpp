#pragma once

#include <cmath>
#include <functional>

#include "malm/error.hpp"
#include "malm/linalg.hpp"
#include "malm/outer.hpp"
#include "malm/problem.hpp"

// Ground-truth computations that do not go through the iterative solvers.
namespace malm::oracle {

/// Solves (Q + A'A/omega_e) x = A'b/omega_e - q by dense Cholesky.
inline Vector qp_upnp_closed_form(const QpData& d, double omega_e) {
  validate_shapes(d);
  if (!(omega_e > 0.0)) fail(ErrorCode::InvalidArgument, "omega_e must be > 0");
  const Matrix h = d.Q + (d.A.transpose() * d.A) / omega_e;
  const Vector rhs = (d.A.transpose() * d.b) / omega_e - d.q;
  Eigen::LLT<Matrix> llt(h);
  if (llt.info() != Eigen::Success) {
    fail(ErrorCode::NotPositiveDefinite, "Q + A'A/omega_e is not positive definite");
  }
  return llt.solve(rhs);
}

struct BiObjectiveSolution {
  Vector x_star;
  double residual_norm = 0.0;  // ||A x* - b||_2, the least-squares residual
  double f_star = 0.0;
};

/// Limit of the penalty solutions as omega_e -> 0 for a convex QP: the
/// minimizer of f over the set of least-squares solutions of Ax = b.
///
/// Parametrizes that set as x_ls + N z with x_ls the minimum-norm solution and
/// N an orthonormal basis of null(A), then solves (N'QN) z = -N'(Q x_ls + q).
/// Throws MultipleMinimizers when N'QN is singular (f is flat along some
/// direction of the solution set).
inline BiObjectiveSolution qp_bi_objective_limit(const QpData& d) {
  validate_shapes(d);
  const Vector x_ls = linalg::lstsq_min_norm(d.A, d.b);
  const Matrix basis = linalg::null_space_basis(d.A);

  Vector x = x_ls;
  if (basis.cols() > 0) {
    const Matrix reduced = basis.transpose() * d.Q * basis;
    const Vector rhs = -(basis.transpose() * (d.Q * x_ls + d.q));
    const Vector ev = linalg::symmetric_eigenvalues(0.5 * (reduced + reduced.transpose()));
    const double scale = std::max(1.0, d.Q.cwiseAbs().maxCoeff());
    if (!(ev(0) > linalg::kRankTolerance * scale)) {
      fail(ErrorCode::MultipleMinimizers, "f is not strictly convex on null(A)");
    }
    x += basis * Eigen::LLT<Matrix>(reduced).solve(rhs);
  }

  BiObjectiveSolution out;
  out.residual_norm = (d.A * x - d.b).norm();
  out.f_star = 0.5 * x.dot(d.Q * x) + d.q.dot(x);
  out.x_star = std::move(x);
  return out;
}

/// Central differences (fcn(x + h e_i) - fcn(x - h e_i)) / (2h).
inline Vector finite_diff_grad(const std::function<double(const Vector&)>& fcn, const Vector& x,
                               double h = 1e-6) {
  if (!(h > 0.0)) fail(ErrorCode::InvalidArgument, "step must be > 0");
  Vector g(x.size());
  Vector xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double xi = x(i);
    xp(i) = xi + h;
    const double fp = fcn(xp);
    xp(i) = xi - h;
    const double fm = fcn(xp);
    xp(i) = xi;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      fail(ErrorCode::NonFiniteEvaluation, "function is not finite near x");
    }
    g(i) = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// Central-difference Jacobian of a vector function (rows = outputs).
inline Matrix finite_diff_jacobian(const std::function<Vector(const Vector&)>& fcn, const Vector& x,
                                   double h = 1e-6) {
  if (!(h > 0.0)) fail(ErrorCode::InvalidArgument, "step must be > 0");
  Matrix j;
  Vector xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double xi = x(i);
    xp(i) = xi + h;
    const Vector fp = fcn(xp);
    xp(i) = xi - h;
    const Vector fm = fcn(xp);
    xp(i) = xi;
    if (!fp.allFinite() || !fm.allFinite()) {
      fail(ErrorCode::NonFiniteEvaluation, "function is not finite near x");
    }
    if (i == 0) j.resize(fp.size(), x.size());
    j.col(i) = (fp - fm) / (2.0 * h);
  }
  return j;
}

/// ||g1 - g2||_inf with g1 a candidate subproblem gradient at x and
/// g2 = grad_x L(x, lambda_prev + lt), lt = eliminate_lambda_tilde(c(x), ...).
inline double gradient_identity_gap(const std::function<Vector(const Vector&)>& subproblem_grad,
                                    const NlpProblem& p, const Vector& x, const Vector& lambda_prev,
                                    const PenaltyConfig& cfg) {
  const Vector lt = eliminate_lambda_tilde(eval_c(p, x), lambda_prev, cfg);
  const Vector g2 = eval_grad_lagrangian(p, x, lambda_prev + lt);
  const Vector g1 = subproblem_grad(x);
  if (g1.size() != g2.size()) fail(ErrorCode::ShapeMismatch, "gradient lengths differ");
  return linalg::inf_norm(g1 - g2);
}

/// Gap between build_subproblem's gradient and grad_x L(x, lambda_prev + lt).
inline double check_gradient_identity(const NlpProblem& p, const Vector& x, const Vector& lambda_prev,
                                      const PenaltyConfig& cfg) {
  const Subproblem sp = build_subproblem(p, lambda_prev, cfg);
  return gradient_identity_gap(sp.grad, p, x, lambda_prev, cfg);
}

}  // namespace malm::oracle
