#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string_view>
#include <vector>

#include "malm/error.hpp"
#include "malm/linalg.hpp"
#include "malm/problem.hpp"

namespace malm::inner {

struct InnerOptions {
  double grad_tol = 1e-9;  // on the infinity norm of the gradient (or residual)
  int max_iters = 200;
  double armijo_c = 1e-4;
  double backtrack_factor = 0.5;
  double damping_seed = 1e-4;
};

inline constexpr int kMaxBacktracks = 60;

/// A step whose predicted decrease |g's| is below this multiple of
/// eps * max(1, |f|) cannot be judged by comparing objective values.
inline constexpr double kResolutionFactor = 100.0;

inline void validate(const InnerOptions& o) {
  if (!(o.grad_tol > 0.0)) fail(ErrorCode::InvalidArgument, "grad_tol must be > 0");
  if (o.max_iters <= 0) fail(ErrorCode::InvalidArgument, "max_iters must be positive");
  if (!(o.armijo_c > 0.0 && o.armijo_c < 1.0)) fail(ErrorCode::InvalidArgument, "armijo_c must lie in (0,1)");
  if (!(o.backtrack_factor > 0.0 && o.backtrack_factor < 1.0)) {
    fail(ErrorCode::InvalidArgument, "backtrack_factor must lie in (0,1)");
  }
  if (!(o.damping_seed >= 0.0)) fail(ErrorCode::InvalidArgument, "damping_seed must be >= 0");
}

enum class InnerStatus { Converged, MaxIters, LineSearchFailed };

inline std::string_view to_string(InnerStatus s) {
  switch (s) {
    case InnerStatus::Converged: return "Converged";
    case InnerStatus::MaxIters: return "MaxIters";
    case InnerStatus::LineSearchFailed: return "LineSearchFailed";
  }
  return "Unknown";
}

struct InnerResult {
  Vector x;
  double grad_norm = 0.0;
  int iters = 0;
  InnerStatus status = InnerStatus::MaxIters;
  /// Scaled condition of the Hessian (exact or secant) at the returned x,
  /// absent when that matrix is not positive definite.
  std::optional<double> hessian_condition;
  /// Objective at x0 and at every accepted iterate.
  std::vector<double> f_history;
};

using ScalarFn = std::function<double(const Vector&)>;
using GradFn = std::function<Vector(const Vector&)>;
using HessFn = std::function<Matrix(const Vector&)>;

namespace detail {

inline std::optional<double> try_condition(const Matrix& h) {
  try {
    return linalg::scaled_condition(h);
  } catch (const Error&) {
    return std::nullopt;
  }
}

/// Symmetric rank-one update of B with step s and gradient change y; skipped
/// when the denominator is too small relative to ||s|| ||y - Bs||.
inline void sr1_update(Matrix& b, const Vector& s, const Vector& y) {
  const Vector r = y - b * s;
  const double denom = r.dot(s);
  if (std::abs(denom) < 1e-8 * s.norm() * r.norm() || denom == 0.0) return;
  b += (r * r.transpose()) / denom;
}

}  // namespace detail

/// Damped-Newton line-search minimizer.
///
/// Each step solves (H + tau I) s = -g with the smallest admissible damping
/// and backtracks on fcn until the Armijo condition holds with a strict
/// decrease. When the predicted decrease is below the resolution of f (see
/// kResolutionFactor) the full step is taken instead if it reduces the
/// gradient norm. Without `hess` a symmetric rank-one secant matrix seeded
/// with the identity stands in for the Hessian.
inline InnerResult minimize(const ScalarFn& fcn, const GradFn& grad, const HessFn& hess,
                            const Vector& x0, const InnerOptions& opts = {}) {
  validate(opts);
  linalg::require_finite(x0, "x0");

  InnerResult out;
  Vector x = x0;
  double f = fcn(x);
  Vector g = grad(x);
  if (!std::isfinite(f) || !g.allFinite()) fail(ErrorCode::NonFiniteEvaluation, "objective at x0");
  Matrix secant;
  if (!hess) secant = Matrix::Identity(x.size(), x.size());
  out.f_history.push_back(f);

  int iters = 0;
  InnerStatus status = InnerStatus::MaxIters;
  for (;;) {
    if (linalg::inf_norm(g) <= opts.grad_tol) {
      status = InnerStatus::Converged;
      break;
    }
    if (iters >= opts.max_iters) {
      status = InnerStatus::MaxIters;
      break;
    }

    const Matrix h = hess ? hess(x) : secant;
    const Vector s = linalg::solve_spd_damped(h, g, opts.damping_seed).step;
    const double slope = g.dot(s);

    double t = 1.0;
    bool accepted = false;
    Vector xt;
    double ft = 0.0;
    for (int bt = 0; bt <= kMaxBacktracks; ++bt) {
      xt = x + t * s;
      ft = fcn(xt);
      if (std::isfinite(ft) && ft < f && ft <= f + opts.armijo_c * t * slope) {
        accepted = true;
        break;
      }
      t *= opts.backtrack_factor;
    }
    Vector gt;
    if (!accepted) {
      const double resolution =
          kResolutionFactor * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(f));
      if (-slope <= resolution) {
        xt = x + s;
        ft = fcn(xt);
        gt = grad(xt);
        accepted = std::isfinite(ft) && gt.allFinite() && linalg::inf_norm(gt) < linalg::inf_norm(g);
      }
      if (!accepted) {
        status = InnerStatus::LineSearchFailed;
        break;
      }
    } else {
      gt = grad(xt);
    }
    if (!gt.allFinite()) fail(ErrorCode::NonFiniteEvaluation, "gradient at accepted point");
    if (!hess) detail::sr1_update(secant, xt - x, gt - g);
    x = std::move(xt);
    f = ft;
    g = std::move(gt);
    out.f_history.push_back(f);
    ++iters;
  }

  out.hessian_condition = detail::try_condition(hess ? hess(x) : secant);
  out.x = std::move(x);
  out.grad_norm = linalg::inf_norm(g);
  out.iters = iters;
  out.status = status;
  return out;
}

/// Residual of the original MALM optimality system
///   F(x, lt) = [ grad_x L(x, lambda_prev + lt) ;
///                c(x) + omega_e lambda_prev + (omega + omega_e) lt ].
inline Vector eval_fk(const NlpProblem& p, const Vector& lambda_prev, const PenaltyConfig& cfg,
                      const Vector& x, const Vector& lambda_tilde) {
  Vector out(p.n + p.m);
  out.head(p.n) = eval_grad_lagrangian(p, x, lambda_prev + lambda_tilde);
  out.tail(p.m) = eval_c(p, x) + cfg.omega_e * lambda_prev + cfg.divisor() * lambda_tilde;
  return out;
}

/// Central differences of grad_x L(., lambda), symmetrized.
inline Matrix fd_hess_lagrangian(const NlpProblem& p, const Vector& x, const Vector& lambda,
                                 double h = 1e-6) {
  Matrix out(p.n, p.n);
  Vector xp = x;
  for (Eigen::Index i = 0; i < p.n; ++i) {
    const double xi = x(i);
    xp(i) = xi + h;
    const Vector gp = eval_grad_lagrangian(p, xp, lambda);
    xp(i) = xi - h;
    const Vector gm = eval_grad_lagrangian(p, xp, lambda);
    xp(i) = xi;
    out.col(i) = (gp - gm) / (2.0 * h);
  }
  return 0.5 * (out + out.transpose());
}

struct RootResult {
  Vector x;
  Vector lambda_tilde;
  InnerStatus status = InnerStatus::MaxIters;
  int iters = 0;
  double residual_norm = 0.0;  // ||F||_inf at the returned pair
  /// Merit value at the start and at every accepted iterate.
  std::vector<double> merit_history;
};

/// Merit for the root-finder:
///   phi(x, lt) = f_k(x) + ||F_2(x, lt)||^2 / (2 (omega + omega_e)),
/// with f_k the subproblem objective and F_2 the second block of F. Its
/// stationary points are exactly the roots of F, and every step from the
/// shifted Newton system with positive definite reduced matrix is a descent
/// direction for it.
inline double root_merit(const NlpProblem& p, const Vector& lambda_prev, const PenaltyConfig& cfg,
                         const Vector& x, const Vector& F) {
  const double sigma = cfg.divisor();
  const Vector shifted = eval_c(p, x) + cfg.omega_e * lambda_prev;
  const auto f2 = F.tail(p.m);
  return eval_lagrangian(p, x, lambda_prev) + shifted.squaredNorm() / (2.0 * sigma) +
         f2.squaredNorm() / (2.0 * sigma);
}

/// Damped Newton root-finder for F (see eval_fk).
///
/// The Jacobian [[H, -J'], [J, (omega + omega_e) I]] is assembled explicitly.
/// The H block is shifted by tau I until the reduced matrix
/// H + tau I + J'J / (omega + omega_e) is positive definite and the step is a
/// descent direction for root_merit; the shifted system is then solved by
/// dense LU and the step length chosen by Armijo backtracking on the merit,
/// with the same resolution fallback as minimize (judged on ||F||).
/// Throws SingularSystem when no admissible shift exists.
inline RootResult solve_root_fk(const NlpProblem& p, const Vector& lambda_prev,
                                const PenaltyConfig& cfg, const Vector& x0, const Vector& lt0,
                                const InnerOptions& opts = {}) {
  validate(opts);
  validate(cfg);
  if (!(cfg.divisor() > 0.0)) fail(ErrorCode::InvalidArgument, "omega + omega_e must be > 0");
  malm::detail::check_len(lambda_prev, p.m, "lambda_prev");
  malm::detail::check_len(x0, p.n, "x0");
  malm::detail::check_len(lt0, p.m, "lambda_tilde0");
  linalg::require_finite(x0, "x0");
  linalg::require_finite(lt0, "lambda_tilde0");

  const auto n = p.n;
  const auto m = p.m;
  const double sigma = cfg.divisor();

  Vector x = x0;
  Vector lt = lt0;
  Vector F = eval_fk(p, lambda_prev, cfg, x, lt);
  double merit = root_merit(p, lambda_prev, cfg, x, F);

  RootResult out;
  out.merit_history.push_back(merit);
  int iters = 0;
  InnerStatus status = InnerStatus::MaxIters;
  for (;;) {
    if (linalg::inf_norm(F) <= opts.grad_tol) {
      status = InnerStatus::Converged;
      break;
    }
    if (iters >= opts.max_iters) break;

    const Vector lambda = lambda_prev + lt;
    const Matrix h = p.has_hessian() ? eval_hess_lagrangian(p, x, lambda)
                                     : fd_hess_lagrangian(p, x, lambda);
    const Matrix jac = eval_jac_c(p, x);

    Matrix kkt = Matrix::Zero(n + m, n + m);
    kkt.topLeftCorner(n, n) = h;
    kkt.topRightCorner(n, m) = -jac.transpose();
    kkt.bottomLeftCorner(m, n) = jac;
    kkt.bottomRightCorner(m, m).diagonal().setConstant(sigma);

    Vector merit_grad(n + m);
    merit_grad.head(n) = F.head(n) + 2.0 * (jac.transpose() * F.tail(m)) / sigma;
    merit_grad.tail(m) = F.tail(m);

    const Matrix reduced = h + (jac.transpose() * jac) / sigma;
    Vector d;
    double slope = 0.0;
    double tau = 0.0;
    bool found = false;
    Eigen::LLT<Matrix> llt;
    while (tau <= linalg::kMaxDamping) {
      if (linalg::try_damped_cholesky(reduced, tau, llt)) {
        Matrix shifted = kkt;
        shifted.topLeftCorner(n, n).diagonal().array() += tau;
        d = shifted.partialPivLu().solve(-F);
        slope = merit_grad.dot(d);
        if (d.allFinite() && slope < 0.0) {
          found = true;
          break;
        }
      }
      if (tau == 0.0) {
        tau = opts.damping_seed > 0.0 ? opts.damping_seed : linalg::kFallbackDampingSeed;
      } else {
        tau *= 10.0;
      }
    }
    if (!found) fail(ErrorCode::SingularSystem, "no damping makes the Newton step a descent direction");

    double t = 1.0;
    bool accepted = false;
    Vector xt, ltt, Ft;
    double mt = 0.0;
    for (int bt = 0; bt <= kMaxBacktracks; ++bt) {
      xt = x + t * d.head(n);
      ltt = lt + t * d.tail(m);
      Ft = eval_fk(p, lambda_prev, cfg, xt, ltt);
      mt = root_merit(p, lambda_prev, cfg, xt, Ft);
      if (std::isfinite(mt) && mt < merit && mt <= merit + opts.armijo_c * t * slope) {
        accepted = true;
        break;
      }
      t *= opts.backtrack_factor;
    }
    if (!accepted) {
      const double resolution =
          kResolutionFactor * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(merit));
      if (-slope <= resolution) {
        xt = x + d.head(n);
        ltt = lt + d.tail(m);
        Ft = eval_fk(p, lambda_prev, cfg, xt, ltt);
        mt = root_merit(p, lambda_prev, cfg, xt, Ft);
        accepted = std::isfinite(mt) && linalg::inf_norm(Ft) < linalg::inf_norm(F);
      }
      if (!accepted) {
        status = InnerStatus::LineSearchFailed;
        break;
      }
    }
    x = std::move(xt);
    lt = std::move(ltt);
    F = std::move(Ft);
    merit = mt;
    out.merit_history.push_back(merit);
    ++iters;
  }

  out.x = std::move(x);
  out.lambda_tilde = std::move(lt);
  out.status = status;
  out.iters = iters;
  out.residual_norm = linalg::inf_norm(F);
  return out;
}

}  // namespace malm::inner
