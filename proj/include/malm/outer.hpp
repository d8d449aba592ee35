#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "malm/error.hpp"
#include "malm/inner.hpp"
#include "malm/linalg.hpp"
#include "malm/problem.hpp"

namespace malm {

enum class Method { ALM, MALM_Sub, MALM_Root, PenaltyDirect };
enum class OuterStatus { Converged, MaxOuter, InnerFailure };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::ALM: return "ALM";
    case Method::MALM_Sub: return "MALM_Sub";
    case Method::MALM_Root: return "MALM_Root";
    case Method::PenaltyDirect: return "PenaltyDirect";
  }
  return "Unknown";
}

inline std::string_view to_string(OuterStatus s) {
  switch (s) {
    case OuterStatus::Converged: return "Converged";
    case OuterStatus::MaxOuter: return "MaxOuter";
    case OuterStatus::InnerFailure: return "InnerFailure";
  }
  return "Unknown";
}

struct OuterOptions {
  PenaltyConfig cfg;
  int max_outer = 50;
  double outer_tol = 1e-8;
  inner::InnerOptions inner;
  bool warm_start = true;  // start each inner solve from x_{k-1}
  /// Inner tolerance for outer iteration k is inner.grad_tol * factor^(k-1).
  /// 1 keeps it constant.
  double inner_tol_factor = 1.0;
};

struct IterateRecord {
  int k = 0;
  Vector x;
  Vector lambda;
  double f_val = 0.0;
  double c_norm = 0.0;          // ||c(x_k)||_2
  double shifted_c_norm = 0.0;  // ||c(x_k) + omega_e lambda_{k-1}||_2
  int inner_iters = 0;
  std::optional<double> subproblem_condition;
  double terminal_residual = 0.0;
};

struct SolveTrace {
  Method method = Method::MALM_Sub;
  PenaltyConfig cfg;
  std::vector<IterateRecord> records;
  OuterStatus status = OuterStatus::MaxOuter;
  Vector x_final;
  Vector lambda_final;
  std::vector<std::string> warnings;

  int outer_iters() const { return static_cast<int>(records.size()); }

  int total_inner_iters() const {
    int total = 0;
    for (const auto& r : records) total += r.inner_iters;
    return total;
  }

  std::optional<double> max_condition() const {
    std::optional<double> best;
    for (const auto& r : records) {
      if (r.subproblem_condition && (!best || *r.subproblem_condition > *best)) {
        best = r.subproblem_condition;
      }
    }
    return best;
  }

  double final_residual() const { return records.empty() ? 0.0 : records.back().terminal_residual; }
};

/// lt = -(c + omega_e lambda_prev) / (omega + omega_e): the dual increment
/// obtained by solving the second block row of the original MALM system.
inline Vector eliminate_lambda_tilde(const Vector& c_val, const Vector& lambda_prev,
                                     const PenaltyConfig& cfg) {
  if (c_val.size() != lambda_prev.size()) fail(ErrorCode::ShapeMismatch, "c and lambda_prev lengths differ");
  if (!(cfg.divisor() > 0.0)) fail(ErrorCode::InvalidArgument, "omega + omega_e must be > 0");
  const Vector shifted = c_val + cfg.omega_e * lambda_prev;
  return -(shifted / cfg.divisor());
}

/// lambda_k = lambda_{k-1} - (c + omega_e lambda_{k-1}) / (omega + omega_e).
inline Vector dual_update(const Vector& lambda_prev, const Vector& c_val, const PenaltyConfig& cfg) {
  return lambda_prev + eliminate_lambda_tilde(c_val, lambda_prev, cfg);
}

/// Objective, gradient and (optional) Hessian of an unconstrained subproblem.
/// Holds a reference to the problem, which must outlive it.
struct Subproblem {
  inner::ScalarFn fcn;
  inner::GradFn grad;
  inner::HessFn hess;
};

/// MALM subproblem
///   f_k(x) = L(x, lambda_prev) + ||c(x) + omega_e lambda_prev||^2 / (2 (omega + omega_e)).
/// Its Hessian is assembled as H_L(x, lambda_prev + lt(x)) + J'J / (omega + omega_e).
inline Subproblem build_subproblem(const NlpProblem& p, const Vector& lambda_prev,
                                   const PenaltyConfig& cfg) {
  validate(cfg);
  detail::check_len(lambda_prev, p.m, "lambda_prev");
  const double sigma = cfg.divisor();
  const double omega_e = cfg.omega_e;

  Subproblem sp;
  sp.fcn = [&p, lambda_prev, sigma, omega_e](const Vector& x) {
    const Vector shifted = eval_c(p, x) + omega_e * lambda_prev;
    return eval_lagrangian(p, x, lambda_prev) + shifted.squaredNorm() / (2.0 * sigma);
  };
  sp.grad = [&p, lambda_prev, sigma, omega_e](const Vector& x) -> Vector {
    const Vector shifted = eval_c(p, x) + omega_e * lambda_prev;
    return eval_grad_lagrangian(p, x, lambda_prev) + eval_jac_c(p, x).transpose() * (shifted / sigma);
  };
  if (p.has_hessian()) {
    sp.hess = [&p, lambda_prev, sigma, omega_e](const Vector& x) -> Matrix {
      const Vector shifted = eval_c(p, x) + omega_e * lambda_prev;
      const Matrix jac = eval_jac_c(p, x);
      const Vector multiplier = lambda_prev - shifted / sigma;
      return eval_hess_lagrangian(p, x, multiplier) + (jac.transpose() * jac) / sigma;
    };
  }
  return sp;
}

/// ALM subproblem f_k(x) = L(x, lambda_prev) + ||c(x)||^2 / (2 omega).
inline Subproblem alm_subproblem(const NlpProblem& p, const Vector& lambda_prev, double omega) {
  detail::check_len(lambda_prev, p.m, "lambda_prev");
  Subproblem sp;
  sp.fcn = [&p, lambda_prev, omega](const Vector& x) {
    const Vector c = eval_c(p, x);
    return eval_lagrangian(p, x, lambda_prev) + c.squaredNorm() / (2.0 * omega);
  };
  sp.grad = [&p, lambda_prev, omega](const Vector& x) -> Vector {
    const Vector c = eval_c(p, x);
    return eval_grad_lagrangian(p, x, lambda_prev) + eval_jac_c(p, x).transpose() * (c / omega);
  };
  if (p.has_hessian()) {
    sp.hess = [&p, lambda_prev, omega](const Vector& x) -> Matrix {
      const Vector c = eval_c(p, x);
      const Matrix jac = eval_jac_c(p, x);
      const Vector multiplier = lambda_prev - c / omega;
      return eval_hess_lagrangian(p, x, multiplier) + (jac.transpose() * jac) / omega;
    };
  }
  return sp;
}

/// Quadratic penalty objective f(x) + ||c(x)||^2 / (2 omega_e).
inline Subproblem penalty_subproblem(const NlpProblem& p, double omega_e) {
  Subproblem sp;
  sp.fcn = [&p, omega_e](const Vector& x) {
    return eval_f(p, x) + eval_c(p, x).squaredNorm() / (2.0 * omega_e);
  };
  sp.grad = [&p, omega_e](const Vector& x) -> Vector {
    return eval_grad_f(p, x) + eval_jac_c(p, x).transpose() * (eval_c(p, x) / omega_e);
  };
  if (p.has_hessian()) {
    sp.hess = [&p, omega_e](const Vector& x) -> Matrix {
      const Vector c = eval_c(p, x);
      const Matrix jac = eval_jac_c(p, x);
      return eval_hess_lagrangian(p, x, -c / omega_e) + (jac.transpose() * jac) / omega_e;
    };
  }
  return sp;
}

/// ||grad f(x) + J(x)' c(x) / omega_e||_inf, stationarity of the penalty program.
inline double upnp_residual(const NlpProblem& p, const Vector& x, double omega_e) {
  if (!(omega_e > 0.0)) fail(ErrorCode::InvalidArgument, "omega_e must be > 0");
  return linalg::inf_norm(eval_grad_f(p, x) + eval_jac_c(p, x).transpose() * (eval_c(p, x) / omega_e));
}

/// KKT residual max(||grad_x L(x, lambda)||_inf, ||c(x) + omega_e lambda||_inf).
///
/// For omega_e > 0 these are the optimality conditions of the equivalent
/// constrained program min f(x) + omega_e/2 ||xi||^2 s.t. c(x) + omega_e xi = 0
/// (with xi = lambda), whose stationary x are exactly the penalty program's
/// stationary points. For omega_e = 0 it is the usual KKT residual.
inline double kkt_residual(const NlpProblem& p, const Vector& x, const Vector& lambda,
                           double omega_e = 0.0) {
  const Vector shifted = eval_c(p, x) + omega_e * lambda;
  return std::max(linalg::inf_norm(eval_grad_lagrangian(p, x, lambda)), linalg::inf_norm(shifted));
}

/// Stopping measure for MALM iterates (see kkt_residual).
inline double malm_residual(const NlpProblem& p, const Vector& x, const Vector& lambda,
                            const PenaltyConfig& cfg) {
  return kkt_residual(p, x, lambda, cfg.omega_e);
}

namespace detail {

struct OuterStep {
  Vector x;
  Vector lambda;
  int inner_iters = 0;
  std::optional<double> condition;
  bool inner_ok = true;
};

inline void prepare(const NlpProblem& p, const Vector& x0, const Vector& lambda0,
                    const OuterOptions& opts, SolveTrace& trace) {
  validate(opts.cfg);
  inner::validate(opts.inner);
  check_len(x0, p.n, "x0");
  check_len(lambda0, p.m, "lambda0");
  linalg::require_finite(x0, "x0");
  linalg::require_finite(lambda0, "lambda0");
  if (opts.max_outer <= 0) fail(ErrorCode::InvalidArgument, "max_outer must be positive");
  if (!(opts.outer_tol > 0.0)) fail(ErrorCode::InvalidArgument, "outer_tol must be > 0");
  if (!(opts.inner_tol_factor > 0.0 && opts.inner_tol_factor <= 1.0)) {
    fail(ErrorCode::InvalidArgument, "inner_tol_factor must lie in (0,1]");
  }
  if (opts.outer_tol < opts.inner.grad_tol) {
    trace.warnings.push_back("outer_tol " + std::to_string(opts.outer_tol) +
                             " is below inner grad_tol " + std::to_string(opts.inner.grad_tol));
  }
}

/// Shared outer loop. `step(x_start, lambda_prev, inner_opts)` runs one inner
/// solve plus dual update; `residual(x, lambda)` is the stopping measure.
template <typename StepFn, typename ResidualFn>
SolveTrace run_outer(Method method, const NlpProblem& p, const Vector& x0, const Vector& lambda0,
                     const OuterOptions& opts, const PenaltyConfig& cfg, StepFn&& step,
                     ResidualFn&& residual) {
  SolveTrace trace;
  trace.method = method;
  trace.cfg = cfg;
  prepare(p, x0, lambda0, opts, trace);

  Vector x = x0;
  Vector lambda = lambda0;
  inner::InnerOptions inner_opts = opts.inner;
  trace.status = OuterStatus::MaxOuter;
  for (int k = 1; k <= opts.max_outer; ++k) {
    const Vector& start = opts.warm_start ? x : x0;
    OuterStep s = step(start, lambda, inner_opts);

    IterateRecord rec;
    rec.k = k;
    rec.f_val = eval_f(p, s.x);
    const Vector c = eval_c(p, s.x);
    rec.c_norm = c.norm();
    rec.shifted_c_norm = (c + cfg.omega_e * lambda).norm();
    rec.inner_iters = s.inner_iters;
    rec.subproblem_condition = s.condition;

    if (!s.inner_ok) {
      rec.x = s.x;
      rec.lambda = lambda;
      rec.terminal_residual = residual(s.x, lambda);
      trace.records.push_back(std::move(rec));
      x = std::move(s.x);
      trace.status = OuterStatus::InnerFailure;
      break;
    }

    x = std::move(s.x);
    lambda = std::move(s.lambda);
    rec.x = x;
    rec.lambda = lambda;
    rec.terminal_residual = residual(x, lambda);
    const bool done = rec.terminal_residual <= opts.outer_tol;
    trace.records.push_back(std::move(rec));
    if (done) {
      trace.status = OuterStatus::Converged;
      break;
    }
    inner_opts.grad_tol *= opts.inner_tol_factor;
  }
  trace.x_final = std::move(x);
  trace.lambda_final = std::move(lambda);
  return trace;
}

inline OuterStep minimize_step(const Subproblem& sp, const Vector& start,
                               const inner::InnerOptions& inner_opts) {
  inner::InnerResult r = inner::minimize(sp.fcn, sp.grad, sp.hess, start, inner_opts);
  OuterStep s;
  s.inner_iters = r.iters;
  s.condition = r.hessian_condition;
  s.inner_ok = r.status == inner::InnerStatus::Converged;
  s.x = std::move(r.x);
  return s;
}

inline void require_constraints(const NlpProblem& p) {
  if (p.m < 1) fail(ErrorCode::InvalidArgument, p.name + " has no constraints (m = 0)");
}

}  // namespace detail

/// Augmented Lagrangian method: minimize L(x, lambda_{k-1}) + ||c||^2/(2 omega),
/// then lambda_k = lambda_{k-1} - c(x_k)/omega. omega_e in the options is ignored.
inline SolveTrace alm_solve(const NlpProblem& p, const Vector& x0, const Vector& lambda0,
                            const OuterOptions& opts) {
  detail::require_constraints(p);
  PenaltyConfig cfg{opts.cfg.omega, 0.0};
  const double omega = cfg.omega;
  return detail::run_outer(
      Method::ALM, p, x0, lambda0, opts, cfg,
      [&](const Vector& start, const Vector& lambda, const inner::InnerOptions& io) {
        detail::OuterStep s = detail::minimize_step(alm_subproblem(p, lambda, omega), start, io);
        if (s.inner_ok) s.lambda = lambda - eval_c(p, s.x) / omega;
        return s;
      },
      [&](const Vector& x, const Vector& lambda) { return kkt_residual(p, x, lambda); });
}

/// Modified augmented Lagrangian method in subproblem form: minimize
/// build_subproblem(p, lambda_{k-1}, cfg), then dual_update. With
/// omega_e = 0 the iterates coincide with alm_solve.
inline SolveTrace malm_solve(const NlpProblem& p, const Vector& x0, const Vector& lambda0,
                             const OuterOptions& opts) {
  detail::require_constraints(p);
  const PenaltyConfig cfg = opts.cfg;
  return detail::run_outer(
      Method::MALM_Sub, p, x0, lambda0, opts, cfg,
      [&](const Vector& start, const Vector& lambda, const inner::InnerOptions& io) {
        detail::OuterStep s = detail::minimize_step(build_subproblem(p, lambda, cfg), start, io);
        if (s.inner_ok) s.lambda = dual_update(lambda, eval_c(p, s.x), cfg);
        return s;
      },
      [&](const Vector& x, const Vector& lambda) { return malm_residual(p, x, lambda, cfg); });
}

/// Modified augmented Lagrangian method in its original root form: find a
/// root (x_k, lt) of the optimality system F_k, then lambda_k = lambda_{k-1} + lt.
inline SolveTrace malm_solve_root_form(const NlpProblem& p, const Vector& x0, const Vector& lambda0,
                                       const OuterOptions& opts) {
  detail::require_constraints(p);
  const PenaltyConfig cfg = opts.cfg;
  return detail::run_outer(
      Method::MALM_Root, p, x0, lambda0, opts, cfg,
      [&](const Vector& start, const Vector& lambda, const inner::InnerOptions& io) {
        const Vector lt0 = eliminate_lambda_tilde(eval_c(p, start), lambda, cfg);
        inner::RootResult r = inner::solve_root_fk(p, lambda, cfg, start, lt0, io);
        detail::OuterStep s;
        s.inner_iters = r.iters;
        s.inner_ok = r.status == inner::InnerStatus::Converged;
        if (s.inner_ok) {
          s.lambda = lambda + r.lambda_tilde;
          // Same conditioning figure as the subproblem form, for comparable traces.
          if (p.has_hessian()) {
            s.condition = inner::detail::try_condition(build_subproblem(p, lambda, cfg).hess(r.x));
          }
        }
        s.x = std::move(r.x);
        return s;
      },
      [&](const Vector& x, const Vector& lambda) { return malm_residual(p, x, lambda, cfg); });
}

/// Baseline: one unconstrained minimization of f + ||c||^2 / (2 omega_e) from x0.
inline SolveTrace penalty_direct_solve(const NlpProblem& p, const Vector& x0, const OuterOptions& opts) {
  const double omega_e = opts.cfg.omega_e;
  if (!(omega_e > 0.0)) fail(ErrorCode::InvalidArgument, "penalty_direct_solve needs omega_e > 0");

  SolveTrace trace;
  trace.method = Method::PenaltyDirect;
  trace.cfg = opts.cfg;
  detail::prepare(p, x0, Vector::Zero(p.m), opts, trace);

  const Subproblem sp = penalty_subproblem(p, omega_e);
  inner::InnerResult r = inner::minimize(sp.fcn, sp.grad, sp.hess, x0, opts.inner);

  const Vector c = eval_c(p, r.x);
  IterateRecord rec;
  rec.k = 1;
  rec.x = r.x;
  rec.lambda = -c / omega_e;
  rec.f_val = eval_f(p, r.x);
  rec.c_norm = c.norm();
  rec.shifted_c_norm = rec.c_norm;
  rec.inner_iters = r.iters;
  rec.subproblem_condition = r.hessian_condition;
  rec.terminal_residual = upnp_residual(p, r.x, omega_e);

  if (r.status != inner::InnerStatus::Converged) {
    trace.status = OuterStatus::InnerFailure;
  } else if (rec.terminal_residual <= opts.outer_tol) {
    trace.status = OuterStatus::Converged;
  } else {
    trace.status = OuterStatus::MaxOuter;
  }
  trace.x_final = rec.x;
  trace.lambda_final = rec.lambda;
  trace.records.push_back(std::move(rec));
  return trace;
}

inline SolveTrace alm_solve(const NlpProblem& p, const OuterOptions& opts) {
  return alm_solve(p, p.x0, Vector::Zero(p.m), opts);
}
inline SolveTrace malm_solve(const NlpProblem& p, const OuterOptions& opts) {
  return malm_solve(p, p.x0, Vector::Zero(p.m), opts);
}
inline SolveTrace malm_solve_root_form(const NlpProblem& p, const OuterOptions& opts) {
  return malm_solve_root_form(p, p.x0, Vector::Zero(p.m), opts);
}
inline SolveTrace penalty_direct_solve(const NlpProblem& p, const OuterOptions& opts) {
  return penalty_direct_solve(p, p.x0, opts);
}

}  // namespace malm
