#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <type_traits>
#include <utility>

#include "malm/error.hpp"
#include "malm/linalg.hpp"

namespace malm {

using linalg::Matrix;
using linalg::Vector;

/// Convex quadratic data: f(x) = 1/2 x'Qx + q'x, c(x) = Ax - b.
struct QpData {
  Matrix Q;
  Vector q;
  Matrix A;
  Vector b;

  Eigen::Index n() const { return Q.rows(); }
  Eigen::Index m() const { return A.rows(); }
};

inline void validate_shapes(const QpData& d) {
  const auto n = d.Q.rows();
  if (d.Q.cols() != n || d.q.size() != n || d.A.cols() != n || d.b.size() != d.A.rows()) {
    fail(ErrorCode::ShapeMismatch,
         "QP data shapes inconsistent: Q " + std::to_string(d.Q.rows()) + "x" +
             std::to_string(d.Q.cols()) + ", q " + std::to_string(d.q.size()) + ", A " +
             std::to_string(d.A.rows()) + "x" + std::to_string(d.A.cols()) + ", b " +
             std::to_string(d.b.size()));
  }
  linalg::require_finite(d.Q, "Q");
  linalg::require_finite(d.q, "q");
  linalg::require_finite(d.A, "A");
  linalg::require_finite(d.b, "b");
  linalg::require_symmetric(d.Q, "Q");
}

/// True when Q is positive semidefinite up to a relative eigenvalue slack.
inline bool is_convex(const QpData& d) {
  if (d.Q.size() == 0) return true;
  const Vector ev = linalg::symmetric_eigenvalues(d.Q);
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  return ev(0) >= -1e-12 * scale;
}

/// The penalty pair: omega is the mild ALM/MALM divisor, omega_e the target
/// penalty of the unconstrained penalty program (0 selects the constrained
/// program).
struct PenaltyConfig {
  double omega = 0.1;
  double omega_e = 0.0;

  double divisor() const { return omega + omega_e; }
  bool penalized() const { return omega_e > 0.0; }
};

inline void validate(const PenaltyConfig& cfg) {
  if (!(cfg.omega > 0.0) || !std::isfinite(cfg.omega)) {
    fail(ErrorCode::InvalidArgument, "omega must be finite and > 0");
  }
  if (!(cfg.omega_e >= 0.0) || !std::isfinite(cfg.omega_e)) {
    fail(ErrorCode::InvalidArgument, "omega_e must be finite and >= 0");
  }
}

/// Smooth equality-constrained program min f(x) s.t. c(x) = 0.
///
/// Evaluators must be pure: the same x always produces the same bits.
/// `hess_lagrangian(x, lambda)` returns the Hessian of f(x) - lambda'c(x) and
/// may be left empty.
struct NlpProblem {
  using ScalarFn = std::function<double(const Vector&)>;
  using VectorFn = std::function<Vector(const Vector&)>;
  using MatrixFn = std::function<Matrix(const Vector&)>;
  using HessLagFn = std::function<Matrix(const Vector&, const Vector&)>;

  std::string name;
  Eigen::Index n = 0;
  Eigen::Index m = 0;
  ScalarFn f;
  VectorFn grad_f;
  VectorFn c;
  MatrixFn jac_c;  // m x n
  HessLagFn hess_lagrangian;
  Vector x0;  // default start
  std::optional<QpData> qp;  // set when built by make_qp_problem

  bool has_hessian() const { return static_cast<bool>(hess_lagrangian); }
};

namespace detail {

inline void check_len(const Vector& v, Eigen::Index expected, const char* what) {
  if (v.size() != expected) {
    fail(ErrorCode::ShapeMismatch, std::string(what) + " has length " + std::to_string(v.size()) +
                                       ", expected " + std::to_string(expected));
  }
}

template <typename T>
const T& check_finite(const T& value, const NlpProblem& p, const char* what) {
  bool ok;
  if constexpr (std::is_same_v<T, double>) {
    ok = std::isfinite(value);
  } else {
    ok = value.allFinite();
  }
  if (!ok) fail(ErrorCode::NonFiniteEvaluation, p.name + ": " + what + " returned NaN/Inf");
  return value;
}

}  // namespace detail

inline double eval_f(const NlpProblem& p, const Vector& x) {
  detail::check_len(x, p.n, "x");
  const double v = p.f(x);
  return detail::check_finite(v, p, "f");
}

inline Vector eval_grad_f(const NlpProblem& p, const Vector& x) {
  detail::check_len(x, p.n, "x");
  Vector g = p.grad_f(x);
  detail::check_len(g, p.n, "grad f");
  return detail::check_finite(g, p, "grad f");
}

inline Vector eval_c(const NlpProblem& p, const Vector& x) {
  detail::check_len(x, p.n, "x");
  Vector c = p.c(x);
  detail::check_len(c, p.m, "c");
  return detail::check_finite(c, p, "c");
}

inline Matrix eval_jac_c(const NlpProblem& p, const Vector& x) {
  detail::check_len(x, p.n, "x");
  Matrix j = p.jac_c(x);
  if (j.rows() != p.m || j.cols() != p.n) fail(ErrorCode::ShapeMismatch, p.name + ": Jacobian shape");
  return detail::check_finite(j, p, "Jacobian of c");
}

inline Matrix eval_hess_lagrangian(const NlpProblem& p, const Vector& x, const Vector& lambda) {
  if (!p.has_hessian()) fail(ErrorCode::InvalidArgument, p.name + " has no Hessian of the Lagrangian");
  detail::check_len(x, p.n, "x");
  detail::check_len(lambda, p.m, "lambda");
  Matrix h = p.hess_lagrangian(x, lambda);
  if (h.rows() != p.n || h.cols() != p.n) fail(ErrorCode::ShapeMismatch, p.name + ": Hessian shape");
  return detail::check_finite(h, p, "Hessian of the Lagrangian");
}

/// L(x, lambda) = f(x) - lambda'c(x). The minus sign fixes the sign of every
/// dual update in the solvers.
inline double eval_lagrangian(const NlpProblem& p, const Vector& x, const Vector& lambda) {
  detail::check_len(lambda, p.m, "lambda");
  return eval_f(p, x) - lambda.dot(eval_c(p, x));
}

/// grad_x L = grad f(x) - J(x)' lambda.
inline Vector eval_grad_lagrangian(const NlpProblem& p, const Vector& x, const Vector& lambda) {
  detail::check_len(lambda, p.m, "lambda");
  return eval_grad_f(p, x) - eval_jac_c(p, x).transpose() * lambda;
}

inline NlpProblem make_qp_problem(QpData d, std::string name = "qp") {
  validate_shapes(d);
  NlpProblem p;
  p.name = std::move(name);
  p.n = d.n();
  p.m = d.m();
  p.x0 = Vector::Zero(p.n);
  auto data = std::make_shared<const QpData>(d);
  p.f = [data](const Vector& x) { return 0.5 * x.dot(data->Q * x) + data->q.dot(x); };
  p.grad_f = [data](const Vector& x) -> Vector { return data->Q * x + data->q; };
  p.c = [data](const Vector& x) -> Vector { return data->A * x - data->b; };
  p.jac_c = [data](const Vector&) -> Matrix { return data->A; };
  p.hess_lagrangian = [data](const Vector&, const Vector&) -> Matrix { return data->Q; };
  p.qp = std::move(d);
  return p;
}

}  // namespace malm
