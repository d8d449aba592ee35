#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <string_view>
#include <utility>

#include "malm/problem.hpp"

namespace malm {

inline constexpr std::array<std::string_view, 4> kCatalogNames = {
    "qp1d", "qp_overdet", "rosenbrock_circle", "toy_ocp"};

/// f = x^2/2, c = x - 1. Constrained solution x = 1, lambda = 1.
inline QpData qp1d_data() {
  QpData d;
  d.Q = Matrix::Constant(1, 1, 1.0);
  d.q = Vector::Zero(1);
  d.A = Matrix::Constant(1, 1, 1.0);
  d.b = Vector::Constant(1, 1.0);
  return d;
}

/// f = x^2/2 - x with the inconsistent pair x = 1, x = -1 (m = 2 > n = 1).
inline QpData qp_overdet_data() {
  QpData d;
  d.Q = Matrix::Constant(1, 1, 1.0);
  d.q = Vector::Constant(1, -1.0);
  d.A = Matrix::Constant(2, 1, 1.0);
  d.b = Vector(2);
  d.b << 1.0, -1.0;
  return d;
}

inline constexpr int kToyOcpGrid = 20;

/// Discretized tracking problem on t in (0, 1] with N grid points.
///
/// Unknowns are the states s_1..s_N followed by the controls u_1..u_N. The
/// dynamics s' = a s + u are discretized by explicit Euler from s_0 = 1, one
/// linear constraint per grid point. The objective tracks sin(2 pi t) with a
/// control-effort term and a first-difference smoothing term that couples
/// neighbouring controls (tridiagonal Hessian block).
inline QpData toy_ocp_data(int grid = kToyOcpGrid) {
  constexpr double kDecay = -0.5;
  constexpr double kEffort = 1e-2;
  constexpr double kSmoothing = 1e-3;
  constexpr double kInitialState = 1.0;

  const int N = grid;
  const double h = 1.0 / N;
  QpData d;
  d.Q = Matrix::Zero(2 * N, 2 * N);
  d.q = Vector::Zero(2 * N);
  d.A = Matrix::Zero(N, 2 * N);
  d.b = Vector::Zero(N);

  for (int i = 0; i < N; ++i) {
    const double t = (i + 1) * h;
    d.Q(i, i) = h;
    d.q(i) = -h * std::sin(2.0 * std::numbers::pi * t);
    d.Q(N + i, N + i) = h * kEffort;
  }
  for (int i = 1; i < N; ++i) {
    const double w = kSmoothing / h;
    d.Q(N + i, N + i) += w;
    d.Q(N + i - 1, N + i - 1) += w;
    d.Q(N + i, N + i - 1) -= w;
    d.Q(N + i - 1, N + i) -= w;
  }
  for (int i = 0; i < N; ++i) {
    d.A(i, i) = 1.0;
    d.A(i, N + i) = -h;
    if (i > 0) d.A(i, i - 1) = -(1.0 + h * kDecay);
  }
  d.b(0) = (1.0 + h * kDecay) * kInitialState;
  return d;
}

/// Rosenbrock's function on the unit circle, c = x1^2 + x2^2 - 1.
inline NlpProblem rosenbrock_circle() {
  NlpProblem p;
  p.name = "rosenbrock_circle";
  p.n = 2;
  p.m = 1;
  p.x0 = Vector(2);
  p.x0 << -1.2, 1.0;
  p.f = [](const Vector& x) {
    const double a = x(1) - x(0) * x(0);
    const double b = 1.0 - x(0);
    return 100.0 * a * a + b * b;
  };
  p.grad_f = [](const Vector& x) -> Vector {
    const double a = x(1) - x(0) * x(0);
    Vector g(2);
    g << -400.0 * x(0) * a - 2.0 * (1.0 - x(0)), 200.0 * a;
    return g;
  };
  p.c = [](const Vector& x) -> Vector { return Vector::Constant(1, x.squaredNorm() - 1.0); };
  p.jac_c = [](const Vector& x) -> Matrix {
    Matrix j(1, 2);
    j << 2.0 * x(0), 2.0 * x(1);
    return j;
  };
  p.hess_lagrangian = [](const Vector& x, const Vector& lambda) -> Matrix {
    Matrix h(2, 2);
    h << 1200.0 * x(0) * x(0) - 400.0 * x(1) + 2.0, -400.0 * x(0),
        -400.0 * x(0), 200.0;
    h.diagonal().array() -= 2.0 * lambda(0);
    return h;
  };
  return p;
}

namespace detail {

inline NlpProblem convex_qp(QpData d, std::string_view name) {
  if (!is_convex(d)) fail(ErrorCode::NotPositiveDefinite, std::string(name) + ": Q is not positive semidefinite");
  return make_qp_problem(std::move(d), std::string(name));
}

}  // namespace detail

inline NlpProblem catalog(std::string_view name) {
  if (name == "qp1d") return detail::convex_qp(qp1d_data(), name);
  if (name == "qp_overdet") return detail::convex_qp(qp_overdet_data(), name);
  if (name == "rosenbrock_circle") return rosenbrock_circle();
  if (name == "toy_ocp") return detail::convex_qp(toy_ocp_data(), name);
  fail(ErrorCode::UnknownProblem, "unknown problem '" + std::string(name) + "'");
}

}  // namespace malm
