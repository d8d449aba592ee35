#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "malm/error.hpp"

namespace malm::linalg {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Smallest pivot accepted by the damped Cholesky factorization.
inline constexpr double kPivotFloor = 1e-12;
/// Shifts beyond this value are reported as DampingExhausted.
inline constexpr double kMaxDamping = 1e12;
/// First nonzero shift when the caller passes tau0 = 0.
inline constexpr double kFallbackDampingSeed = 1e-4;
/// Singular values at or below this fraction of sigma_max count as zero.
inline constexpr double kRankTolerance = 1e-10;

inline double inf_norm(const Vector& v) {
  return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>();
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& a) {
  return a.allFinite();
}

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& a, const char* what) {
  if (!a.allFinite()) fail(ErrorCode::NonFiniteInput, std::string(what) + " contains NaN/Inf");
}

inline void require_square(const Matrix& a, const char* what) {
  if (a.rows() != a.cols()) {
    fail(ErrorCode::ShapeMismatch, std::string(what) + " is " + std::to_string(a.rows()) + "x" +
                                       std::to_string(a.cols()) + ", expected square");
  }
}

/// |a_ij - a_ji| <= 1e-12 * max(1, |a_ij|) for all pairs.
inline bool is_symmetric(const Matrix& a) {
  if (a.rows() != a.cols()) return false;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < a.cols(); ++j) {
      const double scale = std::max({1.0, std::abs(a(i, j)), std::abs(a(j, i))});
      if (std::abs(a(i, j) - a(j, i)) > 1e-12 * scale) return false;
    }
  }
  return true;
}

inline void require_symmetric(const Matrix& a, const char* what) {
  require_square(a, what);
  if (!is_symmetric(a)) fail(ErrorCode::NotSymmetric, std::string(what) + " is not symmetric");
}

struct DampedStep {
  Vector step;
  double tau_used = 0.0;
};

/// Cholesky of H + tau*I that also rejects pivots at or below kPivotFloor.
/// Returns false when the shifted matrix is not safely positive definite.
inline bool try_damped_cholesky(const Matrix& h, double tau, Eigen::LLT<Matrix>& llt) {
  Matrix shifted = h;
  shifted.diagonal().array() += tau;
  llt.compute(shifted);
  if (llt.info() != Eigen::Success) return false;
  const Vector pivots = llt.matrixLLT().diagonal().array().square();
  return pivots.size() == 0 || pivots.minCoeff() > kPivotFloor;
}

/// Solves (H + tau*I) s = -g for the smallest tau in {0, tau0, 10*tau0, ...}
/// whose factorization succeeds.
inline DampedStep solve_spd_damped(const Matrix& h, const Vector& g, double tau0) {
  require_square(h, "H");
  if (h.rows() != g.size()) {
    fail(ErrorCode::ShapeMismatch, "H is " + std::to_string(h.rows()) + "x" +
                                       std::to_string(h.cols()) + " but g has length " +
                                       std::to_string(g.size()));
  }
  require_finite(h, "H");
  require_finite(g, "g");
  if (!(tau0 >= 0.0) || !std::isfinite(tau0)) {
    fail(ErrorCode::InvalidArgument, "tau0 must be finite and >= 0");
  }
  require_symmetric(h, "H");

  Eigen::LLT<Matrix> llt;
  double tau = 0.0;
  while (!try_damped_cholesky(h, tau, llt)) {
    if (tau == 0.0) {
      tau = tau0 > 0.0 ? tau0 : kFallbackDampingSeed;
    } else {
      tau *= 10.0;
    }
    if (tau > kMaxDamping) {
      fail(ErrorCode::DampingExhausted, "no shift up to 1e12 makes H positive definite");
    }
  }

  Vector s = llt.solve(-g);
  // One step of iterative refinement.
  Matrix shifted = h;
  shifted.diagonal().array() += tau;
  const Vector r = shifted * s + g;
  s -= llt.solve(r);
  return {std::move(s), tau};
}

inline Vector symmetric_eigenvalues(const Matrix& h) {
  require_symmetric(h, "H");
  require_finite(h, "H");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(h, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) fail(ErrorCode::InvalidArgument, "eigensolver did not converge");
  return eig.eigenvalues();  // ascending
}

/// lambda_max / lambda_min from a full symmetric eigendecomposition.
inline double condition_estimate(const Matrix& h) {
  if (h.size() == 0) fail(ErrorCode::ShapeMismatch, "empty matrix");
  const Vector ev = symmetric_eigenvalues(h);
  const double lo = ev(0);
  const double hi = ev(ev.size() - 1);
  if (!(lo > 0.0)) fail(ErrorCode::NotPositiveDefinite, "smallest eigenvalue is " + std::to_string(lo));
  return hi / lo;
}

/// Eigenvalue spread of H measured against the unit curvature scale,
/// max(lambda_max, 1) / min(lambda_min, 1).
///
/// This is the conditioning figure reported for penalty subproblems. For a
/// 1x1 Hessian 1 + 1/w it gives 1 + 1/w, whereas lambda_max/lambda_min is
/// always 1 in one dimension. When the spectrum contains 1 it coincides with
/// condition_estimate().
inline double scaled_condition(const Matrix& h) {
  if (h.size() == 0) fail(ErrorCode::ShapeMismatch, "empty matrix");
  const Vector ev = symmetric_eigenvalues(h);
  const double lo = ev(0);
  const double hi = ev(ev.size() - 1);
  if (!(lo > 0.0)) fail(ErrorCode::NotPositiveDefinite, "smallest eigenvalue is " + std::to_string(lo));
  return std::max(hi, 1.0) / std::min(lo, 1.0);
}

/// Full SVD of A with the numerical rank decided at kRankTolerance * sigma_max.
struct RankRevealingSvd {
  Eigen::JacobiSVD<Matrix> svd;
  Eigen::Index rank = 0;

  explicit RankRevealingSvd(const Matrix& a)
      : svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV) {
    const Vector& sv = svd.singularValues();
    const double smax = sv.size() > 0 ? sv(0) : 0.0;
    rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
      if (sv(i) > kRankTolerance * smax && sv(i) > 0.0) ++rank;
    }
  }
};

/// Minimum-norm minimizer of ||A x - b||_2.
inline Vector lstsq_min_norm(const Matrix& a, const Vector& b) {
  if (a.rows() != b.size()) {
    fail(ErrorCode::ShapeMismatch, "A has " + std::to_string(a.rows()) + " rows but b has length " +
                                       std::to_string(b.size()));
  }
  require_finite(a, "A");
  require_finite(b, "b");
  if (a.cols() == 0) return Vector(0);
  if (a.rows() == 0) return Vector::Zero(a.cols());

  const RankRevealingSvd rr(a);
  const auto& u = rr.svd.matrixU();
  const auto& v = rr.svd.matrixV();
  const Vector& sv = rr.svd.singularValues();
  Vector x = Vector::Zero(a.cols());
  for (Eigen::Index i = 0; i < rr.rank; ++i) {
    x += (u.col(i).dot(b) / sv(i)) * v.col(i);
  }
  return x;
}

/// Orthonormal basis of null(A), one column per null direction (n x (n - rank)).
inline Matrix null_space_basis(const Matrix& a) {
  require_finite(a, "A");
  if (a.cols() == 0) return Matrix(0, 0);
  if (a.rows() == 0) return Matrix::Identity(a.cols(), a.cols());
  const RankRevealingSvd rr(a);
  return rr.svd.matrixV().rightCols(a.cols() - rr.rank);
}

}  // namespace malm::linalg
