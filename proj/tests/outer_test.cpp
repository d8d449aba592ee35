#include "malm/outer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "malm/catalog.hpp"
#include "malm/oracle.hpp"
#include "malm/trace_io.hpp"
#include "test_util.hpp"

namespace malm {
namespace {

using testing::mat;
using testing::vec;

OuterOptions options(double omega, double omega_e) {
  OuterOptions o;
  o.cfg = {omega, omega_e};
  return o;
}

// min x1^2 + 1/2 x2^2 - 2 x1 + 3 x2 with the vacuous constraint 0'x = 0.
NlpProblem unconstrained() {
  return make_qp_problem(QpData{mat({{2, 0}, {0, 1}}), vec({-2, 3}), mat({{0, 0}}), vec({0})}, "free");
}

void expect_trace_invariants(const SolveTrace& t, const OuterOptions& o) {
  for (int i = 0; i < t.outer_iters(); ++i) EXPECT_EQ(t.records[i].k, i + 1);
  if (t.status == OuterStatus::Converged) {
    ASSERT_FALSE(t.records.empty());
    EXPECT_LE(t.final_residual(), o.outer_tol);
  }
}

TEST(EliminateLambdaTilde, Examples) {
  EXPECT_EQ(eliminate_lambda_tilde(vec({0}), vec({0}), {0.1, 0.1})(0), 0.0);
  EXPECT_NEAR(eliminate_lambda_tilde(vec({0.5}), vec({1}), {0.1, 0.1})(0), -3.0, 1e-15);
  EXPECT_NEAR(eliminate_lambda_tilde(vec({0.3}), vec({7}), {0.1, 0.0})(0), -3.0, 1e-15);
  try {
    eliminate_lambda_tilde(vec({0.3, 1}), vec({7}), {0.1, 0.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
  }
}

TEST(DualUpdate, Examples) {
  EXPECT_EQ(dual_update(vec({0}), vec({0}), {0.1, 0.1})(0), 0.0);
  EXPECT_NEAR(dual_update(vec({1}), vec({0.5}), {0.1, 0.1})(0), -2.0, 1e-15);
  EXPECT_NEAR(dual_update(vec({2}), vec({0.3}), {0.1, 0.0})(0), -1.0, 1e-15);
  EXPECT_THROW(dual_update(vec({2}), vec({0.3, 0}), {0.1, 0.0}), Error);
}

TEST(DualUpdate, ConsistentWithElimination) {
  testing::Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index m = rng.integer(1, 6);
    const Vector lambda = rng.vector(m, -10, 10);
    const Vector c = rng.vector(m, -10, 10);
    const PenaltyConfig cfg{rng.uniform(1e-3, 2), trial % 3 == 0 ? 0.0 : rng.uniform(0, 1)};
    const Vector lt = eliminate_lambda_tilde(c, lambda, cfg);
    const Vector updated = dual_update(lambda, c, cfg);
    EXPECT_EQ(updated, lambda + lt);
    const double scale = std::max({1.0, linalg::inf_norm(lambda), linalg::inf_norm(lt)});
    EXPECT_LE(linalg::inf_norm(updated - lambda - lt), 1e-15 * scale);
  }
}

TEST(BuildSubproblem, OneDimensionalValues) {
  const NlpProblem p = catalog("qp1d");
  const Subproblem sp = build_subproblem(p, vec({0}), {0.1, 0.1});
  EXPECT_DOUBLE_EQ(sp.fcn(vec({1})), 0.5);
  EXPECT_DOUBLE_EQ(sp.grad(vec({1}))(0), 1.0);

  const Subproblem sp2 = build_subproblem(p, vec({0}), {0.1, 0.01});
  const auto r = inner::minimize(sp2.fcn, sp2.grad, sp2.hess, vec({0}));
  EXPECT_NEAR(r.x(0), (1 / 0.11) / (1 + 1 / 0.11), 1e-12);
  EXPECT_NEAR(r.x(0), 0.900901, 1e-6);
}

TEST(BuildSubproblem, ReducesToAlmSubproblemWithoutOuterPenalty) {
  testing::Rng rng(32);
  for (auto name : kCatalogNames) {
    const NlpProblem p = catalog(name);
    const Vector lambda = rng.vector(p.m, -3, 3);
    const Subproblem a = build_subproblem(p, lambda, {0.1, 0.0});
    const Subproblem b = alm_subproblem(p, lambda, 0.1);
    for (int i = 0; i < 10; ++i) {
      const Vector x = rng.vector(p.n, -2, 2);
      EXPECT_EQ(a.fcn(x), b.fcn(x)) << name;
      EXPECT_EQ(a.grad(x), b.grad(x)) << name;
      EXPECT_EQ(a.hess(x), b.hess(x)) << name;
    }
  }
}

TEST(BuildSubproblem, DerivativesMatchFiniteDifferences) {
  testing::Rng rng(33);
  for (auto name : kCatalogNames) {
    const NlpProblem p = catalog(name);
    for (int i = 0; i < 20; ++i) {
      const PenaltyConfig cfg{i % 2 ? 1.0 : 0.1, (i % 3) * 0.05};
      const Subproblem sp = build_subproblem(p, rng.vector(p.m), cfg);
      const Vector x = rng.vector(p.n, -1.5, 1.5);
      EXPECT_LE(linalg::inf_norm(oracle::finite_diff_grad(sp.fcn, x) - sp.grad(x)), 1e-5) << name;
      const Matrix fd_hess = oracle::finite_diff_jacobian(sp.grad, x);
      EXPECT_LE((fd_hess - sp.hess(x)).cwiseAbs().maxCoeff(), 1e-4) << name;
    }
  }
}

TEST(BuildSubproblem, Errors) {
  const NlpProblem p = catalog("qp1d");
  EXPECT_THROW(build_subproblem(p, vec({0, 0}), {0.1, 0.1}), Error);
  EXPECT_THROW(build_subproblem(p, vec({0}), {0.0, 0.1}), Error);
  EXPECT_THROW(build_subproblem(p, vec({0}), {0.1, -1.0}), Error);
}

TEST(UpnpResidual, Examples) {
  const NlpProblem p = catalog("qp1d");
  EXPECT_LE(upnp_residual(p, vec({10.0 / 11.0}), 0.1), 1e-12);
  EXPECT_NEAR(upnp_residual(p, vec({0}), 0.1), 10.0, 1e-12);
  const NlpProblem free = unconstrained();
  const Vector x = vec({0.3, -0.7});
  EXPECT_EQ(upnp_residual(free, x, 0.01), linalg::inf_norm(eval_grad_f(free, x)));
  EXPECT_THROW(upnp_residual(p, vec({0}), 0.0), Error);
}

TEST(AlmSolve, OneDimensional) {
  const NlpProblem p = catalog("qp1d");
  const OuterOptions o = options(0.1, 0.0);
  const SolveTrace t = alm_solve(p, vec({0}), vec({0}), o);
  ASSERT_EQ(t.status, OuterStatus::Converged);
  EXPECT_NEAR(t.records[0].x(0), 10.0 / 11.0, 1e-12);
  EXPECT_NEAR(t.records[0].lambda(0), 10.0 / 11.0, 1e-12);
  EXPECT_NEAR(t.x_final(0), 1.0, 1e-8);
  EXPECT_NEAR(t.lambda_final(0), 1.0, 1e-7);
  EXPECT_EQ(t.method, Method::ALM);
  expect_trace_invariants(t, o);
}

TEST(AlmSolve, IgnoresOuterPenalty) {
  const NlpProblem p = catalog("qp1d");
  const SolveTrace a = alm_solve(p, options(0.1, 0.0));
  const SolveTrace b = alm_solve(p, options(0.1, 0.5));
  EXPECT_EQ(b.cfg.omega_e, 0.0);
  ASSERT_EQ(a.outer_iters(), b.outer_iters());
  EXPECT_EQ(a.x_final, b.x_final);
}

TEST(AlmSolve, VanishingConstraintNeedsOneIteration) {
  const NlpProblem p = unconstrained();
  const SolveTrace t = alm_solve(p, vec({5, 5}), vec({0.25}), options(0.1, 0.0));
  ASSERT_EQ(t.status, OuterStatus::Converged);
  EXPECT_EQ(t.outer_iters(), 1);
  EXPECT_NEAR(t.x_final(0), 1.0, 1e-12);
  EXPECT_NEAR(t.x_final(1), -3.0, 1e-12);
  EXPECT_EQ(t.lambda_final(0), 0.25);
}

TEST(AlmSolve, RosenbrockCircleMatchesMalmWithoutOuterPenalty) {
  const NlpProblem p = catalog("rosenbrock_circle");
  const OuterOptions o = options(0.1, 0.0);
  const SolveTrace a = alm_solve(p, o);
  const SolveTrace m = malm_solve(p, o);
  ASSERT_EQ(a.status, OuterStatus::Converged);
  EXPECT_LE(eval_c(p, a.x_final).norm(), 1e-8);
  EXPECT_LE(linalg::inf_norm(a.x_final - m.x_final), 1e-12);
}

TEST(AlmSolve, RequiresConstraints) {
  NlpProblem p = unconstrained();
  p.m = 0;
  EXPECT_THROW(alm_solve(p, options(0.1, 0.0)), Error);
}

TEST(MalmSolve, OneDimensionalPenaltySolution) {
  const NlpProblem p = catalog("qp1d");
  const OuterOptions o = options(0.1, 0.1);
  const SolveTrace t = malm_solve(p, vec({0}), vec({0}), o);
  ASSERT_EQ(t.status, OuterStatus::Converged);
  EXPECT_NEAR(t.x_final(0), 10.0 / 11.0, 1e-8);
  EXPECT_NEAR(t.lambda_final(0), 10.0 / 11.0, 1e-7);
  EXPECT_EQ(t.method, Method::MALM_Sub);
  expect_trace_invariants(t, o);
}

TEST(MalmSolve, OverdeterminedWithMatchedPenalties) {
  const NlpProblem p = catalog("qp_overdet");
  const OuterOptions o = options(0.1, 0.1);
  const SolveTrace t = malm_solve(p, o);
  ASSERT_EQ(t.status, OuterStatus::Converged);
  EXPECT_NEAR(t.x_final(0), 1.0 / 21.0, 1e-8);
}

// With omega >> omega_e on an infeasible problem, x settles on the penalty
// solution after a few iterations, but the multiplier component orthogonal to
// range(A) contracts only by omega / (omega + omega_e) per iteration.
TEST(MalmSolve, OverdeterminedDualCrawl) {
  const NlpProblem p = catalog("qp_overdet");
  const SolveTrace t = malm_solve(p, options(1.0, 0.1));
  EXPECT_EQ(t.status, OuterStatus::MaxOuter);
  EXPECT_EQ(t.outer_iters(), 50);
  EXPECT_NEAR(t.x_final(0), 1.0 / 21.0, 1e-6);
  const Vector c = eval_c(p, t.x_final);
  const double gap = std::abs((c(0) - c(1)) / 2 + 0.1 * (t.lambda_final(0) - t.lambda_final(1)) / 2);
  const double expected = std::pow(1.0 / 1.1, 50);  // starts at |(c0 - c1)/2| = 1
  EXPECT_NEAR(gap, expected, 1e-6);
}

TEST(MalmSolve, SecantInnerSolverWithoutHessian) {
  NlpProblem p = catalog("qp1d");
  p.hess_lagrangian = nullptr;
  const SolveTrace t = malm_solve(p, options(0.1, 0.1));
  ASSERT_EQ(t.status, OuterStatus::Converged);
  EXPECT_NEAR(t.x_final(0), 10.0 / 11.0, 1e-8);
}

TEST(MalmSolve, InnerFailureIsReported) {
  const NlpProblem p = catalog("rosenbrock_circle");
  OuterOptions o = options(0.1, 0.01);
  o.inner.max_iters = 1;
  const SolveTrace t = malm_solve(p, o);
  EXPECT_EQ(t.status, OuterStatus::InnerFailure);
  ASSERT_EQ(t.outer_iters(), 1);
  EXPECT_EQ(t.records[0].lambda, Vector::Zero(1));
}

TEST(MalmSolve, OptionValidation) {
  const NlpProblem p = catalog("qp1d");
  OuterOptions o = options(0.1, 0.1);
  o.max_outer = 0;
  EXPECT_THROW(malm_solve(p, o), Error);
  EXPECT_THROW(malm_solve(p, options(0.0, 0.1)), Error);
  EXPECT_THROW(malm_solve(p, vec({0, 0}), vec({0}), options(0.1, 0.1)), Error);

  OuterOptions loose = options(0.1, 0.1);
  loose.outer_tol = 1e-12;
  const SolveTrace t = malm_solve(p, loose);
  EXPECT_EQ(t.warnings.size(), 1u);
  EXPECT_TRUE(malm_solve(p, options(0.1, 0.1)).warnings.empty());
}

TEST(MalmSolve, TighteningInnerTolerance) {
  const NlpProblem p = catalog("toy_ocp");
  OuterOptions o = options(0.1, 0.01);
  o.inner.grad_tol = 1e-6;
  o.inner_tol_factor = 0.1;
  const SolveTrace t = malm_solve(p, o);
  EXPECT_EQ(t.status, OuterStatus::Converged);
}

TEST(MalmRootForm, OneDimensional) {
  const NlpProblem p = catalog("qp1d");
  const SolveTrace root = malm_solve_root_form(p, options(0.1, 0.1));
  const SolveTrace sub = malm_solve(p, options(0.1, 0.1));
  ASSERT_EQ(root.status, OuterStatus::Converged);
  EXPECT_EQ(root.method, Method::MALM_Root);
  EXPECT_LE(linalg::inf_norm(root.x_final - sub.x_final), 1e-6);
  EXPECT_LE(linalg::inf_norm(root.lambda_final - sub.lambda_final), 1e-6);

  const SolveTrace alm = alm_solve(p, options(0.1, 0.0));
  const SolveTrace root0 = malm_solve_root_form(p, options(0.1, 0.0));
  EXPECT_LE(linalg::inf_norm(root0.x_final - alm.x_final), 1e-6);
}

TEST(MalmRootForm, VanishingConstraintKeepsMultiplier) {
  const NlpProblem p = unconstrained();
  const SolveTrace t = malm_solve_root_form(p, vec({5, 5}), vec({0}), options(0.1, 0.01));
  ASSERT_EQ(t.status, OuterStatus::Converged);
  for (const auto& r : t.records) EXPECT_EQ(r.lambda(0), 0.0);
  const SolveTrace u = malm_solve_root_form(p, vec({5, 5}), vec({0.25}), options(0.1, 0.0));
  ASSERT_EQ(u.status, OuterStatus::Converged);
  for (const auto& r : u.records) EXPECT_EQ(r.lambda(0), 0.25);
  EXPECT_NEAR(u.x_final(1), -3.0, 1e-12);
}

// With omega_e > 0 the multiplier is pulled to the fixed point c + omega_e lambda = 0.
TEST(MalmRootForm, VanishingConstraintDrivesMultiplierToZero) {
  const NlpProblem p = unconstrained();
  const SolveTrace t = malm_solve_root_form(p, vec({5, 5}), vec({0.25}), options(0.1, 0.1));
  ASSERT_EQ(t.status, OuterStatus::Converged);
  EXPECT_LE(std::abs(t.lambda_final(0)), 1e-7);
}

TEST(PenaltyDirect, OneDimensional) {
  const NlpProblem p = catalog("qp1d");
  const SolveTrace a = penalty_direct_solve(p, vec({0}), options(0.1, 0.1));
  ASSERT_EQ(a.status, OuterStatus::Converged);
  ASSERT_EQ(a.outer_iters(), 1);
  EXPECT_NEAR(a.x_final(0), 10.0 / 11.0, 1e-12);
  EXPECT_NEAR(*a.max_condition(), 11.0, 1e-9);
  const SolveTrace b = penalty_direct_solve(p, vec({0}), options(0.1, 0.01));
  EXPECT_NEAR(b.x_final(0), 100.0 / 101.0, 1e-12);
  EXPECT_NEAR(*b.max_condition(), 101.0, 1e-9);
  EXPECT_EQ(b.method, Method::PenaltyDirect);
  EXPECT_THROW(penalty_direct_solve(p, vec({0}), options(0.1, 0.0)), Error);
}

TEST(PenaltyDirect, VanishingConstraintIsPlainMinimization) {
  const NlpProblem p = unconstrained();
  const SolveTrace t = penalty_direct_solve(p, vec({5, 5}), options(0.1, 1e-6));
  const auto r = inner::minimize([&](const Vector& x) { return eval_f(p, x); },
                                 [&](const Vector& x) { return eval_grad_f(p, x); },
                                 [&](const Vector&) { return p.qp->Q; }, vec({5, 5}));
  EXPECT_EQ(t.x_final, r.x);
  EXPECT_EQ(t.total_inner_iters(), r.iters);
}

const double kOmegas[] = {1.0, 0.1};
const double kOmegaEs[] = {0.0, 1e-2, 1e-1};

TEST(Invariant, AlmCoincidence) {
  for (auto name : kCatalogNames) {
    const NlpProblem p = catalog(name);
    for (double w : kOmegas) {
      const SolveTrace a = alm_solve(p, options(w, 0.0));
      const SolveTrace m = malm_solve(p, options(w, 0.0));
      ASSERT_EQ(a.outer_iters(), m.outer_iters()) << name;
      EXPECT_EQ(a.status, m.status);
      for (int k = 0; k < a.outer_iters(); ++k) {
        EXPECT_LE(linalg::inf_norm(a.records[k].x - m.records[k].x), 1e-12) << name << " k=" << k;
        EXPECT_LE(linalg::inf_norm(a.records[k].lambda - m.records[k].lambda), 1e-12) << name << " k=" << k;
      }
    }
  }
}

TEST(Invariant, RouteEquivalence) {
  for (auto name : kCatalogNames) {
    const NlpProblem p = catalog(name);
    for (double w : kOmegas) {
      for (double we : kOmegaEs) {
        const OuterOptions o = options(w, we);
        const SolveTrace sub = malm_solve(p, o);
        const SolveTrace root = malm_solve_root_form(p, o);
        EXPECT_NE(sub.status, OuterStatus::InnerFailure) << name << " " << w << " " << we;
        EXPECT_NE(root.status, OuterStatus::InnerFailure) << name << " " << w << " " << we;
        EXPECT_LE(linalg::inf_norm(sub.x_final - root.x_final), 1e-6) << name << " " << w << " " << we;
        EXPECT_LE(linalg::inf_norm(sub.lambda_final - root.lambda_final), 1e-6) << name << " " << w << " " << we;
        expect_trace_invariants(sub, o);
        expect_trace_invariants(root, o);
      }
    }
  }
}

TEST(Invariant, FixedPointLawAndClosedForm) {
  for (auto name : kCatalogNames) {
    const NlpProblem p = catalog(name);
    for (double we : {1e-1, 1e-2, 1e-4}) {
      const OuterOptions o = options(we, we);
      const SolveTrace t = malm_solve(p, o);
      ASSERT_EQ(t.status, OuterStatus::Converged) << name << " " << we;
      const double law = linalg::inf_norm(t.lambda_final + eval_c(p, t.x_final) / we);
      EXPECT_LE(law, 10 * o.outer_tol / we) << name << " " << we;
      if (p.qp) {
        EXPECT_LE(linalg::inf_norm(t.x_final - oracle::qp_upnp_closed_form(*p.qp, we)), 1e-6) << name << " " << we;
      }
    }
  }
}

TEST(Invariant, GradientIdentity) {
  testing::Rng rng(34);
  for (auto name : kCatalogNames) {
    const NlpProblem p = catalog(name);
    for (int i = 0; i < 100; ++i) {
      const PenaltyConfig cfg{kOmegas[i % 2], kOmegaEs[i % 3]};
      const double gap = oracle::check_gradient_identity(p, rng.vector(p.n, -2, 2), rng.vector(p.m, -5, 5), cfg);
      EXPECT_LE(gap, 1e-10) << name;
    }
  }
}

TEST(TraceIo, CsvLayoutAndRoundTrip) {
  const NlpProblem p = catalog("qp1d");
  const SolveTrace t = malm_solve(p, options(0.1, 0.1));
  std::ostringstream os;
  io::write_csv(t, os);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "k,f,c_norm,shifted_c_norm,inner_iters,cond,residual");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    std::istringstream fields(line);
    std::string k, f;
    std::getline(fields, k, ',');
    std::getline(fields, f, ',');
    EXPECT_EQ(std::stoi(k), rows);
    EXPECT_EQ(std::stod(f), t.records[rows - 1].f_val);
  }
  EXPECT_EQ(rows, t.outer_iters());

  const double v = 0.1 + 0.2;
  EXPECT_EQ(std::stod(io::format_real(v)), v);
  EXPECT_EQ(io::format_optional(std::nullopt), "");

  std::ostringstream summary;
  io::write_summary(t, summary);
  EXPECT_NE(summary.str().find("status = Converged"), std::string::npos);
  EXPECT_NE(summary.str().find("lambda_final = "), std::string::npos);
}

}  // namespace
}  // namespace malm
