#include <doctest.h>

#include <cmath>

#include "mpcrl/ip_solver.hpp"
#include "mpcrl/rng.hpp"
#include "support/fd_check.hpp"
#include "support/toys.hpp"

using namespace mpcrl;

namespace {

// Closed-form relaxed roots of the two 1-D examples.
double lower_root(double tau) { return (-1.0 + std::sqrt(1.0 + 4.0 * tau)) / 2.0; }
double upper_root(double tau) { return (3.0 - std::sqrt(1.0 + 4.0 * tau)) / 2.0; }

}  // namespace

TEST_CASE("residual at the closed-form relaxed root is zero") {
  ParametricNlp nlp = toys::quad_1d_lower();
  const double tau = 0.01;
  PrimalDualPoint z;
  z.w = Vector::Constant(1, lower_root(tau));
  z.lambda = Vector(0);
  z.mu = Vector::Constant(1, tau / (z.w[0] + 1.0));
  Vector r = assemble_residual(nlp, z, Vector(0), Vector(0), Vector::Zero(1), tau);
  CHECK(r.lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("residual blocks by direct substitution") {
  ParametricNlp nlp = toys::quad_1d_lower();
  PrimalDualPoint z;
  z.w = Vector::Zero(1);
  z.lambda = Vector(0);
  z.mu = Vector::Constant(1, 1.0);
  Vector r = assemble_residual(nlp, z, Vector(0), Vector(0), Vector::Zero(1), 0.01);
  REQUIRE(r.size() == 2);
  CHECK(r[0] == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(r[1] == doctest::Approx(-0.99).epsilon(1e-12));
}

TEST_CASE("residual rejects non-interior points") {
  ParametricNlp nlp = toys::quad_1d_lower();
  PrimalDualPoint z;
  z.w = Vector::Constant(1, -1.0);  // h = 0, not strictly interior
  z.lambda = Vector(0);
  z.mu = Vector::Constant(1, 1.0);
  CHECK_THROWS_AS(assemble_residual(nlp, z, Vector(0), Vector(0), Vector::Zero(1), 0.01),
                  InteriorityError);
  z.w = Vector::Zero(1);
  z.mu = Vector::Constant(1, -1.0);
  CHECK_THROWS_AS(assemble_residual(nlp, z, Vector(0), Vector(0), Vector::Zero(1), 0.01),
                  InteriorityError);
}

TEST_CASE("equality-only stationarity closes with the exact multiplier") {
  // min 0.5|u - c|^2 s.t. A u = b with square invertible A: lambda = -A^-T (u - c).
  const int n = 3;
  Matrix A(n, n);
  A << 2, 1, 0, 0, 1, -1, 1, 0, 3;
  Vector b(n), c(n);
  b << 1, 2, 3;
  c << -1, 0.5, 2;

  ParametricNlp nlp;
  nlp.n_w = n;
  nlp.n_a = n;
  nlp.n_f = n;
  nlp.cost = [c](const Vector& w, const Vector&, const Vector&) {
    return 0.5 * (w - c).squaredNorm();
  };
  nlp.cost_grad = [c](const Vector& w, const Vector&, const Vector&) { return Vector(w - c); };
  nlp.eq = [A, b](const Vector& w, const Vector&, const Vector&) { return Vector(A * w - b); };
  nlp.ineq = [](const Vector&, const Vector&, const Vector&) { return Vector(0); };
  nlp.eq_jac = [A, n](const Vector&, const Vector&, const Vector&) {
    return SparseMatrix(A.sparseView());
  };
  nlp.ineq_jac = [n](const Vector&, const Vector&, const Vector&) { return SparseMatrix(0, n); };
  nlp.lag_hess = [n](const Vector&, const Vector&, const Vector&, const Vector&, const Vector&) {
    SparseMatrix h(n, n);
    h.setIdentity();
    return h;
  };

  Vector w = A.fullPivLu().solve(b);
  PrimalDualPoint z;
  z.w = w;
  z.lambda = -A.transpose().fullPivLu().solve(Vector(w - c));
  z.mu = Vector(0);
  Vector r = assemble_residual(nlp, z, Vector(0), Vector(0), Vector::Zero(n), 1e-2);
  CHECK(r.head(n).lpNorm<Eigen::Infinity>() <= 1e-12);
  CHECK(r.segment(n, n).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("1-D closed-form roots across the tau sweep") {
  ParametricNlp lower = toys::quad_1d_lower();
  ParametricNlp upper = toys::quad_1d_upper();
  SolverOptions tight;
  tight.tol = 1e-13;  // 1e-10 in the root needs a residual well below it
  double prev_upper = 0.0;
  for (double tau : {1e-1, 1e-2, 1e-3}) {
    SolveResult a = solve_nlp(lower, Vector(0), Vector(0), Vector::Zero(1), tau, tight);
    REQUIRE(a.report.converged);
    CHECK(std::abs(a.z.w[0] - lower_root(tau)) <= 1e-10);

    SolveResult b = solve_nlp(upper, Vector(0), Vector(0), Vector::Zero(1), tau, tight);
    REQUIRE(b.report.converged);
    CHECK(std::abs(b.z.w[0] - upper_root(tau)) <= 1e-10);
    CHECK(b.z.w[0] > prev_upper);  // monotone approach to the bound
    prev_upper = b.z.w[0];
    CHECK(1.0 - b.z.w[0] == doctest::Approx(tau).epsilon(0.15));  // gap ~ tau to first order
  }
}

TEST_CASE("unconstrained quadratic solves exactly") {
  ParametricNlp nlp = toys::unconstrained_gaussian(2);
  Vector c(2);
  c << 1.0, 2.0;
  SolveResult res = solve_nlp(nlp, Vector(0), c, Vector::Zero(2), 1e-2);
  REQUIRE(res.report.converged);
  CHECK((res.z.w - c).lpNorm<Eigen::Infinity>() <= 1e-12);
  CHECK(res.z.lambda.size() == 0);
  CHECK(res.z.mu.size() == 0);
}

TEST_CASE("relaxed complementarity holds at convergence") {
  ParametricNlp nlp = toys::quad_1d_upper();
  for (double tau : {1e-1, 1e-2, 1e-3}) {
    SolveResult res = solve_nlp(nlp, Vector(0), Vector(0), Vector::Zero(1), tau);
    REQUIRE(res.report.converged);
    Vector h = nlp.ineq(res.z.w, Vector(0), Vector(0));
    for (int i = 0; i < h.size(); ++i) CHECK(std::abs(res.z.mu[i] * h[i] + tau) <= 1e-8);
    CHECK(h.maxCoeff() < 0.0);
    CHECK(res.z.mu.minCoeff() > 0.0);
  }
}

TEST_CASE("warm start skips the continuation ladder") {
  ParametricNlp nlp = toys::quad_1d_upper();
  SolveResult cold = solve_nlp(nlp, Vector(0), Vector(0), Vector::Zero(1), 1e-2);
  REQUIRE(cold.report.converged);
  Vector d(1);
  d << 1e-3;
  SolveResult warm = solve_nlp(nlp, Vector(0), Vector(0), d, 1e-2, {}, &cold.z);
  REQUIRE(warm.report.converged);
  CHECK(warm.report.iterations < cold.report.iterations);
}

TEST_CASE("iteration limit reports failure without throwing") {
  ParametricNlp nlp = toys::quad_1d_upper();
  SolverOptions opts;
  opts.tol = 1e-30;  // unreachable
  opts.max_iterations = 3;
  SolveResult res = solve_nlp(nlp, Vector(0), Vector(0), Vector::Zero(1), 1e-2, opts);
  CHECK_FALSE(res.report.converged);
  CHECK_FALSE(res.report.failure.empty());
}

TEST_CASE("duplicated equality rows trigger the flagged regularization") {
  ParametricNlp nlp;
  nlp.n_w = 2;
  nlp.n_a = 2;
  nlp.n_f = 2;
  nlp.cost = [](const Vector& w, const Vector&, const Vector&) { return 0.5 * w.squaredNorm(); };
  nlp.cost_grad = [](const Vector& w, const Vector&, const Vector&) { return w; };
  nlp.eq = [](const Vector& w, const Vector&, const Vector&) {
    Vector f(2);
    f[0] = w[0] + w[1] - 1.0;
    f[1] = w[0] + w[1] - 1.0;
    return f;
  };
  nlp.ineq = [](const Vector&, const Vector&, const Vector&) { return Vector(0); };
  nlp.eq_jac = [](const Vector&, const Vector&, const Vector&) {
    SparseMatrix j(2, 2);
    j.insert(0, 0) = 1.0;
    j.insert(0, 1) = 1.0;
    j.insert(1, 0) = 1.0;
    j.insert(1, 1) = 1.0;
    return j;
  };
  nlp.ineq_jac = [](const Vector&, const Vector&, const Vector&) { return SparseMatrix(0, 2); };
  nlp.lag_hess = [](const Vector&, const Vector&, const Vector&, const Vector&, const Vector&) {
    SparseMatrix h(2, 2);
    h.setIdentity();
    return h;
  };
  SolveResult res = solve_nlp(nlp, Vector(0), Vector(0), Vector::Zero(2), 1e-2);
  CHECK(res.report.regularized > 0);
}

TEST_CASE("regularity diagnostics on canonical shapes") {
  // Unconstrained strictly convex quadratic: SOSC positive, LICQ vacuous.
  ParametricNlp quad = toys::unconstrained_gaussian(2);
  PrimalDualPoint z;
  z.w = Vector::Zero(2);
  z.lambda = Vector(0);
  z.mu = Vector(0);
  RegularityReport rep = check_regularity(quad, z, Vector(0), Vector::Zero(2), 1e-2);
  CHECK(rep.sosc_min_eig > 0.0);
  CHECK(rep.licq_min_sv > 0.0);  // vacuous => +inf convention
  CHECK(rep.n_active == 0);

  // Duplicated inequality rows at an active point: LICQ indicator 0.
  ParametricNlp dup;
  dup.n_w = 1;
  dup.n_a = 1;
  dup.n_h = 2;
  dup.cost = [](const Vector& w, const Vector&, const Vector&) {
    return 0.5 * (w[0] - 2.0) * (w[0] - 2.0);
  };
  dup.cost_grad = [](const Vector& w, const Vector&, const Vector&) {
    Vector g(1);
    g[0] = w[0] - 2.0;
    return g;
  };
  dup.eq = [](const Vector&, const Vector&, const Vector&) { return Vector(0); };
  dup.ineq = [](const Vector& w, const Vector&, const Vector&) {
    Vector h(2);
    h[0] = w[0] - 1.0;
    h[1] = w[0] - 1.0;
    return h;
  };
  dup.eq_jac = [](const Vector&, const Vector&, const Vector&) { return SparseMatrix(0, 1); };
  dup.ineq_jac = [](const Vector&, const Vector&, const Vector&) {
    SparseMatrix j(2, 1);
    j.insert(0, 0) = 1.0;
    j.insert(1, 0) = 1.0;
    return j;
  };
  dup.lag_hess = [](const Vector&, const Vector&, const Vector&, const Vector&, const Vector&) {
    SparseMatrix h(1, 1);
    h.insert(0, 0) = 1.0;
    return h;
  };
  SolveResult res = solve_nlp(dup, Vector(0), Vector(0), Vector::Zero(1), 1e-2);
  REQUIRE(res.report.converged);
  RegularityReport rep2 = check_regularity(dup, res.z, Vector(0), Vector(0), 1e-2);
  CHECK(rep2.n_active == 2);
  CHECK(rep2.licq_min_sv == 0.0);
}

TEST_CASE("benchmark controller: derivative consistency and a full solve") {
  toys::McpFixture fx = toys::make_case1_mpc();
  Vector s(2);
  s << 0.4, -0.3;

  SolveResult res = solve_nlp(fx.nlp, s, fx.theta, Vector::Zero(2), 1e-2);
  REQUIRE(res.report.converged);
  CHECK(res.report.residual_norm <= 1e-8);

  // Callback consistency at the solved point (spec-level invariant of every
  // problem instance).
  double err = testing::check_derivatives(fx.nlp, res.z.w, s, fx.theta, res.z.lambda, res.z.mu);
  CHECK(err <= 1e-6);

  RegularityReport rep = check_regularity(fx.nlp, res.z, s, fx.theta, 1e-2);
  CHECK(rep.licq_min_sv > 0.0);
  CHECK(rep.sosc_min_eig > 0.0);

  // Relaxed complementarity across the inequality block.
  Vector h = fx.nlp.ineq(res.z.w, s, fx.theta);
  for (int i = 0; i < h.size(); ++i) CHECK(std::abs(res.z.mu[i] * h[i] + 1e-2) <= 1e-8);
}
