#pragma once

#include <cmath>

#include "mpcrl/experiment.hpp"
#include "mpcrl/nlp.hpp"
#include "mpcrl/robust_mpc.hpp"

namespace mpcrl::toys {

// min 0.5 |u - c|^2 + d'u, no constraints, theta = c. Closed form g(d) = c - d.
inline ParametricNlp unconstrained_gaussian(int n) {
  ParametricNlp nlp;
  nlp.n_w = n;
  nlp.n_a = n;
  nlp.n_theta = n;
  nlp.cost = [](const Vector& w, const Vector&, const Vector& th) {
    return 0.5 * (w - th).squaredNorm();
  };
  nlp.cost_grad = [](const Vector& w, const Vector&, const Vector& th) { return Vector(w - th); };
  nlp.eq = [](const Vector&, const Vector&, const Vector&) { return Vector(0); };
  nlp.ineq = [](const Vector&, const Vector&, const Vector&) { return Vector(0); };
  nlp.eq_jac = [n](const Vector&, const Vector&, const Vector&) { return SparseMatrix(0, n); };
  nlp.ineq_jac = [n](const Vector&, const Vector&, const Vector&) { return SparseMatrix(0, n); };
  nlp.lag_hess = [n](const Vector&, const Vector&, const Vector&, const Vector&, const Vector&) {
    SparseMatrix h(n, n);
    h.setIdentity();
    return h;
  };
  nlp.stat_theta_jac = [n](const Vector&, const Vector&, const Vector&, const Vector&,
                           const Vector&) { return Matrix(-Matrix::Identity(n, n)); };
  nlp.eq_theta_jac = [n](const Vector&, const Vector&, const Vector&) { return Matrix(0, n); };
  nlp.ineq_theta_jac = [n](const Vector&, const Vector&, const Vector&) { return Matrix(0, n); };
  return nlp;
}

// min 0.5 u^2 + d u  s.t.  -u - 1 <= 0.  Relaxed root at d = 0:
// u(u + 1) = tau, u = (-1 + sqrt(1 + 4 tau)) / 2.
inline ParametricNlp quad_1d_lower() {
  ParametricNlp nlp;
  nlp.n_w = 1;
  nlp.n_a = 1;
  nlp.n_h = 1;
  nlp.cost = [](const Vector& w, const Vector&, const Vector&) { return 0.5 * w[0] * w[0]; };
  nlp.cost_grad = [](const Vector& w, const Vector&, const Vector&) { return w; };
  nlp.eq = [](const Vector&, const Vector&, const Vector&) { return Vector(0); };
  nlp.ineq = [](const Vector& w, const Vector&, const Vector&) {
    Vector h(1);
    h[0] = -w[0] - 1.0;
    return h;
  };
  nlp.eq_jac = [](const Vector&, const Vector&, const Vector&) { return SparseMatrix(0, 1); };
  nlp.ineq_jac = [](const Vector&, const Vector&, const Vector&) {
    SparseMatrix j(1, 1);
    j.insert(0, 0) = -1.0;
    return j;
  };
  nlp.lag_hess = [](const Vector&, const Vector&, const Vector&, const Vector&, const Vector&) {
    SparseMatrix h(1, 1);
    h.insert(0, 0) = 1.0;
    return h;
  };
  return nlp;
}

// min 0.5 (u - c)^2 + d u  s.t.  u - ub <= 0, theta = (c, ub). With c = 2,
// ub = 1, d = 0: (u - 2)(u - 1) = tau, u = (3 - sqrt(1 + 4 tau)) / 2.
inline ParametricNlp quad_1d_upper(double c_default = 2.0, double ub_default = 1.0) {
  ParametricNlp nlp;
  nlp.n_w = 1;
  nlp.n_a = 1;
  nlp.n_h = 1;
  nlp.n_theta = 2;
  auto params = [c_default, ub_default](const Vector& th) {
    if (th.size() == 2) return std::pair<double, double>(th[0], th[1]);
    return std::pair<double, double>(c_default, ub_default);
  };
  nlp.cost = [params](const Vector& w, const Vector&, const Vector& th) {
    const double c = params(th).first;
    return 0.5 * (w[0] - c) * (w[0] - c);
  };
  nlp.cost_grad = [params](const Vector& w, const Vector&, const Vector& th) {
    Vector g(1);
    g[0] = w[0] - params(th).first;
    return g;
  };
  nlp.eq = [](const Vector&, const Vector&, const Vector&) { return Vector(0); };
  nlp.ineq = [params](const Vector& w, const Vector&, const Vector& th) {
    Vector h(1);
    h[0] = w[0] - params(th).second;
    return h;
  };
  nlp.eq_jac = [](const Vector&, const Vector&, const Vector&) { return SparseMatrix(0, 1); };
  nlp.ineq_jac = [](const Vector&, const Vector&, const Vector&) {
    SparseMatrix j(1, 1);
    j.insert(0, 0) = 1.0;
    return j;
  };
  nlp.lag_hess = [](const Vector&, const Vector&, const Vector&, const Vector&, const Vector&) {
    SparseMatrix h(1, 1);
    h.insert(0, 0) = 1.0;
    return h;
  };
  nlp.stat_theta_jac = [](const Vector&, const Vector&, const Vector&, const Vector&,
                          const Vector&) {
    Matrix m(1, 2);
    m << -1.0, 0.0;
    return m;
  };
  nlp.eq_theta_jac = [](const Vector&, const Vector&, const Vector&) { return Matrix(0, 2); };
  nlp.ineq_theta_jac = [](const Vector&, const Vector&, const Vector&) {
    Matrix m(1, 2);
    m << 0.0, -1.0;
    return m;
  };
  nlp.initial_primal = [params](const Vector&, const Vector& th) {
    Vector w0(1);
    w0[0] = params(th).second - 0.5;  // strictly inside the bound
    return w0;
  };
  return nlp;
}

// min 0.5 |u - c|^2 + d'u  s.t.  |u|^2 - r2 <= 0, theta = (c1, c2, r2).
// The center enters only the cost; the radius enters only the constraint.
inline ParametricNlp disk_toy(double c1_default = 0.0, double c2_default = 0.0,
                              double r2_default = 1.0) {
  ParametricNlp nlp;
  nlp.n_w = 2;
  nlp.n_a = 2;
  nlp.n_h = 1;
  nlp.n_theta = 3;
  auto center = [c1_default, c2_default](const Vector& th) {
    Vector c(2);
    if (th.size() == 3) c << th[0], th[1];
    else c << c1_default, c2_default;
    return c;
  };
  auto radius2 = [r2_default](const Vector& th) {
    return th.size() == 3 ? th[2] : r2_default;
  };
  nlp.cost = [center](const Vector& w, const Vector&, const Vector& th) {
    return 0.5 * (w - center(th)).squaredNorm();
  };
  nlp.cost_grad = [center](const Vector& w, const Vector&, const Vector& th) {
    return Vector(w - center(th));
  };
  nlp.eq = [](const Vector&, const Vector&, const Vector&) { return Vector(0); };
  nlp.ineq = [radius2](const Vector& w, const Vector&, const Vector& th) {
    Vector h(1);
    h[0] = w.squaredNorm() - radius2(th);
    return h;
  };
  nlp.eq_jac = [](const Vector&, const Vector&, const Vector&) { return SparseMatrix(0, 2); };
  nlp.ineq_jac = [](const Vector& w, const Vector&, const Vector&) {
    SparseMatrix j(1, 2);
    j.insert(0, 0) = 2.0 * w[0];
    j.insert(0, 1) = 2.0 * w[1];
    return j;
  };
  nlp.lag_hess = [](const Vector&, const Vector&, const Vector&, const Vector&,
                    const Vector& mu) {
    SparseMatrix h(2, 2);
    const double diag = 1.0 + 2.0 * mu[0];
    h.insert(0, 0) = diag;
    h.insert(1, 1) = diag;
    return h;
  };
  nlp.stat_theta_jac = [](const Vector&, const Vector&, const Vector&, const Vector&,
                          const Vector&) {
    Matrix m = Matrix::Zero(2, 3);
    m(0, 0) = -1.0;
    m(1, 1) = -1.0;
    return m;
  };
  nlp.eq_theta_jac = [](const Vector&, const Vector&, const Vector&) { return Matrix(0, 3); };
  nlp.ineq_theta_jac = [](const Vector&, const Vector&, const Vector&) {
    Matrix m = Matrix::Zero(1, 3);
    m(0, 2) = -1.0;
    return m;
  };
  return nlp;
}

// The benchmark controller with its initial parameters, shared by many tests.
struct McpFixture {
  MpcConfig cfg;
  ParametricNlp nlp;
  Vector theta;
  ExperimentConfig exp_cfg;
};

inline McpFixture make_case1_mpc() {
  McpFixture fx;
  fx.exp_cfg = config_for_case(1);
  fx.cfg.N = fx.exp_cfg.horizon;
  fx.cfg.n_branch = fx.exp_cfg.n_branch;
  fx.nlp = build_scenario_nlp(fx.cfg);
  fx.theta = initial_policy(fx.exp_cfg).flatten();
  return fx;
}

}  // namespace mpcrl::toys
