#pragma once

#include <algorithm>
#include <cmath>

#include "mpcrl/nlp.hpp"

namespace mpcrl::testing {

// Max relative deviation between a dense matrix and a reference, with an
// absolute floor so zero blocks compare cleanly.
inline double rel_err(const Matrix& got, const Matrix& want) {
  const double scale = std::max(1.0, want.cwiseAbs().maxCoeff());
  return (got - want).cwiseAbs().maxCoeff() / scale;
}

inline double rel_err(const Vector& got, const Vector& want) {
  const double scale = std::max(1.0, want.size() ? want.cwiseAbs().maxCoeff() : 0.0);
  return (got - want).cwiseAbs().maxCoeff() / scale;
}

// Central finite differences of every derivative callback against its value
// callback at (w, s, theta, lambda, mu). Returns the worst relative error.
inline double check_derivatives(const ParametricNlp& nlp, const Vector& w, const Vector& s,
                                const Vector& theta, const Vector& lambda, const Vector& mu,
                                double step = 1e-6) {
  double worst = 0.0;

  // cost_grad vs cost
  {
    Vector fd(nlp.n_w);
    for (int i = 0; i < nlp.n_w; ++i) {
      Vector wp = w, wm = w;
      wp[i] += step;
      wm[i] -= step;
      fd[i] = (nlp.cost(wp, s, theta) - nlp.cost(wm, s, theta)) / (2 * step);
    }
    worst = std::max(worst, rel_err(fd, Vector(nlp.cost_grad(w, s, theta))));
  }

  // eq_jac vs eq, ineq_jac vs ineq
  auto check_jac = [&](const ParametricNlp::VectorFn& fn, const ParametricNlp::JacFn& jac,
                       int rows) {
    if (rows == 0) return;
    Matrix fd(rows, nlp.n_w);
    for (int i = 0; i < nlp.n_w; ++i) {
      Vector wp = w, wm = w;
      wp[i] += step;
      wm[i] -= step;
      fd.col(i) = (fn(wp, s, theta) - fn(wm, s, theta)) / (2 * step);
    }
    worst = std::max(worst, rel_err(fd, Matrix(jac(w, s, theta))));
  };
  check_jac(nlp.eq, nlp.eq_jac, nlp.n_f);
  check_jac(nlp.ineq, nlp.ineq_jac, nlp.n_h);

  // lag_hess vs gradient of the Lagrangian
  auto grad_lag = [&](const Vector& wp) {
    Vector g = nlp.cost_grad(wp, s, theta);
    if (nlp.n_f > 0) g += SparseMatrix(nlp.eq_jac(wp, s, theta)).transpose() * lambda;
    if (nlp.n_h > 0) g += SparseMatrix(nlp.ineq_jac(wp, s, theta)).transpose() * mu;
    return g;
  };
  {
    Matrix fd(nlp.n_w, nlp.n_w);
    for (int i = 0; i < nlp.n_w; ++i) {
      Vector wp = w, wm = w;
      wp[i] += step;
      wm[i] -= step;
      fd.col(i) = (grad_lag(wp) - grad_lag(wm)) / (2 * step);
    }
    worst = std::max(worst, rel_err(fd, Matrix(nlp.lag_hess(w, s, theta, lambda, mu))));
  }

  // theta-jacobians vs theta finite differences
  if (nlp.n_theta > 0 && nlp.stat_theta_jac) {
    Matrix fd_stat(nlp.n_w, nlp.n_theta);
    Matrix fd_eq(nlp.n_f, nlp.n_theta);
    Matrix fd_ineq(nlp.n_h, nlp.n_theta);
    for (int i = 0; i < nlp.n_theta; ++i) {
      Vector tp = theta, tm = theta;
      tp[i] += step;
      tm[i] -= step;
      auto grad_lag_t = [&](const Vector& th) {
        Vector g = nlp.cost_grad(w, s, th);
        if (nlp.n_f > 0) g += SparseMatrix(nlp.eq_jac(w, s, th)).transpose() * lambda;
        if (nlp.n_h > 0) g += SparseMatrix(nlp.ineq_jac(w, s, th)).transpose() * mu;
        return g;
      };
      fd_stat.col(i) = (grad_lag_t(tp) - grad_lag_t(tm)) / (2 * step);
      if (nlp.n_f > 0) fd_eq.col(i) = (nlp.eq(w, s, tp) - nlp.eq(w, s, tm)) / (2 * step);
      if (nlp.n_h > 0) fd_ineq.col(i) = (nlp.ineq(w, s, tp) - nlp.ineq(w, s, tm)) / (2 * step);
    }
    worst = std::max(worst, rel_err(fd_stat, nlp.stat_theta_jac(w, s, theta, lambda, mu)));
    if (nlp.n_f > 0) worst = std::max(worst, rel_err(fd_eq, nlp.eq_theta_jac(w, s, theta)));
    if (nlp.n_h > 0) worst = std::max(worst, rel_err(fd_ineq, nlp.ineq_theta_jac(w, s, theta)));
  }

  return worst;
}

}  // namespace mpcrl::testing
