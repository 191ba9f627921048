#pragma once

#include <functional>
#include <stdexcept>
#include <string>

#include "mpcrl/types.hpp"

namespace mpcrl {

// Parametric NLP
//
//   min_w  Phi(w, s, theta) + d' u0     s.t.  f(w, s, theta) = 0,
//                                             h(w, s, theta) <= 0,
//
// where u0 is the leading n_a entries of w (the first input of a predictive
// controller, or all of w for a static problem) and d is a gradient
// disturbance confined to the u0 rows. The solver replaces complementarity
// with the interior relaxation mu_i h_i + tau = 0, mu > 0, h < 0.
//
// Callbacks receive the flattened parameter vector theta; problems without
// learnable parameters may leave the theta-derivative callbacks empty.
struct ParametricNlp {
  int n_w = 0;      // decision variables, u0 first
  int n_f = 0;      // equality constraints
  int n_h = 0;      // inequality constraints
  int n_a = 0;      // action dimension (leading block of w)
  int n_theta = 0;  // learnable parameters

  using ValueFn = std::function<double(const Vector& w, const Vector& s, const Vector& theta)>;
  using VectorFn = std::function<Vector(const Vector& w, const Vector& s, const Vector& theta)>;
  using JacFn = std::function<SparseMatrix(const Vector& w, const Vector& s, const Vector& theta)>;
  using HessFn = std::function<SparseMatrix(const Vector& w, const Vector& s, const Vector& theta,
                                            const Vector& lambda, const Vector& mu)>;
  using StatThetaFn = std::function<Matrix(const Vector& w, const Vector& s, const Vector& theta,
                                           const Vector& lambda, const Vector& mu)>;
  using VecThetaFn = std::function<Matrix(const Vector& w, const Vector& s, const Vector& theta)>;
  using InitFn = std::function<Vector(const Vector& s, const Vector& theta)>;

  ValueFn cost;          // Phi (without the d'u0 disturbance; the solver adds it)
  VectorFn cost_grad;    // d Phi / d w                    (n_w)
  VectorFn eq;           // f                              (n_f)
  VectorFn ineq;         // h                              (n_h)
  JacFn eq_jac;          // df/dw                          (n_f x n_w)
  JacFn ineq_jac;        // dh/dw                          (n_h x n_w)
  // Hessian of the Lagrangian Phi + lambda'f + mu'h with respect to w.
  HessFn lag_hess;       //                                (n_w x n_w)

  // theta-derivatives (dense; empty callbacks mean identically zero):
  StatThetaFn stat_theta_jac;  // d/dtheta [grad_w Phi + (df/dw)'lambda + (dh/dw)'mu]  (n_w x n_theta)
  VecThetaFn eq_theta_jac;     // df/dtheta                                            (n_f x n_theta)
  VecThetaFn ineq_theta_jac;   // dh/dtheta                                            (n_h x n_theta)

  // Cold-start primal guess; must be strictly interior in h. Defaults to zeros.
  InitFn initial_primal;

  int n_z() const { return n_w + n_f + n_h; }
};

// Primal-dual point z = {w, lambda, mu}.
struct PrimalDualPoint {
  Vector w;
  Vector lambda;
  Vector mu;

  Vector stacked() const {
    Vector z(w.size() + lambda.size() + mu.size());
    z << w, lambda, mu;
    return z;
  }
};

struct SolverReport {
  bool converged = false;
  int iterations = 0;           // accepted Newton steps, all continuation stages
  double residual_norm = 0.0;   // final inf-norm of the relaxed FONC residual
  double tau = 0.0;             // relaxation actually used
  int regularized = 0;          // factorizations that needed the 1e-10 diagonal bump
  std::string failure;          // empty on success
};

// Thrown when an evaluation point violates the strict interior (h < 0, mu > 0).
class InteriorityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Thrown when a sensitivity system is singular at the solution.
class RegularityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Thrown when the policy cannot produce an action (solver failure / infeasible).
class PolicyFailure : public std::runtime_error {
 public:
  PolicyFailure(const std::string& what, SolverReport report_)
      : std::runtime_error(what), report(std::move(report_)) {}
  SolverReport report;
};

}  // namespace mpcrl
