#pragma once

#include <vector>

#include "mpcrl/ip_solver.hpp"
#include "mpcrl/nlp.hpp"
#include "mpcrl/types.hpp"

namespace mpcrl {

// Implicit-function sensitivities of the relaxed solution z(s, theta, d):
//   dr/dz dz/dd = -dr/dd,   dr/dz dz/dtheta = -dr/dtheta.
// The action map g = u0 component is the leading n_a rows.
struct ForwardSensitivities {
  Matrix dz_dd;               // n_z x n_a
  Matrix dz_dtheta;           // n_z x n_theta
  Matrix dg_dd;               // n_a x n_a
  Matrix dg_dtheta;           // n_a x n_theta
  double ift_residual = 0.0;  // worst inf-norm of J X + rhs over both systems
};

ForwardSensitivities forward_sensitivities(const ParametricNlp& nlp, const PrimalDualPoint& z,
                                           const Vector& s, const Vector& theta);

// Sensitivities in the reverse parametrization zt = {d, w_rest, lambda, mu}
// holding u0 = a fixed: the u0 columns of the KKT matrix move to the
// right-hand side and the d columns (identity on the u0 rows) take their
// place. The leading n_a rows of dzt/da are the inverse-map Jacobian
// dg^{-1}/da; second-order blocks d/dtheta_i [dg^{-1}/da] are obtained by
// re-solving against a directional derivative of the Jacobian assembly
// (central difference of exact Jacobians, step fd_step).
struct ReverseSensitivities {
  Matrix dzt_da;                         // n_z x n_a
  Matrix dzt_dtheta;                     // n_z x n_theta
  Matrix dginv_da;                       // n_a x n_a
  Matrix dginv_dtheta;                   // n_a x n_theta
  std::vector<Matrix> d2ginv_dtheta_da;  // n_theta blocks, n_a x n_a (empty unless requested)
  double ift_residual = 0.0;
};

ReverseSensitivities reverse_sensitivities(const ParametricNlp& nlp, const PrimalDualPoint& z,
                                           const Vector& d, const Vector& s, const Vector& theta,
                                           bool second_order = false, double fd_step = 1e-6);

// Exact score gradient of the disturbed-policy density at (s, a):
//   grad_theta log pi = m - ( rho^{-1} drho/dd (dg/dd)^{-1} dg/dtheta )'
// with m_i = Tr( dg/dd * d/dtheta_i [dg^{-1}/da] ). grad_log_rho is the
// gradient of log rho at the recovered disturbance d.
struct ScoreGradient {
  Vector grad;          // n_theta
  Vector trace_term;    // m
  Vector density_term;  // the transposed product; grad = trace_term - density_term
  bool used_pinv = false;
  double min_sv_dgdd = 0.0;
};

ScoreGradient score_gradient(const ParametricNlp& nlp, const PrimalDualPoint& z, const Vector& d,
                             const Vector& s, const Vector& theta, const Vector& grad_log_rho,
                             double fd_step = 1e-6);

}  // namespace mpcrl
