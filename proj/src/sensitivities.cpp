#include "mpcrl/sensitivities.hpp"

#include <cmath>
#include <limits>

namespace mpcrl {

namespace {

double system_residual(const SparseMatrix& J, const Matrix& X, const Matrix& rhs) {
  if (X.cols() == 0) return 0.0;
  return (J * X + rhs).cwiseAbs().maxCoeff();
}

}  // namespace

ForwardSensitivities forward_sensitivities(const ParametricNlp& nlp, const PrimalDualPoint& z,
                                           const Vector& s, const Vector& theta) {
  const int n_z = nlp.n_z(), n_a = nlp.n_a;
  const SparseMatrix J = assemble_kkt_jacobian(nlp, z, s, theta);
  KktSolver lin;
  if (!lin.factorize(J, 1e-10) || lin.regularized())
    throw RegularityError("forward sensitivities: singular KKT matrix");

  Matrix dr_dd = Matrix::Zero(n_z, n_a);
  dr_dd.topLeftCorner(n_a, n_a).setIdentity();
  const Matrix dr_dtheta = assemble_theta_jacobian(nlp, z, s, theta);

  ForwardSensitivities out;
  out.dz_dd = lin.solve(Matrix(-dr_dd));
  out.dz_dtheta = nlp.n_theta > 0 ? lin.solve(Matrix(-dr_dtheta)) : Matrix::Zero(n_z, 0);
  out.dg_dd = out.dz_dd.topRows(n_a);
  out.dg_dtheta = out.dz_dtheta.topRows(n_a);
  out.ift_residual = std::max(system_residual(J, out.dz_dd, dr_dd),
                              system_residual(J, out.dz_dtheta, dr_dtheta));
  if (!out.dz_dd.allFinite() || !out.dz_dtheta.allFinite())
    throw RegularityError("forward sensitivities: non-finite solution");
  return out;
}

ReverseSensitivities reverse_sensitivities(const ParametricNlp& nlp, const PrimalDualPoint& z,
                                           const Vector& d, const Vector& s, const Vector& theta,
                                           bool second_order, double fd_step) {
  const int n_z = nlp.n_z(), n_a = nlp.n_a, n_w = nlp.n_w, n_f = nlp.n_f, n_h = nlp.n_h;
  const int n_rest = n_w - n_a;
  (void)d;  // the FONC Jacobians do not depend on the disturbance (it enters affinely)

  SparseMatrix Jt;
  Matrix B;  // dr/du0: the displaced columns
  detail::reverse_kkt(nlp, z.w, z.lambda, z.mu, s, theta, &Jt, &B);
  KktSolver lin;
  if (!lin.factorize(Jt, 1e-10) || lin.regularized())
    throw RegularityError("reverse sensitivities: singular KKT matrix");

  const Matrix dr_dtheta = assemble_theta_jacobian(nlp, z, s, theta);

  ReverseSensitivities out;
  out.dzt_da = lin.solve(Matrix(-B));
  out.dzt_dtheta = nlp.n_theta > 0 ? lin.solve(Matrix(-dr_dtheta)) : Matrix::Zero(n_z, 0);
  out.dginv_da = out.dzt_da.topRows(n_a);
  out.dginv_dtheta = out.dzt_dtheta.topRows(n_a);
  out.ift_residual = std::max(system_residual(Jt, out.dzt_da, B),
                              system_residual(Jt, out.dzt_dtheta, dr_dtheta));
  if (!out.dzt_da.allFinite() || !out.dzt_dtheta.allFinite())
    throw RegularityError("reverse sensitivities: non-finite solution");

  if (second_order && nlp.n_theta > 0) {
    out.d2ginv_dtheta_da.reserve(nlp.n_theta);
    const double h = fd_step;
    for (int i = 0; i < nlp.n_theta; ++i) {
      // Directional derivative of (Jt, B) along (dzt/dtheta_i, e_i): the
      // total theta_i-derivative of the reverse system matrices.
      const Vector delta = out.dzt_dtheta.col(i);
      Vector w_p = z.w, w_m = z.w;
      w_p.tail(n_rest) += h * delta.segment(n_a, n_rest);
      w_m.tail(n_rest) -= h * delta.segment(n_a, n_rest);
      const Vector l_p = z.lambda + h * delta.segment(n_w, n_f);
      const Vector l_m = z.lambda - h * delta.segment(n_w, n_f);
      const Vector m_p = z.mu + h * delta.tail(n_h);
      const Vector m_m = z.mu - h * delta.tail(n_h);
      Vector th_p = theta, th_m = theta;
      th_p[i] += h;
      th_m[i] -= h;

      SparseMatrix Jt_p, Jt_m;
      Matrix B_p, B_m;
      detail::reverse_kkt(nlp, w_p, l_p, m_p, s, th_p, &Jt_p, &B_p);
      detail::reverse_kkt(nlp, w_m, l_m, m_m, s, th_m, &Jt_m, &B_m);
      const Matrix T = ((Jt_p - Jt_m) * out.dzt_da + (B_p - B_m)) / (2.0 * h);
      const Matrix X = lin.solve(Matrix(-T));
      out.d2ginv_dtheta_da.push_back(X.topRows(n_a));
    }
  }
  return out;
}

ScoreGradient score_gradient(const ParametricNlp& nlp, const PrimalDualPoint& z, const Vector& d,
                             const Vector& s, const Vector& theta, const Vector& grad_log_rho,
                             double fd_step) {
  const int n_a = nlp.n_a, n_theta = nlp.n_theta;
  const ForwardSensitivities fw = forward_sensitivities(nlp, z, s, theta);
  const ReverseSensitivities rv =
      reverse_sensitivities(nlp, z, d, s, theta, /*second_order=*/true, fd_step);

  ScoreGradient out;
  out.trace_term = Vector::Zero(n_theta);
  for (int i = 0; i < n_theta; ++i)
    out.trace_term[i] = (fw.dg_dd * rv.d2ginv_dtheta_da[i]).trace();

  Eigen::JacobiSVD<Matrix> svd(fw.dg_dd, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  out.min_sv_dgdd = sv[sv.size() - 1];

  // y = (dg/dd)^{-T} grad_log_rho, pseudo-inverse only if the direct solve
  // is numerically singular (relative singular-value cutoff 1e-10).
  Vector y;
  if (out.min_sv_dgdd > 1e-10 * sv[0]) {
    y = Eigen::PartialPivLU<Matrix>(fw.dg_dd.transpose()).solve(grad_log_rho);
  } else {
    out.used_pinv = true;
    // dg_dd = U S V', so dg_dd' y = g has the least-squares solution U S^+ V' g.
    Vector vt = svd.matrixV().transpose() * grad_log_rho;
    Vector scaled = Vector::Zero(n_a);
    for (int i = 0; i < sv.size(); ++i)
      if (sv[i] > 1e-10 * sv[0]) scaled[i] = vt[i] / sv[i];
    y = svd.matrixU() * scaled;
  }
  out.density_term = fw.dg_dtheta.transpose() * y;
  out.grad = out.trace_term - out.density_term;
  return out;
}

}  // namespace mpcrl
