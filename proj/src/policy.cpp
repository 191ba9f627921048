#include "mpcrl/policy.hpp"

#include <cmath>

namespace mpcrl {

DisturbanceDensity::DisturbanceDensity(Matrix sigma_shape, double sigma_scale) {
  if (sigma_shape.rows() != sigma_shape.cols() || sigma_scale <= 0.0)
    throw std::invalid_argument("DisturbanceDensity: bad covariance");
  cov_ = sigma_scale * sigma_shape;
  Eigen::LLT<Matrix> llt(cov_);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("DisturbanceDensity: covariance not positive definite");
  chol_l_ = llt.matrixL();
  cov_inv_ = llt.solve(Matrix::Identity(cov_.rows(), cov_.cols()));
  double log_det = 0.0;
  for (int i = 0; i < chol_l_.rows(); ++i) log_det += 2.0 * std::log(chol_l_(i, i));
  log_norm_ = -0.5 * (cov_.rows() * std::log(2.0 * M_PI) + log_det);
}

Vector DisturbanceDensity::sample(RngStream& rng) const {
  return chol_l_ * rng.normal_vector(dim());
}

double DisturbanceDensity::log_density(const Vector& d) const {
  return log_norm_ - 0.5 * d.dot(cov_inv_ * d);
}

ActionSample sample_action(const ParametricNlp& nlp, const Vector& s, const Vector& theta,
                           double tau, const DisturbanceDensity& rho, RngStream& rng,
                           const PolicyOptions& opts, const PrimalDualPoint* warm) {
  if (rho.dim() != nlp.n_a) throw std::invalid_argument("sample_action: density dimension");
  ActionSample out;
  out.d = rho.sample(rng);
  SolveResult sol = solve_nlp(nlp, s, theta, out.d, tau, opts.solver, warm);
  out.report = sol.report;
  if (!sol.report.converged)
    throw PolicyFailure("policy solve failed: " + sol.report.failure, sol.report);
  out.z = std::move(sol.z);
  out.a = out.z.w.head(nlp.n_a);
  if (opts.with_score)
    out.score = score_gradient(nlp, out.z, out.d, s, theta, rho.grad_log(out.d), opts.fd_step);
  if (opts.with_log_density) {
    // The forward solution is already the reverse-parametrization solution at
    // (a, d); only the reverse sensitivity system is needed for the Jacobian.
    const ReverseSensitivities rv = reverse_sensitivities(nlp, out.z, out.d, s, theta, false);
    const double det = rv.dginv_da.determinant();
    out.log_pi = rho.log_density(out.d) + std::log(std::abs(det));
  }
  return out;
}

LogDensityResult log_density(const ParametricNlp& nlp, const Vector& a, const Vector& s,
                             const Vector& theta, double tau, const DisturbanceDensity& rho,
                             const SolverOptions& solver, const PrimalDualPoint* warm_z,
                             const Vector* warm_d) {
  if (a.size() != nlp.n_a) throw std::invalid_argument("log_density: action dimension");
  ReverseSolveResult rev = solve_reverse(nlp, a, s, theta, tau, solver, warm_z, warm_d);
  if (!rev.report.converged)
    throw PolicyFailure("log_density reverse solve failed: " + rev.report.failure, rev.report);

  const ReverseSensitivities rv = reverse_sensitivities(nlp, rev.z, rev.d, s, theta, false);
  LogDensityResult out;
  out.d = rev.d;
  out.z = std::move(rev.z);
  out.report = rev.report;
  out.det_dginv_da = rv.dginv_da.determinant();
  const double orientation = (nlp.n_a % 2 == 0) ? 1.0 : -1.0;
  if (out.det_dginv_da * orientation <= 0.0)
    throw RegularityError("log_density: inverse-map Jacobian has wrong orientation");
  out.log_pi = rho.log_density(out.d) + std::log(std::abs(out.det_dginv_da));
  return out;
}

ResamplingResult resampling_oracle(const ParametricNlp& nlp, const Vector& s, const Vector& theta,
                                   const Vector& center, const DisturbanceDensity& proposal,
                                   int n_samples, long max_draws, RngStream& rng) {
  if (nlp.n_w != nlp.n_a)
    throw std::invalid_argument("resampling_oracle: requires a static problem (n_w == n_a)");
  ResamplingResult out;
  out.samples = Matrix(n_samples, nlp.n_a);
  int accepted = 0;
  while (accepted < n_samples && out.total_draws < max_draws) {
    const Vector a = center + proposal.sample(rng);
    ++out.total_draws;
    const Vector h = nlp.n_h > 0 ? nlp.ineq(a, s, theta) : Vector();
    if (nlp.n_h == 0 || (h.array() <= 0.0).all()) {
      out.samples.row(accepted++) = a.transpose();
    }
  }
  out.samples.conservativeResize(accepted, Eigen::NoChange);
  out.acceptance_rate =
      out.total_draws > 0 ? static_cast<double>(accepted) / static_cast<double>(out.total_draws)
                          : 0.0;
  return out;
}

}  // namespace mpcrl
