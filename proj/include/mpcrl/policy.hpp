#pragma once

#include <optional>

#include "mpcrl/ip_solver.hpp"
#include "mpcrl/rng.hpp"
#include "mpcrl/sensitivities.hpp"
#include "mpcrl/types.hpp"

namespace mpcrl {

// Zero-mean Gaussian disturbance density with covariance sigma * Sigma.
class DisturbanceDensity {
 public:
  DisturbanceDensity(Matrix sigma_shape, double sigma_scale);

  int dim() const { return static_cast<int>(cov_.rows()); }
  const Matrix& covariance() const { return cov_; }

  Vector sample(RngStream& rng) const;
  double log_density(const Vector& d) const;
  double density(const Vector& d) const { return std::exp(log_density(d)); }
  Vector grad_log(const Vector& d) const { return -cov_inv_ * d; }

 private:
  Matrix cov_;
  Matrix chol_l_;
  Matrix cov_inv_;
  double log_norm_ = 0.0;
};

struct PolicyOptions {
  SolverOptions solver;
  bool with_score = true;        // exact score gradient at the sampled pair
  bool with_log_density = false; // adds one reverse-system factorization
  double fd_step = 1e-6;
};

struct ActionSample {
  Vector a;
  Vector d;
  PrimalDualPoint z;
  SolverReport report;
  std::optional<ScoreGradient> score;
  std::optional<double> log_pi;
};

// Draw d ~ rho, solve the disturbed problem, return the first input. Throws
// PolicyFailure when the solver does not converge (infeasible state etc.).
ActionSample sample_action(const ParametricNlp& nlp, const Vector& s, const Vector& theta,
                           double tau, const DisturbanceDensity& rho, RngStream& rng,
                           const PolicyOptions& opts = {},
                           const PrimalDualPoint* warm = nullptr);

struct LogDensityResult {
  double log_pi = 0.0;
  Vector d;                   // recovered disturbance g^{-1}(a)
  double det_dginv_da = 0.0;  // sign must be (-1)^{n_a}
  PrimalDualPoint z;
  SolverReport report;
};

// Change of variables through the action map:
//   log pi(a|s) = log rho(g^{-1}(a)) + log |det dg^{-1}/da|.
// Solves the reverse parametrization to recover d, then the reverse
// sensitivity system for the Jacobian determinant. The determinant
// orientation is gated: dg/dd is negative definite, so sign(det) = (-1)^{n_a}.
LogDensityResult log_density(const ParametricNlp& nlp, const Vector& a, const Vector& s,
                             const Vector& theta, double tau, const DisturbanceDensity& rho,
                             const SolverOptions& solver = {},
                             const PrimalDualPoint* warm_z = nullptr,
                             const Vector* warm_d = nullptr);

struct ResamplingResult {
  Matrix samples;  // accepted draws, one per row
  double acceptance_rate = 0.0;
  long total_draws = 0;
};

// Rejection sampler against the feasible set of a static problem (n_w == n_a):
// draws center + proposal noise, keeps draws with h <= 0. The empirical
// truncated density is proposal.density(a - center) / acceptance_rate on the
// feasible set; used as an independent check of log_density on toy problems.
ResamplingResult resampling_oracle(const ParametricNlp& nlp, const Vector& s, const Vector& theta,
                                   const Vector& center, const DisturbanceDensity& proposal,
                                   int n_samples, long max_draws, RngStream& rng);

}  // namespace mpcrl
