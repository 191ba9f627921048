#pragma once

#include <deque>
#include <vector>

#include "mpcrl/env_sim.hpp"
#include "mpcrl/ip_solver.hpp"
#include "mpcrl/robust_mpc.hpp"

namespace mpcrl {

struct GradientEstimate {
  Vector grad;           // episode-mean of the summed score * td_error
  double j_hat = 0.0;    // mean discounted episode cost
  double j_std = 0.0;    // sample std over episodes
  int n_episodes = 0;    // untruncated episodes used
  int n_transitions = 0;
};

// Score-function policy gradient with the TD error as the per-transition
// weight. Truncated episodes are excluded. Throws if a used record lacks a
// score vector.
GradientEstimate estimate_policy_gradient(const std::vector<EpisodeTrace>& batch,
                                          const ValueWeights& vw, double gamma);

struct MembershipResult {
  bool inside = false;
  Vector weights;  // convex weights when inside, else empty
  double gap = 0.0;  // phase-1 infeasibility (0 when inside); ranks violations
};

// Is `residual` in the convex hull of the columns of `vertices`? Phase-1
// simplex with Bland's rule on [W; 1'] theta = [r; 1], theta >= 0.
MembershipResult membership_check(const Vector& residual, const Matrix& vertices,
                                  double tol = 1e-9);

inline MembershipResult membership_check(const Vector& residual,
                                         const std::vector<Vector>& vertices, double tol = 1e-9) {
  Matrix cols(residual.size(), static_cast<Eigen::Index>(vertices.size()));
  for (size_t i = 0; i < vertices.size(); ++i) cols.col(static_cast<Eigen::Index>(i)) = vertices[i];
  return membership_check(residual, cols, tol);
}

// One observed transition the updated model must keep explainable.
struct ConstraintData {
  Vector s;
  Vector a;
  Vector s_plus;
};

struct SafeUpdateOptions {
  double tau_final = 1e-9;
  double tol = 1e-10;
  double retry_tol = 1e-8;
  int max_iterations = 200;
  int max_rounds = 10;      // outer working-set rounds
  int max_additions = 32;   // violating records admitted per round
};

struct SafeUpdateResult {
  Vector theta;
  bool accepted = false;
  SolverReport report;
};

// min 0.5 |theta - theta_prev|^2 + alpha grad' (theta - theta_prev)
// s.t. every recorded s_plus - F0(s, a, theta) lies in the convex hull of the
// updated vertex set {W^i(theta)}. Decision variables: theta plus one convex
// weight column per transition; the hull constraint is bilinear in (theta,
// weights). Solved by working-set generation: only the extreme residuals
// enter the NLP, every record is re-certified at the solution, and violators
// are admitted until the whole dataset passes. Rejection keeps theta_prev.
SafeUpdateResult safe_update(const Vector& theta_prev, const Vector& grad, double alpha,
                             const std::deque<ConstraintData>& dataset, const MpcConfig& cfg,
                             const SafeUpdateOptions& opts = {});

// The update NLP itself, exposed for oracle tests. Layout: w = [theta;
// weights column-major], equalities per transition are the n residual rows
// followed by the weight-sum row, inequalities are -weights.
ParametricNlp build_safe_update_nlp(const Vector& theta_prev, const Vector& grad, double alpha,
                                    const std::deque<ConstraintData>& dataset,
                                    const MpcConfig& cfg);

}  // namespace mpcrl
