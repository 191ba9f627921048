#pragma once

#include <vector>

#include "mpcrl/types.hpp"

namespace mpcrl {

// One closed-loop transition with everything the actor-critic needs.
struct TransitionRecord {
  Vector s;
  Vector d;       // policy disturbance actually drawn
  Vector a;
  Vector s_plus;
  double stage_cost = 0.0;
  Vector score;   // grad_theta log pi(a|s), empty if not computed
  int episode = 0;
  int step = 0;
};

// Quadratic monomial features [1, s, upper triangle of s s'] in row-major
// upper-triangle order: for n = 2, [1, s1, s2, s1^2, s1 s2, s2^2].
Vector critic_features(const Vector& s);
int critic_feature_dim(int n);

struct ValueWeights {
  Vector v;
  double min_sv = 0.0;   // smallest singular value of the LSTD matrix
  int rank = 0;
  bool degenerate = false;
};

// Batch LSTD: solve sum_k phi(s_k)(L_k + gamma phi(s+_k)'v - phi(s_k)'v) = 0
// in the minimum-norm least-squares sense (SVD cutoff relative to the largest
// singular value).
ValueWeights lstd_fit(const std::vector<TransitionRecord>& batch, double gamma,
                      double sv_cutoff = 1e-10);

// Same solve with caller-provided features (tabular test oracles use this).
ValueWeights lstd_fit_features(const std::vector<Vector>& phi, const std::vector<Vector>& phi_plus,
                               const std::vector<double>& cost, double gamma,
                               double sv_cutoff = 1e-10);

double value_of(const ValueWeights& vw, const Vector& s);

// delta = L + gamma V(s+) - V(s).
double td_error(const ValueWeights& vw, double gamma, const TransitionRecord& rec);

}  // namespace mpcrl
