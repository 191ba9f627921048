#pragma once

#include <cstdint>
#include <vector>

#include "mpcrl/critic.hpp"
#include "mpcrl/policy.hpp"
#include "mpcrl/rng.hpp"

namespace mpcrl {

// True plant x+ = A_real x + B_real u + n, noise Normal(0, noise_cov I)
// conditioned on |n| <= clip_radius by rejection. The printed parameters make
// the truncation severe (~0.37% acceptance per draw in 2-D); the measured
// acceptance is surfaced by the callers as a diagnostic.
struct PlantModel {
  Matrix A_real;
  Matrix B_real;
  double noise_cov = 1e-2 / 3.0;  // per-axis variance before clipping
  double clip_radius = 0.5e-2;
  long max_noise_draws = 2000000;  // rejection budget per step
};

// A_real = kappa [[cos b, sin b], [sin b, cos b]] (symmetric, as specified),
// B_real = diag(1.1, 0.9).
PlantModel make_plant(double kappa, double beta_deg);

Vector sample_clipped_noise(const PlantModel& plant, RngStream& rng, long* n_draws = nullptr);

Vector plant_step(const PlantModel& plant, const Vector& s, const Vector& a, const Vector& noise);

// Baseline performance criterion L = (1/20)|s - x_ref|^2 + (1/2)|a - u_ref|^2.
double stage_cost(const Vector& s, const Vector& a, const Vector& x_ref, const Vector& u_ref);

struct RolloutConfig {
  int n_steps = 20;
  double gamma = 0.99;
  double tau = 1e-2;
  Vector x_ref;
  Vector u_ref;
  PolicyOptions policy;
};

struct EpisodeTrace {
  std::vector<TransitionRecord> records;
  Vector s0;
  double discounted_cost = 0.0;
  bool truncated = false;  // policy failure mid-episode
  int episode = 0;
  long noise_draws = 0;    // rejection-sampler diagnostics
};

// One closed-loop episode. The stream splits into a policy substream and a
// plant-noise substream so the two draw sequences stay independent. The MPC
// solve is warm-started along the trajectory. A policy failure truncates the
// trace (flagged, kept for the safety audit, excluded from learning).
EpisodeTrace rollout(const ParametricNlp& nlp, const Vector& theta, const Vector& s0,
                     const PlantModel& plant, const DisturbanceDensity& rho,
                     const RolloutConfig& rc, RngStream rng, int episode_index = 0);

// S episodes on streams derived from (seed, episode index); order-independent.
std::vector<EpisodeTrace> run_batch(const ParametricNlp& nlp, const Vector& theta,
                                    const Vector& s0, const PlantModel& plant,
                                    const DisturbanceDensity& rho, const RolloutConfig& rc,
                                    std::uint64_t seed, int n_episodes);

}  // namespace mpcrl
