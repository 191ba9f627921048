#include "mpcrl/env_sim.hpp"

#include <cmath>
#include <stdexcept>

namespace mpcrl {

PlantModel make_plant(double kappa, double beta_deg) {
  const double b = beta_deg * M_PI / 180.0;
  PlantModel plant;
  plant.A_real.resize(2, 2);
  plant.A_real << std::cos(b), std::sin(b), std::sin(b), std::cos(b);
  plant.A_real *= kappa;
  plant.B_real = Matrix::Zero(2, 2);
  plant.B_real(0, 0) = 1.1;
  plant.B_real(1, 1) = 0.9;
  return plant;
}

Vector sample_clipped_noise(const PlantModel& plant, RngStream& rng, long* n_draws) {
  const int n = static_cast<int>(plant.A_real.rows());
  const double sd = std::sqrt(plant.noise_cov);
  for (long k = 0; k < plant.max_noise_draws; ++k) {
    Vector cand = sd * rng.normal_vector(n);
    if (cand.norm() <= plant.clip_radius) {
      if (n_draws) *n_draws += k + 1;
      return cand;
    }
  }
  throw std::runtime_error("noise rejection sampler exhausted its draw budget");
}

Vector plant_step(const PlantModel& plant, const Vector& s, const Vector& a, const Vector& noise) {
  return plant.A_real * s + plant.B_real * a + noise;
}

double stage_cost(const Vector& s, const Vector& a, const Vector& x_ref, const Vector& u_ref) {
  return (s - x_ref).squaredNorm() / 20.0 + 0.5 * (a - u_ref).squaredNorm();
}

EpisodeTrace rollout(const ParametricNlp& nlp, const Vector& theta, const Vector& s0,
                     const PlantModel& plant, const DisturbanceDensity& rho,
                     const RolloutConfig& rc, RngStream rng, int episode_index) {
  RngStream policy_rng = rng.substream(0);
  RngStream noise_rng = rng.substream(1);

  EpisodeTrace trace;
  trace.s0 = s0;
  trace.episode = episode_index;
  trace.records.reserve(rc.n_steps);

  Vector s = s0;
  PrimalDualPoint warm;
  bool have_warm = false;
  double discount = 1.0;

  for (int k = 0; k < rc.n_steps; ++k) {
    ActionSample sample;
    try {
      sample = sample_action(nlp, s, theta, rc.tau, rho, policy_rng, rc.policy,
                             have_warm ? &warm : nullptr);
    } catch (const PolicyFailure&) {
      trace.truncated = true;
      break;
    }
    warm = sample.z;
    have_warm = true;

    Vector noise = sample_clipped_noise(plant, noise_rng, &trace.noise_draws);
    Vector s_plus = plant_step(plant, s, sample.a, noise);

    TransitionRecord rec;
    rec.s = s;
    rec.d = sample.d;
    rec.a = sample.a;
    rec.s_plus = s_plus;
    rec.stage_cost = stage_cost(s, sample.a, rc.x_ref, rc.u_ref);
    if (sample.score) rec.score = sample.score->grad;
    rec.episode = episode_index;
    rec.step = k;
    trace.records.push_back(std::move(rec));

    trace.discounted_cost += discount * trace.records.back().stage_cost;
    discount *= rc.gamma;
    s = s_plus;
  }
  return trace;
}

std::vector<EpisodeTrace> run_batch(const ParametricNlp& nlp, const Vector& theta,
                                    const Vector& s0, const PlantModel& plant,
                                    const DisturbanceDensity& rho, const RolloutConfig& rc,
                                    std::uint64_t seed, int n_episodes) {
  std::vector<EpisodeTrace> batch;
  batch.reserve(n_episodes);
  for (int i = 0; i < n_episodes; ++i) {
    batch.push_back(rollout(nlp, theta, s0, plant, rho, rc,
                            RngStream::derive(seed, static_cast<std::uint64_t>(i)), i));
  }
  return batch;
}

}  // namespace mpcrl
