#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mpcrl/learner.hpp"

namespace mpcrl {

struct ExperimentConfig {
  double gamma = 0.99;          // discount
  double sigma = 1e-3;          // disturbance scale (covariance sigma * Sigma)
  double tau = 1e-2;            // deployment relaxation
  double kappa = 0.95;          // plant gain mismatch
  double alpha = 0.05;          // policy step size
  double beta_deg = 22.0;       // plant rotation
  double beta_model_deg = 20.0; // model rotation used by the controller
  int horizon = 10;             // MPC horizon N
  int episode_steps = 20;       // closed-loop steps per episode
  int episodes = 30;            // episodes per batch
  int rl_steps = 100;           // parameter updates
  int n_branch = 4;             // uncertainty vertices
  double vertex_box = 0.1;      // initial vertex half-width
  double x_ref_1 = 0.5;
  double x_ref_2 = 0.3;
  double s0_angle_deg = 60.0;   // initial state on the unit circle
  int dataset_cap_factor = 5;   // dataset cap = factor * episodes * episode_steps
  double safety_tol = 1e-9;     // |s|^2 <= 1 + tol audit slack
  std::uint64_t seed = 1;
  std::string out_dir = "out";
};

// Reference settings for the two benchmark scenarios: a contractive plant
// with a loose step size, and an expansive plant with a cautious one.
ExperimentConfig config_for_case(int which);

// Flat "key = value" file, '#' comments; unknown keys are an error.
ExperimentConfig parse_config_file(const std::string& path, const ExperimentConfig& base = {});

void validate(const ExperimentConfig& cfg);

// Model matched except for the gain, LQR ancillary feedback, references as
// targets, vertices spanning the initial uncertainty box.
PolicyParams initial_policy(const ExperimentConfig& cfg);

struct StepRow {
  int step = 0;
  double j_hat = 0.0;
  double j_std = 0.0;
  bool accepted = false;
  int dataset_size = 0;
  double alpha_used = 0.0;
};

struct RunArtifacts {
  ExperimentConfig config;
  std::vector<StepRow> rows;          // one per update step
  std::vector<double> j_eval;         // per-batch cost, rl_steps + 1 entries
  std::vector<double> j_eval_std;
  std::vector<Vector> theta_trace;    // theta_0 .. theta_rl_steps
  std::vector<EpisodeTrace> first_batch;
  std::vector<EpisodeTrace> last_batch;
  std::vector<Vector> first_batch_residuals;  // one-step model residuals, first batch
  long safety_violations = 0;
  long truncated_episodes = 0;
  long noise_draws = 0;
  long noise_accepted = 0;
  long rejected_updates = 0;
  long membership_failures = 0;  // audited at accepted steps
  double runtime_seconds = 0.0;
  long total_steps = 0;  // closed-loop transitions simulated
};

RunArtifacts run_experiment(const ExperimentConfig& cfg);

// run.tsv, j_trend.tsv, trajectories.tsv, model_diff.tsv, vertices.tsv,
// feedback.tsv, theta_trace.tsv, summary.txt, config_used.txt. All numeric
// text is printed with %.17g so reruns are byte-identical.
void write_artifacts(const RunArtifacts& art, const std::string& out_dir);

// Plot-ready slices of a finished run ("j-trend", "trajectories",
// "model-diff", "vertices", "feedback").
void emit_plot_data(const RunArtifacts& art, const std::string& which, const std::string& path);

}  // namespace mpcrl
