#include "mpcrl/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "mpcrl/rng.hpp"

namespace mpcrl {

namespace {

std::string g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

}  // namespace

ExperimentConfig config_for_case(int which) {
  ExperimentConfig cfg;
  if (which == 1) {
    cfg.kappa = 0.95;
    cfg.alpha = 0.05;
  } else if (which == 2) {
    cfg.kappa = 1.05;
    cfg.alpha = 0.01;
  } else {
    throw std::invalid_argument("unknown case preset (expected 1 or 2)");
  }
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path, const ExperimentConfig& base) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file " + path);
  ExperimentConfig cfg = base;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    try {
      if (key == "gamma") cfg.gamma = std::stod(val);
      else if (key == "sigma") cfg.sigma = std::stod(val);
      else if (key == "tau") cfg.tau = std::stod(val);
      else if (key == "kappa") cfg.kappa = std::stod(val);
      else if (key == "alpha") cfg.alpha = std::stod(val);
      else if (key == "beta_deg") cfg.beta_deg = std::stod(val);
      else if (key == "beta_model_deg") cfg.beta_model_deg = std::stod(val);
      else if (key == "horizon") cfg.horizon = std::stoi(val);
      else if (key == "episode_steps") cfg.episode_steps = std::stoi(val);
      else if (key == "episodes") cfg.episodes = std::stoi(val);
      else if (key == "rl_steps") cfg.rl_steps = std::stoi(val);
      else if (key == "n_branch") cfg.n_branch = std::stoi(val);
      else if (key == "vertex_box") cfg.vertex_box = std::stod(val);
      else if (key == "x_ref_1") cfg.x_ref_1 = std::stod(val);
      else if (key == "x_ref_2") cfg.x_ref_2 = std::stod(val);
      else if (key == "s0_angle_deg") cfg.s0_angle_deg = std::stod(val);
      else if (key == "dataset_cap_factor") cfg.dataset_cap_factor = std::stoi(val);
      else if (key == "safety_tol") cfg.safety_tol = std::stod(val);
      else if (key == "seed") cfg.seed = std::stoull(val);
      else if (key == "out_dir") cfg.out_dir = val;
      else throw std::invalid_argument("unknown key");
    } catch (const std::exception& e) {
      throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": bad entry '" + key +
                                  "': " + e.what());
    }
  }
  return cfg;
}

void validate(const ExperimentConfig& cfg) {
  auto fail = [](const std::string& what) { throw std::invalid_argument("config: " + what); };
  if (!(cfg.gamma > 0.0 && cfg.gamma <= 1.0)) fail("gamma must be in (0, 1]");
  if (!(cfg.sigma > 0.0)) fail("sigma must be positive");
  if (!(cfg.tau > 0.0)) fail("tau must be positive");
  if (!(cfg.alpha >= 0.0)) fail("alpha must be non-negative");
  if (cfg.horizon < 1) fail("horizon must be at least 1");
  if (cfg.episode_steps < 1) fail("episode_steps must be at least 1");
  if (cfg.episodes < 1) fail("episodes must be at least 1");
  if (cfg.rl_steps < 0) fail("rl_steps must be non-negative");
  if (cfg.n_branch < 1) fail("n_branch must be at least 1");
  if (!(cfg.vertex_box > 0.0)) fail("vertex_box must be positive");
  if (cfg.dataset_cap_factor < 1) fail("dataset_cap_factor must be at least 1");
  if (!(cfg.safety_tol >= 0.0)) fail("safety_tol must be non-negative");
  if (cfg.out_dir.empty()) fail("out_dir must not be empty");
}

PolicyParams initial_policy(const ExperimentConfig& cfg) {
  const int n = 2;
  const double b = cfg.beta_model_deg * M_PI / 180.0;
  PolicyParams p;
  p.A0.resize(n, n);
  p.A0 << std::cos(b), std::sin(b), std::sin(b), std::cos(b);
  p.B0 = Matrix::Identity(n, n);
  p.b0 = Vector::Zero(n);
  p.K = lqr_gain(p.A0, p.B0, Matrix::Identity(n, n), Matrix::Identity(n, n));
  p.x_bar.resize(n);
  p.x_bar << cfg.x_ref_1, cfg.x_ref_2;
  // Steady state: x_bar = A0 x_bar + B0 u_bar + b0.
  p.u_bar = p.B0.colPivHouseholderQr().solve((Matrix::Identity(n, n) - p.A0) * p.x_bar - p.b0);
  p.W.resize(cfg.n_branch);
  if (cfg.n_branch == 4) {
    // Corners of the box [-vertex_box, vertex_box]^2, counter-clockwise from
    // the lower-left corner.
    const double v = cfg.vertex_box;
    p.W[0] = Vector(n); p.W[0] << -v, -v;
    p.W[1] = Vector(n); p.W[1] << v, -v;
    p.W[2] = Vector(n); p.W[2] << v, v;
    p.W[3] = Vector(n); p.W[3] << -v, v;
  } else {
    const double r = cfg.vertex_box * std::sqrt(2.0);
    for (int i = 0; i < cfg.n_branch; ++i) {
      const double ang = (225.0 + 360.0 * i / cfg.n_branch) * M_PI / 180.0;
      p.W[i] = Vector(n);
      p.W[i] << r * std::cos(ang), r * std::sin(ang);
    }
  }
  return p;
}

RunArtifacts run_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  const auto t_start = std::chrono::steady_clock::now();

  MpcConfig mpc;
  mpc.N = cfg.horizon;
  mpc.n_branch = cfg.n_branch;
  ParametricNlp nlp = build_scenario_nlp(mpc);

  PolicyParams init = initial_policy(cfg);
  Vector theta = init.flatten();
  PlantModel plant = make_plant(cfg.kappa, cfg.beta_deg);
  DisturbanceDensity rho(Matrix::Identity(mpc.n_a, mpc.n_a), cfg.sigma);

  RolloutConfig rc;
  rc.n_steps = cfg.episode_steps;
  rc.gamma = cfg.gamma;
  rc.tau = cfg.tau;
  rc.x_ref = init.x_bar;
  rc.u_ref = init.u_bar;
  rc.policy.with_score = true;

  Vector s0(2);
  const double ang0 = cfg.s0_angle_deg * M_PI / 180.0;
  s0 << std::cos(ang0), std::sin(ang0);

  RunArtifacts art;
  art.config = cfg;
  const std::size_t cap =
      static_cast<std::size_t>(cfg.dataset_cap_factor) * cfg.episodes * cfg.episode_steps;
  std::deque<ConstraintData> dataset;
  double alpha_cur = cfg.alpha;

  for (int t = 0; t <= cfg.rl_steps; ++t) {
    const std::uint64_t batch_seed =
        splitmix64(cfg.seed ^ (0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(t) + 1)));
    std::vector<EpisodeTrace> batch =
        run_batch(nlp, theta, s0, plant, rho, rc, batch_seed, cfg.episodes);

    int usable = 0;
    std::vector<TransitionRecord> critic_records;
    for (const EpisodeTrace& ep : batch) {
      art.noise_draws += ep.noise_draws;
      art.noise_accepted += static_cast<long>(ep.records.size());
      art.total_steps += static_cast<long>(ep.records.size());
      if (ep.truncated) ++art.truncated_episodes;
      for (const TransitionRecord& rec : ep.records) {
        if (rec.s_plus.squaredNorm() > 1.0 + cfg.safety_tol) ++art.safety_violations;
        if (!ep.truncated) critic_records.push_back(rec);
      }
      if (!ep.truncated) ++usable;
    }
    if (usable == 0)
      throw std::runtime_error("every episode was truncated at update step " +
                               std::to_string(t));

    ValueWeights vw = lstd_fit(critic_records, cfg.gamma);
    GradientEstimate est = estimate_policy_gradient(batch, vw, cfg.gamma);

    art.j_eval.push_back(est.j_hat);
    art.j_eval_std.push_back(est.j_std);
    art.theta_trace.push_back(theta);
    if (t == 0) {
      art.first_batch = batch;
      PolicyParams p0 = PolicyParams::unflatten(theta, mpc);
      for (const EpisodeTrace& ep : batch)
        for (const TransitionRecord& rec : ep.records)
          art.first_batch_residuals.push_back(nominal_residual(p0, rec.s, rec.a, rec.s_plus));
    }
    if (t == cfg.rl_steps) {
      art.last_batch = batch;
      break;
    }

    for (const EpisodeTrace& ep : batch) {
      for (const TransitionRecord& rec : ep.records) {
        dataset.push_back({rec.s, rec.a, rec.s_plus});
        if (dataset.size() > cap) dataset.pop_front();
      }
    }

    SafeUpdateResult upd = safe_update(theta, est.grad, alpha_cur, dataset, mpc);

    StepRow row;
    row.step = t;
    row.j_hat = est.j_hat;
    row.j_std = est.j_std;
    row.accepted = upd.accepted;
    row.dataset_size = static_cast<int>(dataset.size());
    row.alpha_used = alpha_cur;
    art.rows.push_back(row);

    if (upd.accepted) {
      theta = upd.theta;
      alpha_cur = cfg.alpha;
      PolicyParams p = PolicyParams::unflatten(theta, mpc);
      Matrix W(mpc.n, mpc.n_branch);
      for (int i = 0; i < mpc.n_branch; ++i) W.col(i) = p.W[i];
      for (const ConstraintData& c : dataset) {
        if (!membership_check(nominal_residual(p, c.s, c.a, c.s_plus), W).inside)
          ++art.membership_failures;
      }
    } else {
      ++art.rejected_updates;
      alpha_cur *= 0.5;
    }
  }

  art.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return art;
}

namespace {

void write_run(const RunArtifacts& art, std::ostream& out) {
  out << "step\tj_hat\tj_std\taccepted\tdataset_size\talpha_used\n";
  for (const StepRow& r : art.rows) {
    out << r.step << '\t' << g17(r.j_hat) << '\t' << g17(r.j_std) << '\t' << (r.accepted ? 1 : 0)
        << '\t' << r.dataset_size << '\t' << g17(r.alpha_used) << '\n';
  }
}

void write_j_trend(const RunArtifacts& art, std::ostream& out) {
  out << "step\tj_hat\tj_std\n";
  for (std::size_t t = 0; t < art.j_eval.size(); ++t)
    out << t << '\t' << g17(art.j_eval[t]) << '\t' << g17(art.j_eval_std[t]) << '\n';
}

void write_batch(const std::vector<EpisodeTrace>& batch, int batch_idx, std::ostream& out) {
  for (const EpisodeTrace& ep : batch) {
    for (const TransitionRecord& rec : ep.records) {
      out << batch_idx << '\t' << ep.episode << '\t' << rec.step;
      for (int i = 0; i < rec.s.size(); ++i) out << '\t' << g17(rec.s[i]);
      for (int i = 0; i < rec.a.size(); ++i) out << '\t' << g17(rec.a[i]);
      for (int i = 0; i < rec.s_plus.size(); ++i) out << '\t' << g17(rec.s_plus[i]);
      out << '\n';
    }
  }
}

void write_trajectories(const RunArtifacts& art, std::ostream& out) {
  out << "batch\tepisode\tstep\ts1\ts2\ta1\ta2\ts_plus1\ts_plus2\n";
  write_batch(art.first_batch, 0, out);
  if (art.config.rl_steps > 0) write_batch(art.last_batch, art.config.rl_steps, out);
}

void write_model_diff(const RunArtifacts& art, std::ostream& out) {
  MpcConfig mpc;
  mpc.N = art.config.horizon;
  mpc.n_branch = art.config.n_branch;
  PlantModel plant = make_plant(art.config.kappa, art.config.beta_deg);
  out << "step\ta_diff\tb_diff\tb0_norm\n";
  for (std::size_t t = 0; t < art.theta_trace.size(); ++t) {
    PolicyParams p = PolicyParams::unflatten(art.theta_trace[t], mpc);
    out << t << '\t' << g17((p.A0 - plant.A_real).norm()) << '\t'
        << g17((p.B0 - plant.B_real).norm()) << '\t' << g17(p.b0.norm()) << '\n';
  }
}

void write_vertices(const RunArtifacts& art, std::ostream& out) {
  MpcConfig mpc;
  mpc.N = art.config.horizon;
  mpc.n_branch = art.config.n_branch;
  out << "kind\tstep\tidx\tx\ty\n";
  for (std::size_t t = 0; t < art.theta_trace.size(); ++t) {
    PolicyParams p = PolicyParams::unflatten(art.theta_trace[t], mpc);
    for (int i = 0; i < mpc.n_branch; ++i)
      out << 0 << '\t' << t << '\t' << i << '\t' << g17(p.W[i][0]) << '\t' << g17(p.W[i][1])
          << '\n';
  }
  for (std::size_t i = 0; i < art.first_batch_residuals.size(); ++i) {
    const Vector& r = art.first_batch_residuals[i];
    out << 1 << '\t' << 0 << '\t' << i << '\t' << g17(r[0]) << '\t' << g17(r[1]) << '\n';
  }
}

void write_feedback(const RunArtifacts& art, std::ostream& out) {
  MpcConfig mpc;
  mpc.N = art.config.horizon;
  mpc.n_branch = art.config.n_branch;
  if (art.theta_trace.empty()) return;
  PolicyParams p0 = PolicyParams::unflatten(art.theta_trace.front(), mpc);
  out << "step";
  for (int j = 0; j < p0.K.cols(); ++j)
    for (int i = 0; i < p0.K.rows(); ++i) out << "\tk" << (i + 1) << (j + 1);
  out << "\tk_diff\n";
  for (std::size_t t = 0; t < art.theta_trace.size(); ++t) {
    PolicyParams p = PolicyParams::unflatten(art.theta_trace[t], mpc);
    out << t;
    for (int j = 0; j < p.K.cols(); ++j)
      for (int i = 0; i < p.K.rows(); ++i) out << '\t' << g17(p.K(i, j));
    out << '\t' << g17((p.K - p0.K).norm()) << '\n';
  }
}

void write_theta_trace(const RunArtifacts& art, std::ostream& out) {
  out << "step";
  if (!art.theta_trace.empty())
    for (int i = 0; i < art.theta_trace.front().size(); ++i) out << "\tt" << (i + 1);
  out << '\n';
  for (std::size_t t = 0; t < art.theta_trace.size(); ++t) {
    out << t;
    for (int i = 0; i < art.theta_trace[t].size(); ++i) out << '\t' << g17(art.theta_trace[t][i]);
    out << '\n';
  }
}

void write_summary(const RunArtifacts& art, std::ostream& out) {
  long accepted = 0;
  for (const StepRow& r : art.rows)
    if (r.accepted) ++accepted;
  out << "update_steps: " << art.rows.size() << '\n';
  out << "accepted_updates: " << accepted << '\n';
  out << "rejected_updates: " << art.rejected_updates << '\n';
  out << "safety_violations: " << art.safety_violations << '\n';
  out << "membership_failures: " << art.membership_failures << '\n';
  out << "truncated_episodes: " << art.truncated_episodes << '\n';
  out << "closed_loop_steps: " << art.total_steps << '\n';
  out << "noise_draws: " << art.noise_draws << '\n';
  out << "noise_accepted: " << art.noise_accepted << '\n';
  out << "noise_acceptance_rate: "
      << g17(art.noise_draws > 0 ? static_cast<double>(art.noise_accepted) / art.noise_draws : 0.0)
      << '\n';
  if (!art.j_eval.empty()) {
    out << "initial_j: " << g17(art.j_eval.front()) << '\n';
    out << "final_j: " << g17(art.j_eval.back()) << '\n';
  }
}

void write_config(const ExperimentConfig& cfg, std::ostream& out) {
  out << "gamma = " << g17(cfg.gamma) << '\n';
  out << "sigma = " << g17(cfg.sigma) << '\n';
  out << "tau = " << g17(cfg.tau) << '\n';
  out << "kappa = " << g17(cfg.kappa) << '\n';
  out << "alpha = " << g17(cfg.alpha) << '\n';
  out << "beta_deg = " << g17(cfg.beta_deg) << '\n';
  out << "beta_model_deg = " << g17(cfg.beta_model_deg) << '\n';
  out << "horizon = " << cfg.horizon << '\n';
  out << "episode_steps = " << cfg.episode_steps << '\n';
  out << "episodes = " << cfg.episodes << '\n';
  out << "rl_steps = " << cfg.rl_steps << '\n';
  out << "n_branch = " << cfg.n_branch << '\n';
  out << "vertex_box = " << g17(cfg.vertex_box) << '\n';
  out << "x_ref_1 = " << g17(cfg.x_ref_1) << '\n';
  out << "x_ref_2 = " << g17(cfg.x_ref_2) << '\n';
  out << "s0_angle_deg = " << g17(cfg.s0_angle_deg) << '\n';
  out << "dataset_cap_factor = " << cfg.dataset_cap_factor << '\n';
  out << "safety_tol = " << g17(cfg.safety_tol) << '\n';
  out << "seed = " << cfg.seed << '\n';
  out << "out_dir = " << cfg.out_dir << '\n';
}

}  // namespace

void write_artifacts(const RunArtifacts& art, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  auto path = [&out_dir](const char* name) { return out_dir + "/" + name; };
  { auto f = open_out(path("run.tsv")); write_run(art, f); }
  { auto f = open_out(path("j_trend.tsv")); write_j_trend(art, f); }
  { auto f = open_out(path("trajectories.tsv")); write_trajectories(art, f); }
  { auto f = open_out(path("model_diff.tsv")); write_model_diff(art, f); }
  { auto f = open_out(path("vertices.tsv")); write_vertices(art, f); }
  { auto f = open_out(path("feedback.tsv")); write_feedback(art, f); }
  { auto f = open_out(path("theta_trace.tsv")); write_theta_trace(art, f); }
  { auto f = open_out(path("summary.txt")); write_summary(art, f); }
  { auto f = open_out(path("config_used.txt")); write_config(art.config, f); }
}

void emit_plot_data(const RunArtifacts& art, const std::string& which, const std::string& path) {
  auto f = open_out(path);
  if (which == "j-trend") write_j_trend(art, f);
  else if (which == "trajectories") write_trajectories(art, f);
  else if (which == "model-diff") write_model_diff(art, f);
  else if (which == "vertices") write_vertices(art, f);
  else if (which == "feedback") write_feedback(art, f);
  else throw std::invalid_argument("unknown plot selector '" + which + "'");
}

}  // namespace mpcrl
