#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "mpcrl/experiment.hpp"

using namespace mpcrl;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int data_rows(const std::string& text) {
  int rows = 0;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#') ++rows;
  return rows - 1;  // header
}

ExperimentConfig small_config() {
  ExperimentConfig cfg = config_for_case(1);
  cfg.horizon = 6;
  cfg.episodes = 2;
  cfg.episode_steps = 3;
  cfg.rl_steps = 2;
  cfg.seed = 5;
  return cfg;
}

}  // namespace

TEST_CASE("case presets") {
  ExperimentConfig c1 = config_for_case(1);
  CHECK(c1.kappa == 0.95);
  CHECK(c1.alpha == 0.05);
  ExperimentConfig c2 = config_for_case(2);
  CHECK(c2.kappa == 1.05);
  CHECK(c2.alpha == 0.01);
  CHECK(c1.gamma == 0.99);
  CHECK(c1.tau == 1e-2);
  CHECK(c1.sigma == 1e-3);
  CHECK(c1.episode_steps == 20);
  CHECK(c1.episodes == 30);
  CHECK(c1.horizon == 10);
  CHECK(c1.rl_steps == 100);
  CHECK_THROWS_AS(config_for_case(3), std::invalid_argument);
}

TEST_CASE("config validation rejects out-of-range values") {
  ExperimentConfig cfg = config_for_case(1);
  CHECK_NOTHROW(validate(cfg));
  cfg.gamma = 1.5;
  CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
  cfg = config_for_case(1);
  cfg.tau = 0.0;
  CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
  cfg = config_for_case(1);
  cfg.episodes = 0;
  CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
  cfg = config_for_case(1);
  cfg.rl_steps = -1;
  CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
}

TEST_CASE("config file parsing") {
  const std::string path = "test_cfg.txt";
  {
    std::ofstream out(path);
    out << "# comment line\n"
        << "alpha = 0.02\n"
        << "episodes = 7\n"
        << "seed = 42\n"
        << "\n"
        << "out_dir = somewhere\n";
  }
  ExperimentConfig cfg = parse_config_file(path, config_for_case(1));
  CHECK(cfg.alpha == 0.02);
  CHECK(cfg.episodes == 7);
  CHECK(cfg.seed == 42);
  CHECK(cfg.out_dir == "somewhere");
  CHECK(cfg.kappa == 0.95);  // untouched base value

  {
    std::ofstream out(path);
    out << "alpha = 0.02\nnosuchkey = 3\n";
  }
  CHECK_THROWS_AS(parse_config_file(path), std::invalid_argument);
  try {
    parse_config_file(path);
  } catch (const std::invalid_argument& err) {
    CHECK(std::string(err.what()).find(":2") != std::string::npos);  // file:line context
  }

  {
    std::ofstream out(path);
    out << "alpha = not-a-number\n";
  }
  CHECK_THROWS_AS(parse_config_file(path), std::invalid_argument);
}

TEST_CASE("initial policy matches the benchmark construction") {
  ExperimentConfig cfg = config_for_case(1);
  PolicyParams p = initial_policy(cfg);

  const double b = 20.0 * M_PI / 180.0;
  CHECK(p.A0(0, 0) == doctest::Approx(std::cos(b)).epsilon(1e-15));
  CHECK(p.A0(0, 1) == doctest::Approx(std::sin(b)).epsilon(1e-15));
  CHECK(p.A0(1, 0) == p.A0(0, 1));
  CHECK((p.B0 - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(p.b0.cwiseAbs().maxCoeff() == 0.0);
  CHECK(p.x_bar[0] == 0.5);
  CHECK(p.x_bar[1] == 0.3);

  // (x_bar, u_bar) is a steady state of the nominal model.
  Vector next = p.A0 * p.x_bar + p.B0 * p.u_bar + p.b0;
  CHECK((next - p.x_bar).lpNorm<Eigen::Infinity>() <= 1e-12);

  REQUIRE(p.W.size() == 4);
  CHECK((p.W[0] - (Vector(2) << -0.1, -0.1).finished()).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((p.W[1] - (Vector(2) << 0.1, -0.1).finished()).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((p.W[2] - (Vector(2) << 0.1, 0.1).finished()).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((p.W[3] - (Vector(2) << -0.1, 0.1).finished()).lpNorm<Eigen::Infinity>() == 0.0);

  Eigen::EigenSolver<Matrix> eig(p.A0 - p.B0 * p.K);
  CHECK(eig.eigenvalues().cwiseAbs().maxCoeff() < 1.0);
}

TEST_CASE("zero update steps produce a single evaluation batch") {
  ExperimentConfig cfg = small_config();
  cfg.rl_steps = 0;
  RunArtifacts art = run_experiment(cfg);

  CHECK(art.rows.empty());
  REQUIRE(art.j_eval.size() == 1);
  REQUIRE(art.theta_trace.size() == 1);
  CHECK(art.first_batch.size() == 2);
  CHECK(art.safety_violations == 0);
  CHECK(art.total_steps == 2 * 3);

  const std::string dir = "test_out_zero";
  write_artifacts(art, dir);
  CHECK(data_rows(slurp(dir + "/run.tsv")) == 0);
  CHECK(data_rows(slurp(dir + "/j_trend.tsv")) == 1);

  // The written config reparses to the run's exact configuration.
  ExperimentConfig back = parse_config_file(dir + "/config_used.txt");
  CHECK(back.alpha == cfg.alpha);
  CHECK(back.kappa == cfg.kappa);
  CHECK(back.gamma == cfg.gamma);
  CHECK(back.sigma == cfg.sigma);
  CHECK(back.tau == cfg.tau);
  CHECK(back.horizon == cfg.horizon);
  CHECK(back.episodes == cfg.episodes);
  CHECK(back.episode_steps == cfg.episode_steps);
  CHECK(back.rl_steps == cfg.rl_steps);
  CHECK(back.seed == cfg.seed);
}

TEST_CASE("small run is deterministic byte for byte") {
  ExperimentConfig cfg = small_config();
  RunArtifacts a = run_experiment(cfg);
  RunArtifacts b = run_experiment(cfg);

  CHECK(a.rows.size() == 2);  // one row per update step
  REQUIRE(a.j_eval.size() == 3);
  REQUIRE(a.theta_trace.size() == 3);
  CHECK(a.safety_violations == 0);

  write_artifacts(a, "test_out_a");
  write_artifacts(b, "test_out_b");
  for (const char* name :
       {"run.tsv", "j_trend.tsv", "trajectories.tsv", "model_diff.tsv", "vertices.tsv",
        "feedback.tsv", "theta_trace.tsv", "summary.txt", "config_used.txt"}) {
    CAPTURE(name);
    CHECK(slurp(std::string("test_out_a/") + name) == slurp(std::string("test_out_b/") + name));
  }
}

TEST_CASE("plot data slices") {
  ExperimentConfig cfg = small_config();
  RunArtifacts art = run_experiment(cfg);

  emit_plot_data(art, "j-trend", "test_plot_j.tsv");
  CHECK(data_rows(slurp("test_plot_j.tsv")) == cfg.rl_steps + 1);

  emit_plot_data(art, "model-diff", "test_plot_m.tsv");
  std::string text = slurp("test_plot_m.tsv");
  std::istringstream in(text);
  std::string header;
  std::getline(in, header);
  CHECK(header.find("a_diff") != std::string::npos);
  CHECK(header.find("b_diff") != std::string::npos);
  CHECK(header.find("b0_norm") != std::string::npos);
  CHECK(data_rows(text) == cfg.rl_steps + 1);

  emit_plot_data(art, "vertices", "test_plot_v.tsv");
  CHECK(data_rows(slurp("test_plot_v.tsv")) > 0);
  emit_plot_data(art, "feedback", "test_plot_f.tsv");
  CHECK(data_rows(slurp("test_plot_f.tsv")) == cfg.rl_steps + 1);
  emit_plot_data(art, "trajectories", "test_plot_t.tsv");
  CHECK(data_rows(slurp("test_plot_t.tsv")) > 0);

  CHECK_THROWS_AS(emit_plot_data(art, "nope", "test_plot_x.tsv"), std::invalid_argument);
}
