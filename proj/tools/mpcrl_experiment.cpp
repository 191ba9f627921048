#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "mpcrl/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Safe policy-gradient learning with a robust MPC policy"};

  int case_id = 1;
  std::string config_path;
  std::uint64_t seed = 0;
  std::string output;
  int steps = -1;

  app.add_option("--case", case_id, "benchmark preset (1 or 2)")->check(CLI::Range(1, 2));
  app.add_option("--config", config_path, "key = value config file, overrides the preset");
  auto* seed_opt = app.add_option("--seed", seed, "RNG seed override");
  auto* output_opt = app.add_option("--output", output, "artifact directory override");
  auto* steps_opt = app.add_option("--steps", steps, "number of parameter updates override");

  CLI11_PARSE(app, argc, argv);

  mpcrl::RunArtifacts art;
  try {
    mpcrl::ExperimentConfig cfg = mpcrl::config_for_case(case_id);
    if (!config_path.empty()) cfg = mpcrl::parse_config_file(config_path, cfg);
    if (seed_opt->count() > 0) cfg.seed = seed;
    if (output_opt->count() > 0) cfg.out_dir = output;
    if (steps_opt->count() > 0) cfg.rl_steps = steps;
    mpcrl::validate(cfg);

    art = mpcrl::run_experiment(cfg);
    mpcrl::write_artifacts(art, cfg.out_dir);

    long accepted = 0;
    for (const auto& r : art.rows)
      if (r.accepted) ++accepted;
    std::printf("updates: %zu accepted: %ld rejected: %ld\n", art.rows.size(), accepted,
                art.rejected_updates);
    std::printf("safety violations: %ld over %ld closed-loop steps\n", art.safety_violations,
                art.total_steps);
    if (!art.j_eval.empty())
      std::printf("cost estimate: %.6g -> %.6g\n", art.j_eval.front(), art.j_eval.back());
    std::printf("runtime: %.1f s\n", art.runtime_seconds);
    std::printf("artifacts: %s\n", cfg.out_dir.c_str());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }

  return art.safety_violations > 0 ? 1 : 0;
}
