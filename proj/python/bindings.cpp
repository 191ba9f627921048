// Python bindings for the policy, solver, critic and experiment layers.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <optional>

#include "mpcrl/critic.hpp"
#include "mpcrl/experiment.hpp"
#include "mpcrl/ip_solver.hpp"
#include "mpcrl/learner.hpp"
#include "mpcrl/policy.hpp"
#include "mpcrl/rng.hpp"
#include "mpcrl/robust_mpc.hpp"

namespace py = pybind11;
using namespace mpcrl;

namespace {

// Scenario-tree policy with a fixed problem structure and adjustable
// parameters; keeps the compiled NLP callbacks alive across calls.
class ScenarioPolicy {
 public:
  ScenarioPolicy(int horizon, int n_branch, Vector theta) : theta_(std::move(theta)) {
    cfg_.N = horizon;
    cfg_.n_branch = n_branch;
    if (theta_.size() != PolicyParams::n_theta(cfg_))
      throw std::invalid_argument("theta has the wrong length for this structure");
    nlp_ = build_scenario_nlp(cfg_);
  }

  static ScenarioPolicy for_case(int which) {
    ExperimentConfig cfg = config_for_case(which);
    return ScenarioPolicy(cfg.horizon, cfg.n_branch, initial_policy(cfg).flatten());
  }

  Vector theta() const { return theta_; }
  void set_theta(const Vector& t) {
    if (t.size() != theta_.size()) throw std::invalid_argument("theta length changed");
    theta_ = t;
  }
  int n_theta() const { return static_cast<int>(theta_.size()); }
  int state_dim() const { return cfg_.n; }
  int action_dim() const { return cfg_.n_a; }

  py::dict solve(const Vector& s, std::optional<Vector> d, double tau) const {
    Vector dd = d.value_or(Vector::Zero(cfg_.n_a));
    SolveResult res = solve_nlp(nlp_, s, theta_, dd, tau);
    py::dict out;
    out["action"] = Vector(res.z.w.head(cfg_.n_a));
    out["converged"] = res.report.converged;
    out["iterations"] = res.report.iterations;
    out["residual"] = res.report.residual_norm;
    return out;
  }

  py::dict sample(const Vector& s, double tau, double sigma, std::uint64_t seed,
                  bool with_score) const {
    DisturbanceDensity rho(Matrix::Identity(cfg_.n_a, cfg_.n_a), sigma);
    RngStream rng(seed);
    PolicyOptions opts;
    opts.with_score = with_score;
    opts.with_log_density = true;
    ActionSample smp = sample_action(nlp_, s, theta_, tau, rho, rng, opts);
    py::dict out;
    out["action"] = smp.a;
    out["disturbance"] = smp.d;
    out["log_pi"] = smp.log_pi ? py::cast(*smp.log_pi) : py::none();
    out["score"] = smp.score ? py::cast(smp.score->grad) : py::none();
    return out;
  }

  double log_density(const Vector& a, const Vector& s, double tau, double sigma) const {
    DisturbanceDensity rho(Matrix::Identity(cfg_.n_a, cfg_.n_a), sigma);
    return mpcrl::log_density(nlp_, a, s, theta_, tau, rho).log_pi;
  }

  const MpcConfig& config() const { return cfg_; }

 private:
  MpcConfig cfg_;
  ParametricNlp nlp_;
  Vector theta_;
};

py::dict artifacts_summary(const RunArtifacts& art) {
  py::dict out;
  out["j_eval"] = art.j_eval;
  out["theta_final"] = art.theta_trace.back();
  out["safety_violations"] = art.safety_violations;
  out["membership_failures"] = art.membership_failures;
  out["rejected_updates"] = art.rejected_updates;
  out["truncated_episodes"] = art.truncated_episodes;
  out["total_steps"] = art.total_steps;
  out["runtime_seconds"] = art.runtime_seconds;
  return out;
}

}  // namespace

PYBIND11_MODULE(_mpcrl, m) {
  m.doc() = "Safe policy-gradient learning with a relaxed interior-point MPC policy";

  py::class_<ScenarioPolicy>(m, "ScenarioPolicy")
      .def(py::init<int, int, Vector>(), py::arg("horizon"), py::arg("n_branch"),
           py::arg("theta"))
      .def_static("for_case", &ScenarioPolicy::for_case, py::arg("which"))
      .def_property("theta", &ScenarioPolicy::theta, &ScenarioPolicy::set_theta)
      .def_property_readonly("n_theta", &ScenarioPolicy::n_theta)
      .def_property_readonly("state_dim", &ScenarioPolicy::state_dim)
      .def_property_readonly("action_dim", &ScenarioPolicy::action_dim)
      .def("solve", &ScenarioPolicy::solve, py::arg("s"), py::arg("d") = std::nullopt,
           py::arg("tau") = 1e-2)
      .def("sample", &ScenarioPolicy::sample, py::arg("s"), py::arg("tau") = 1e-2,
           py::arg("sigma") = 1e-3, py::arg("seed") = 0, py::arg("with_score") = true)
      .def("log_density", &ScenarioPolicy::log_density, py::arg("a"), py::arg("s"),
           py::arg("tau") = 1e-2, py::arg("sigma") = 1e-3);

  py::class_<ExperimentConfig>(m, "ExperimentConfig")
      .def(py::init<>())
      .def_readwrite("gamma", &ExperimentConfig::gamma)
      .def_readwrite("sigma", &ExperimentConfig::sigma)
      .def_readwrite("tau", &ExperimentConfig::tau)
      .def_readwrite("kappa", &ExperimentConfig::kappa)
      .def_readwrite("alpha", &ExperimentConfig::alpha)
      .def_readwrite("beta_deg", &ExperimentConfig::beta_deg)
      .def_readwrite("beta_model_deg", &ExperimentConfig::beta_model_deg)
      .def_readwrite("horizon", &ExperimentConfig::horizon)
      .def_readwrite("episode_steps", &ExperimentConfig::episode_steps)
      .def_readwrite("episodes", &ExperimentConfig::episodes)
      .def_readwrite("rl_steps", &ExperimentConfig::rl_steps)
      .def_readwrite("n_branch", &ExperimentConfig::n_branch)
      .def_readwrite("vertex_box", &ExperimentConfig::vertex_box)
      .def_readwrite("x_ref_1", &ExperimentConfig::x_ref_1)
      .def_readwrite("x_ref_2", &ExperimentConfig::x_ref_2)
      .def_readwrite("s0_angle_deg", &ExperimentConfig::s0_angle_deg)
      .def_readwrite("dataset_cap_factor", &ExperimentConfig::dataset_cap_factor)
      .def_readwrite("safety_tol", &ExperimentConfig::safety_tol)
      .def_readwrite("seed", &ExperimentConfig::seed)
      .def_readwrite("out_dir", &ExperimentConfig::out_dir);

  m.def("config_for_case", &config_for_case, py::arg("which"));
  m.def("parse_config_file", &parse_config_file, py::arg("path"),
        py::arg("base") = ExperimentConfig{});
  m.def(
      "run_experiment",
      [](const ExperimentConfig& cfg, bool write) {
        RunArtifacts art;
        {
          py::gil_scoped_release release;
          art = run_experiment(cfg);
          if (write) write_artifacts(art, cfg.out_dir);
        }
        return artifacts_summary(art);
      },
      py::arg("config"), py::arg("write") = false);

  m.def(
      "membership_check",
      [](const Vector& residual, const Matrix& vertices, double tol) {
        MembershipResult res = membership_check(residual, vertices, tol);
        return py::make_tuple(res.inside, res.weights);
      },
      py::arg("residual"), py::arg("vertices"), py::arg("tol") = 1e-9);

  m.def("lqr_gain", &lqr_gain, py::arg("A"), py::arg("B"), py::arg("Q"), py::arg("R"),
        py::arg("tol") = 1e-10, py::arg("max_iter") = 100000);

  m.def(
      "lstd_fit",
      [](const Matrix& phi, const Matrix& phi_plus, const Vector& cost, double gamma) {
        std::vector<Vector> rows, rows_plus;
        std::vector<double> costs;
        for (Eigen::Index i = 0; i < phi.rows(); ++i) {
          rows.push_back(phi.row(i).transpose());
          rows_plus.push_back(phi_plus.row(i).transpose());
          costs.push_back(cost[i]);
        }
        ValueWeights vw = lstd_fit_features(rows, rows_plus, costs, gamma);
        py::dict out;
        out["v"] = vw.v;
        out["rank"] = vw.rank;
        out["min_sv"] = vw.min_sv;
        out["degenerate"] = vw.degenerate;
        return out;
      },
      py::arg("phi"), py::arg("phi_plus"), py::arg("cost"), py::arg("gamma") = 0.99);
}
