#pragma once

#include <vector>

#include "mpcrl/nlp.hpp"
#include "mpcrl/types.hpp"

namespace mpcrl {

// Scenario-tree robust linear MPC over a unit-ball state constraint. One
// nominal branch (model offset pinned at zero) plus n_branch disturbed
// branches, one per learnable uncertainty vertex. Branch inputs follow the
// ancillary feedback u_{j,k} = u_{0,k} - K (x_{j,k} - x_{0,k}), so the only
// input decision variables are the nominal u_{0,k}.
struct MpcConfig {
  int n = 2;         // state dimension
  int n_a = 2;       // input dimension
  int N = 10;        // horizon
  int n_branch = 4;  // disturbed branches / uncertainty vertices
};

struct ScenarioLayout {
  int n, n_a, N, n_branch;
  int n_w, n_f, n_h;
  int u(int k) const { return k * n_a; }
  int x(int j, int k) const { return N * n_a + (j * (N + 1) + k) * n; }
  int eq_ic(int j) const { return j * (N + 1) * n; }
  int eq_dyn(int j, int k) const { return eq_ic(j) + n + k * n; }
  int ineq(int j, int k) const { return j * N + (k - 1); }  // k = 1..N
};

ScenarioLayout scenario_layout(const MpcConfig& cfg);

// Learnable parameters. Flattened layout (column-major matrices):
//   [ x_bar (n); u_bar (n_a); vec(A0); vec(B0); b0 (n); vec(K); W_1; ...; W_nbranch ]
struct PolicyParams {
  Vector x_bar;
  Vector u_bar;
  Matrix A0;
  Matrix B0;
  Vector b0;
  Matrix K;
  std::vector<Vector> W;

  Vector flatten() const;
  static PolicyParams unflatten(const Vector& theta, const MpcConfig& cfg);
  static int n_theta(const MpcConfig& cfg);
};

// Cost: sum over branches of sum_k ( |x_{j,k} - x_bar|^2 + |u_{j,k} - u_bar|^2 )
// plus the terminal |x_{j,N} - x_bar|^2; dynamics x+ = A0 x + B0 u + b0 + W_j
// per branch; constraints |x_{j,k}|^2 <= 1 for k = 1..N. theta-derivatives are
// exact central differences of the hand-coded callbacks (every residual entry
// is polynomial of degree <= 2 in theta, so the differences are exact).
ParametricNlp build_scenario_nlp(const MpcConfig& cfg);

// Discrete-time LQR gain by Riccati fixed-point iteration:
//   K = (R + B'PB)^{-1} B'PA.
Matrix lqr_gain(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                double tol = 1e-10, int max_iter = 100000);

// One-step model residual s_plus - (A0 s + B0 a + b0).
Vector nominal_residual(const PolicyParams& p, const Vector& s, const Vector& a,
                        const Vector& s_plus);

// Fills the theta-derivative callbacks of any NLP by central differences of
// its value callbacks (step scaled per component). Exact whenever the
// residual entries are polynomials of degree <= 2 in theta.
void attach_fd_theta_derivatives(ParametricNlp& nlp, double step = 1e-6);

}  // namespace mpcrl
