#pragma once

#include <optional>
#include <vector>

#include "mpcrl/nlp.hpp"
#include "mpcrl/types.hpp"

namespace mpcrl {

struct SolverOptions {
  double tol = 1e-8;                  // inf-norm of the relaxed FONC residual
  int max_iterations = 200;           // accepted Newton steps per continuation stage
  double fraction_to_boundary = 0.995;
  double regularization = 1e-10;      // diagonal bump, applied only on factorization failure
  int max_line_search = 50;
  double armijo = 1e-4;               // sufficient decrease on ||r||_2
  bool continuation = true;           // geometric tau ladder on cold starts
  double continuation_start = 1.0;
  double continuation_factor = 0.1;
  double stage_tol = 1e-6;            // tolerance at intermediate ladder stages
  std::vector<double> tau_ladder;     // explicit ladder override; last entry must be the target tau
};

// Relaxed primal-dual FONC residual
//   r = [ grad_w Phi + d on u0 rows + (df/dw)'lambda + (dh/dw)'mu ;
//         f ;
//         mu .* h + tau ]
// Throws InteriorityError unless h(w) < 0 and mu > 0 strictly.
Vector assemble_residual(const ParametricNlp& nlp, const PrimalDualPoint& z, const Vector& s,
                         const Vector& theta, const Vector& d, double tau);

// KKT matrix dr/dz at z (independent of tau and d):
//   [ H         A'        G'      ]
//   [ A         0         0       ]
//   [ diag(mu)G 0         diag(h) ]
SparseMatrix assemble_kkt_jacobian(const ParametricNlp& nlp, const PrimalDualPoint& z,
                                   const Vector& s, const Vector& theta);

// dr/dtheta = [ d/dtheta stationarity ; df/dtheta ; diag(mu) dh/dtheta ], dense n_z x n_theta.
Matrix assemble_theta_jacobian(const ParametricNlp& nlp, const PrimalDualPoint& z, const Vector& s,
                               const Vector& theta);

// Sparse-or-dense LU behind one interface; regularizes once on failure.
class KktSolver {
 public:
  bool factorize(const SparseMatrix& J, double regularization);
  Vector solve(const Vector& rhs) const;
  Matrix solve(const Matrix& rhs) const;
  bool regularized() const { return regularized_; }

 private:
  static constexpr int kDenseLimit = 64;
  bool dense_ = false;
  bool regularized_ = false;
  Eigen::FullPivLU<Matrix> dense_lu_;
  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> sparse_lu_;
};

struct SolveResult {
  PrimalDualPoint z;
  SolverReport report;
};

// Damped-Newton solve of r(z) = 0 at relaxation tau, with fraction-to-boundary
// step clipping, backtracking on ||r||_2, and a geometric tau-continuation
// ladder on cold starts. A warm start (from a neighbouring state or the
// previous tau) skips the ladder. Non-convergence is reported, not thrown.
SolveResult solve_nlp(const ParametricNlp& nlp, const Vector& s, const Vector& theta,
                      const Vector& d, double tau, const SolverOptions& opts = {},
                      const PrimalDualPoint* warm = nullptr);

struct ReverseSolveResult {
  PrimalDualPoint z;  // w.head(n_a) == a
  Vector d;
  SolverReport report;
};

// Reverse parametrization: pin u0 = a and solve the same FONC for
// {d, w_rest, lambda, mu}. Recovers the disturbance that maps to action a.
ReverseSolveResult solve_reverse(const ParametricNlp& nlp, const Vector& a, const Vector& s,
                                 const Vector& theta, double tau, const SolverOptions& opts = {},
                                 const PrimalDualPoint* warm_z = nullptr,
                                 const Vector* warm_d = nullptr);

struct RegularityReport {
  double licq_min_sv = 0.0;   // smallest singular value of active constraint Jacobian rows
  double sosc_min_eig = 0.0;  // smallest eigenvalue of the reduced Lagrangian Hessian
  int n_active = 0;           // inequalities with -h_i <= sqrt(tau)
};

// LICQ / SOSC diagnostics at a (relaxed) solution; dense, for analysis and tests.
RegularityReport check_regularity(const ParametricNlp& nlp, const PrimalDualPoint& z,
                                  const Vector& s, const Vector& theta, double tau);

namespace detail {

// Residual evaluation that reports interior violations instead of throwing.
std::optional<Vector> try_residual(const ParametricNlp& nlp, const Vector& w,
                                   const Vector& lambda, const Vector& mu, const Vector& s,
                                   const Vector& theta, const Vector& d, double tau);

// Forward KKT triplets; shared by the forward matrix and the reverse column swap.
TripletList kkt_triplets(const ParametricNlp& nlp, const Vector& w, const Vector& lambda,
                         const Vector& mu, const Vector& s, const Vector& theta);

// Reverse-parametrization Jacobian (u0 columns replaced by d columns) plus the
// displaced u0 columns dr/du0 as a dense matrix.
void reverse_kkt(const ParametricNlp& nlp, const Vector& w, const Vector& lambda,
                 const Vector& mu, const Vector& s, const Vector& theta, SparseMatrix* jac,
                 Matrix* dr_du0);

}  // namespace detail

}  // namespace mpcrl
