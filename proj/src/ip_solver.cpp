#include "mpcrl/ip_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mpcrl {

namespace detail {

std::optional<Vector> try_residual(const ParametricNlp& nlp, const Vector& w,
                                   const Vector& lambda, const Vector& mu, const Vector& s,
                                   const Vector& theta, const Vector& d, double tau) {
  const int n_w = nlp.n_w, n_f = nlp.n_f, n_h = nlp.n_h, n_a = nlp.n_a;
  Vector h;
  if (n_h > 0) {
    h = nlp.ineq(w, s, theta);
    if (!(h.array() < 0.0).all() || !(mu.array() > 0.0).all()) return std::nullopt;
  }
  Vector r(n_w + n_f + n_h);
  Vector r1 = nlp.cost_grad(w, s, theta);
  r1.head(n_a) += d;
  if (n_f > 0) r1 += nlp.eq_jac(w, s, theta).transpose() * lambda;
  if (n_h > 0) r1 += nlp.ineq_jac(w, s, theta).transpose() * mu;
  r.head(n_w) = r1;
  if (n_f > 0) r.segment(n_w, n_f) = nlp.eq(w, s, theta);
  if (n_h > 0) r.tail(n_h) = (mu.array() * h.array() + tau).matrix();
  if (!r.allFinite()) return std::nullopt;
  return r;
}

TripletList kkt_triplets(const ParametricNlp& nlp, const Vector& w, const Vector& lambda,
                         const Vector& mu, const Vector& s, const Vector& theta) {
  const int n_w = nlp.n_w, n_f = nlp.n_f, n_h = nlp.n_h;
  const int off_l = n_w, off_m = n_w + n_f;
  TripletList trips;
  trips.reserve(16 * static_cast<size_t>(n_w + n_f + n_h));

  const SparseMatrix H = nlp.lag_hess(w, s, theta, lambda, mu);
  for (int k = 0; k < H.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(H, k); it; ++it)
      trips.emplace_back(it.row(), it.col(), it.value());

  if (n_f > 0) {
    const SparseMatrix A = nlp.eq_jac(w, s, theta);
    for (int k = 0; k < A.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(A, k); it; ++it) {
        trips.emplace_back(off_l + it.row(), it.col(), it.value());
        trips.emplace_back(it.col(), off_l + it.row(), it.value());
      }
  }
  if (n_h > 0) {
    const SparseMatrix G = nlp.ineq_jac(w, s, theta);
    for (int k = 0; k < G.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(G, k); it; ++it) {
        trips.emplace_back(off_m + it.row(), it.col(), mu[it.row()] * it.value());
        trips.emplace_back(it.col(), off_m + it.row(), it.value());
      }
    const Vector h = nlp.ineq(w, s, theta);
    for (int i = 0; i < n_h; ++i) trips.emplace_back(off_m + i, off_m + i, h[i]);
  }
  return trips;
}

void reverse_kkt(const ParametricNlp& nlp, const Vector& w, const Vector& lambda,
                 const Vector& mu, const Vector& s, const Vector& theta, SparseMatrix* jac,
                 Matrix* dr_du0) {
  const int n_z = nlp.n_z(), n_a = nlp.n_a;
  TripletList trips = kkt_triplets(nlp, w, lambda, mu, s, theta);
  if (dr_du0) *dr_du0 = Matrix::Zero(n_z, n_a);
  TripletList kept;
  kept.reserve(trips.size() + n_a);
  for (const auto& t : trips) {
    if (t.col() < n_a) {
      if (dr_du0) (*dr_du0)(t.row(), t.col()) += t.value();
    } else {
      kept.push_back(t);
    }
  }
  for (int i = 0; i < n_a; ++i) kept.emplace_back(i, i, 1.0);  // dr/dd on the u0 rows
  if (jac) {
    jac->resize(n_z, n_z);
    jac->setFromTriplets(kept.begin(), kept.end());
  }
}

}  // namespace detail

Vector assemble_residual(const ParametricNlp& nlp, const PrimalDualPoint& z, const Vector& s,
                         const Vector& theta, const Vector& d, double tau) {
  if (z.w.size() != nlp.n_w || z.lambda.size() != nlp.n_f || z.mu.size() != nlp.n_h ||
      d.size() != nlp.n_a)
    throw std::invalid_argument("assemble_residual: dimension mismatch");
  auto r = detail::try_residual(nlp, z.w, z.lambda, z.mu, s, theta, d, tau);
  if (!r) throw InteriorityError("assemble_residual: point violates h < 0, mu > 0");
  return *r;
}

SparseMatrix assemble_kkt_jacobian(const ParametricNlp& nlp, const PrimalDualPoint& z,
                                   const Vector& s, const Vector& theta) {
  SparseMatrix J(nlp.n_z(), nlp.n_z());
  auto trips = detail::kkt_triplets(nlp, z.w, z.lambda, z.mu, s, theta);
  J.setFromTriplets(trips.begin(), trips.end());
  return J;
}

Matrix assemble_theta_jacobian(const ParametricNlp& nlp, const PrimalDualPoint& z, const Vector& s,
                               const Vector& theta) {
  const int n_w = nlp.n_w, n_f = nlp.n_f, n_h = nlp.n_h;
  Matrix T = Matrix::Zero(nlp.n_z(), nlp.n_theta);
  if (nlp.n_theta == 0) return T;
  if (nlp.stat_theta_jac) T.topRows(n_w) = nlp.stat_theta_jac(z.w, s, theta, z.lambda, z.mu);
  if (n_f > 0 && nlp.eq_theta_jac) T.middleRows(n_w, n_f) = nlp.eq_theta_jac(z.w, s, theta);
  if (n_h > 0 && nlp.ineq_theta_jac)
    T.bottomRows(n_h) = z.mu.asDiagonal() * nlp.ineq_theta_jac(z.w, s, theta);
  return T;
}

bool KktSolver::factorize(const SparseMatrix& J, double regularization) {
  regularized_ = false;
  dense_ = J.rows() <= kDenseLimit;
  if (dense_) {
    Matrix Jd = Matrix(J);
    dense_lu_.compute(Jd);
    if (!dense_lu_.isInvertible()) {
      Jd.diagonal().array() += regularization;
      dense_lu_.compute(Jd);
      regularized_ = true;
    }
    return dense_lu_.isInvertible();
  }
  sparse_lu_.compute(J);
  if (sparse_lu_.info() != Eigen::Success) {
    SparseMatrix I(J.rows(), J.cols());
    I.setIdentity();
    SparseMatrix Jr = J + regularization * I;
    sparse_lu_.compute(Jr);
    regularized_ = true;
  }
  return sparse_lu_.info() == Eigen::Success;
}

Vector KktSolver::solve(const Vector& rhs) const {
  return dense_ ? Vector(dense_lu_.solve(rhs)) : Vector(sparse_lu_.solve(rhs));
}

Matrix KktSolver::solve(const Matrix& rhs) const {
  if (dense_) return dense_lu_.solve(rhs);
  Matrix out(rhs.rows(), rhs.cols());
  for (int c = 0; c < rhs.cols(); ++c) out.col(c) = sparse_lu_.solve(Vector(rhs.col(c)));
  return out;
}

namespace {

struct NewtonCallbacks {
  std::function<std::optional<Vector>(const Vector&)> residual;
  std::function<SparseMatrix(const Vector&)> jacobian;
  int mu_offset = 0;
  int mu_count = 0;
};

// Damped Newton on r(y) = 0 with fraction-to-boundary clipping on the mu block
// and backtracking that enforces a monotone decrease of ||r||_2.
bool newton_solve(const NewtonCallbacks& cb, Vector& y, double tol, const SolverOptions& opts,
                  SolverReport& report) {
  auto r_opt = cb.residual(y);
  if (!r_opt) {
    report.failure = "initial point violates strict interior";
    return false;
  }
  Vector r = *r_opt;
  double r2 = r.norm();
  report.residual_norm = r.lpNorm<Eigen::Infinity>();
  for (int it = 0; it < opts.max_iterations; ++it) {
    if (report.residual_norm <= tol) return true;
    const SparseMatrix J = cb.jacobian(y);
    KktSolver lin;
    if (!lin.factorize(J, opts.regularization)) {
      report.failure = "singular KKT matrix";
      return false;
    }
    if (lin.regularized()) ++report.regularized;
    const Vector dy = lin.solve(Vector(-r));
    if (!dy.allFinite()) {
      report.failure = "non-finite Newton step";
      return false;
    }
    auto backtrack = [&](const Vector& dir) {
      double alpha = 1.0;
      for (int i = 0; i < cb.mu_count; ++i) {
        const double m = y[cb.mu_offset + i];
        const double dm = dir[cb.mu_offset + i];
        if (dm < 0.0) alpha = std::min(alpha, opts.fraction_to_boundary * m / (-dm));
      }
      for (int ls = 0; ls < opts.max_line_search; ++ls) {
        Vector y_trial = y + alpha * dir;
        auto rt = cb.residual(y_trial);
        if (rt && rt->norm() <= (1.0 - opts.armijo * alpha) * r2) {
          y = std::move(y_trial);
          r = std::move(*rt);
          r2 = r.norm();
          report.residual_norm = r.lpNorm<Eigen::Infinity>();
          ++report.iterations;
          return true;
        }
        alpha *= 0.5;
      }
      return false;
    };
    bool accepted = backtrack(dy);
    if (!accepted) {
      // Newton backtracking can stall near ill-conditioned corners. Retry along
      // steepest descent of the merit 1/2 ||r||^2, scaled to the Newton step
      // length; this only runs on otherwise-failing paths.
      Vector dg = -(J.transpose() * r);
      const double gn = dg.norm();
      if (gn > 0.0 && dg.allFinite()) accepted = backtrack(Vector(dg * (dy.norm() / gn)));
    }
    if (!accepted) {
      report.failure = "line search failed";
      return false;
    }
  }
  if (report.residual_norm <= tol) return true;
  report.failure = "iteration limit";
  return false;
}

std::vector<double> make_ladder(double tau, bool cold, const SolverOptions& opts, int n_h) {
  if (!opts.tau_ladder.empty()) return opts.tau_ladder;
  if (!cold || !opts.continuation || n_h == 0 || tau >= opts.continuation_start) return {tau};
  std::vector<double> ladder;
  for (double t = opts.continuation_start; t > tau * (1.0 + 1e-9); t *= opts.continuation_factor)
    ladder.push_back(t);
  ladder.push_back(tau);
  return ladder;
}

Vector clamp_dual_init(const Vector& h, double tau0) {
  return (tau0 / (-h.array())).cwiseMax(1e-8).cwiseMin(1e8).matrix();
}

}  // namespace

SolveResult solve_nlp(const ParametricNlp& nlp, const Vector& s, const Vector& theta,
                      const Vector& d, double tau, const SolverOptions& opts,
                      const PrimalDualPoint* warm) {
  const int n_w = nlp.n_w, n_f = nlp.n_f, n_h = nlp.n_h;
  SolveResult out;
  out.report.tau = tau;

  Vector w, lambda, mu;
  bool cold = true;
  if (warm && warm->w.size() == n_w && warm->lambda.size() == n_f && warm->mu.size() == n_h) {
    const bool interior =
        (n_h == 0 || ((nlp.ineq(warm->w, s, theta).array() < 0.0).all() &&
                      (warm->mu.array() > 0.0).all()));
    if (interior) {
      w = warm->w;
      lambda = warm->lambda;
      mu = warm->mu;
      cold = false;
    }
  }
  const auto ladder = make_ladder(tau, cold, opts, n_h);
  if (cold) {
    w = nlp.initial_primal ? nlp.initial_primal(s, theta) : Vector::Zero(n_w);
    lambda = Vector::Zero(n_f);
    mu = Vector(n_h);
    if (n_h > 0) {
      const Vector h = nlp.ineq(w, s, theta);
      if (!(h.array() < 0.0).all()) {
        out.report.failure = "cold start not strictly interior";
        out.z = PrimalDualPoint{w, lambda, Vector::Zero(n_h)};
        return out;
      }
      mu = clamp_dual_init(h, ladder.front());
    }
  }

  Vector y(nlp.n_z());
  y << w, lambda, mu;
  NewtonCallbacks cb;
  cb.mu_offset = n_w + n_f;
  cb.mu_count = n_h;
  double stage_tau = tau;
  cb.residual = [&](const Vector& yy) {
    return detail::try_residual(nlp, yy.head(n_w), yy.segment(n_w, n_f), yy.tail(n_h), s, theta,
                                d, stage_tau);
  };
  cb.jacobian = [&](const Vector& yy) {
    SparseMatrix J(nlp.n_z(), nlp.n_z());
    auto trips =
        detail::kkt_triplets(nlp, yy.head(n_w), yy.segment(n_w, n_f), yy.tail(n_h), s, theta);
    J.setFromTriplets(trips.begin(), trips.end());
    return J;
  };
  for (size_t i = 0; i < ladder.size(); ++i) {
    stage_tau = ladder[i];
    const bool last = (i + 1 == ladder.size());
    if (!newton_solve(cb, y, last ? opts.tol : opts.stage_tol, opts, out.report)) {
      out.z = PrimalDualPoint{y.head(n_w), y.segment(n_w, n_f), y.tail(n_h)};
      return out;
    }
  }
  out.report.converged = true;
  out.z = PrimalDualPoint{y.head(n_w), y.segment(n_w, n_f), y.tail(n_h)};
  return out;
}

ReverseSolveResult solve_reverse(const ParametricNlp& nlp, const Vector& a, const Vector& s,
                                 const Vector& theta, double tau, const SolverOptions& opts,
                                 const PrimalDualPoint* warm_z, const Vector* warm_d) {
  const int n_w = nlp.n_w, n_f = nlp.n_f, n_h = nlp.n_h, n_a = nlp.n_a;
  const int n_rest = n_w - n_a;
  ReverseSolveResult out;
  out.report.tau = tau;

  auto make_w = [&](const Vector& yy) {
    Vector w(n_w);
    w.head(n_a) = a;
    w.tail(n_rest) = yy.segment(n_a, n_rest);
    return w;
  };
  auto stationarity_d = [&](const Vector& w, const Vector& lambda, const Vector& mu) {
    Vector g = nlp.cost_grad(w, s, theta);
    if (n_f > 0) g += nlp.eq_jac(w, s, theta).transpose() * lambda;
    if (n_h > 0) g += nlp.ineq_jac(w, s, theta).transpose() * mu;
    return Vector(-g.head(n_a));
  };

  Vector w, lambda, mu, d0;
  bool cold = true;
  if (warm_z && warm_z->w.size() == n_w && warm_z->lambda.size() == n_f &&
      warm_z->mu.size() == n_h) {
    Vector wp = warm_z->w;
    wp.head(n_a) = a;
    const bool interior = (n_h == 0 || ((nlp.ineq(wp, s, theta).array() < 0.0).all() &&
                                        (warm_z->mu.array() > 0.0).all()));
    if (interior) {
      w = wp;
      lambda = warm_z->lambda;
      mu = warm_z->mu;
      d0 = warm_d ? *warm_d : stationarity_d(w, lambda, mu);
      cold = false;
    }
  }
  const auto ladder = make_ladder(tau, cold, opts, n_h);
  if (cold) {
    w = nlp.initial_primal ? nlp.initial_primal(s, theta) : Vector::Zero(n_w);
    w.head(n_a) = a;
    lambda = Vector::Zero(n_f);
    mu = Vector(n_h);
    if (n_h > 0) {
      const Vector h = nlp.ineq(w, s, theta);
      if (!(h.array() < 0.0).all()) {
        out.report.failure = "action outside the strict interior";
        out.z = PrimalDualPoint{w, lambda, Vector::Zero(n_h)};
        out.d = Vector::Zero(n_a);
        return out;
      }
      mu = clamp_dual_init(h, ladder.front());
    }
    d0 = stationarity_d(w, lambda, mu);
  }

  Vector y(nlp.n_z());
  y << d0, w.tail(n_rest), lambda, mu;
  NewtonCallbacks cb;
  cb.mu_offset = n_w + n_f;
  cb.mu_count = n_h;
  double stage_tau = tau;
  cb.residual = [&](const Vector& yy) {
    return detail::try_residual(nlp, make_w(yy), yy.segment(n_w, n_f), yy.tail(n_h), s, theta,
                                yy.head(n_a), stage_tau);
  };
  cb.jacobian = [&](const Vector& yy) {
    SparseMatrix J;
    detail::reverse_kkt(nlp, make_w(yy), yy.segment(n_w, n_f), yy.tail(n_h), s, theta, &J,
                        nullptr);
    return J;
  };
  for (size_t i = 0; i < ladder.size(); ++i) {
    stage_tau = ladder[i];
    const bool last = (i + 1 == ladder.size());
    if (!newton_solve(cb, y, last ? opts.tol : opts.stage_tol, opts, out.report)) break;
    if (last) out.report.converged = true;
  }
  out.d = y.head(n_a);
  out.z = PrimalDualPoint{make_w(y), y.segment(n_w, n_f), y.tail(n_h)};
  return out;
}

RegularityReport check_regularity(const ParametricNlp& nlp, const PrimalDualPoint& z,
                                  const Vector& s, const Vector& theta, double tau) {
  const int n_w = nlp.n_w, n_f = nlp.n_f, n_h = nlp.n_h;
  const double inf = std::numeric_limits<double>::infinity();
  RegularityReport rep;

  std::vector<int> active;
  if (n_h > 0) {
    const Vector h = nlp.ineq(z.w, s, theta);
    const double thresh = std::sqrt(tau);
    for (int i = 0; i < n_h; ++i)
      if (-h[i] <= thresh) active.push_back(i);
  }
  rep.n_active = static_cast<int>(active.size());

  const int m = n_f + rep.n_active;
  Matrix M(m, n_w);
  if (n_f > 0) M.topRows(n_f) = Matrix(nlp.eq_jac(z.w, s, theta));
  if (rep.n_active > 0) {
    const Matrix G = Matrix(nlp.ineq_jac(z.w, s, theta));
    for (int i = 0; i < rep.n_active; ++i) M.row(n_f + i) = G.row(active[i]);
  }

  Matrix Z;
  if (m == 0) {
    rep.licq_min_sv = inf;
    Z = Matrix::Identity(n_w, n_w);
  } else if (m > n_w) {
    rep.licq_min_sv = 0.0;  // more active rows than variables: necessarily dependent
    Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i)
      if (sv[i] > 1e-10 * sv[0]) ++rank;
    Z = svd.matrixV().rightCols(n_w - rank);
  } else {
    Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    rep.licq_min_sv = sv[sv.size() - 1];
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i)
      if (sv[i] > 1e-10 * std::max(sv[0], 1e-300)) ++rank;
    Z = svd.matrixV().rightCols(n_w - rank);
  }

  if (Z.cols() == 0) {
    rep.sosc_min_eig = inf;
  } else {
    const Matrix H = Matrix(nlp.lag_hess(z.w, s, theta, z.lambda, z.mu));
    const Matrix R = Z.transpose() * H * Z;
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (R + R.transpose()));
    rep.sosc_min_eig = es.eigenvalues().minCoeff();
  }
  return rep;
}

}  // namespace mpcrl
