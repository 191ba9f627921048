#include "mpcrl/robust_mpc.hpp"

#include <cmath>

namespace mpcrl {

ScenarioLayout scenario_layout(const MpcConfig& cfg) {
  ScenarioLayout lo;
  lo.n = cfg.n;
  lo.n_a = cfg.n_a;
  lo.N = cfg.N;
  lo.n_branch = cfg.n_branch;
  const int branches = cfg.n_branch + 1;
  lo.n_w = cfg.N * cfg.n_a + branches * (cfg.N + 1) * cfg.n;
  lo.n_f = branches * (cfg.N + 1) * cfg.n;
  lo.n_h = branches * cfg.N;
  return lo;
}

Vector PolicyParams::flatten() const {
  const int n = static_cast<int>(x_bar.size());
  const int n_a = static_cast<int>(u_bar.size());
  const int nb = static_cast<int>(W.size());
  Vector th(n + n_a + n * n + n * n_a + n + n_a * n + nb * n);
  int off = 0;
  th.segment(off, n) = x_bar;
  off += n;
  th.segment(off, n_a) = u_bar;
  off += n_a;
  th.segment(off, n * n) = Eigen::Map<const Vector>(A0.data(), n * n);
  off += n * n;
  th.segment(off, n * n_a) = Eigen::Map<const Vector>(B0.data(), n * n_a);
  off += n * n_a;
  th.segment(off, n) = b0;
  off += n;
  th.segment(off, n_a * n) = Eigen::Map<const Vector>(K.data(), n_a * n);
  off += n_a * n;
  for (const auto& w : W) {
    th.segment(off, n) = w;
    off += n;
  }
  return th;
}

PolicyParams PolicyParams::unflatten(const Vector& theta, const MpcConfig& cfg) {
  const int n = cfg.n, n_a = cfg.n_a;
  if (theta.size() != n_theta(cfg)) throw std::invalid_argument("PolicyParams: theta size");
  PolicyParams p;
  int off = 0;
  p.x_bar = theta.segment(off, n);
  off += n;
  p.u_bar = theta.segment(off, n_a);
  off += n_a;
  p.A0 = Eigen::Map<const Matrix>(theta.data() + off, n, n);
  off += n * n;
  p.B0 = Eigen::Map<const Matrix>(theta.data() + off, n, n_a);
  off += n * n_a;
  p.b0 = theta.segment(off, n);
  off += n;
  p.K = Eigen::Map<const Matrix>(theta.data() + off, n_a, n);
  off += n_a * n;
  p.W.resize(cfg.n_branch);
  for (int j = 0; j < cfg.n_branch; ++j) {
    p.W[j] = theta.segment(off, n);
    off += n;
  }
  return p;
}

int PolicyParams::n_theta(const MpcConfig& cfg) {
  const int n = cfg.n, n_a = cfg.n_a;
  return n + n_a + n * n + n * n_a + n + n_a * n + cfg.n_branch * n;
}

ParametricNlp build_scenario_nlp(const MpcConfig& cfg) {
  const ScenarioLayout lo = scenario_layout(cfg);
  const int n = cfg.n, n_a = cfg.n_a, N = cfg.N, nb = cfg.n_branch;

  ParametricNlp nlp;
  nlp.n_w = lo.n_w;
  nlp.n_f = lo.n_f;
  nlp.n_h = lo.n_h;
  nlp.n_a = n_a;
  nlp.n_theta = PolicyParams::n_theta(cfg);

  auto branch_input = [lo, cfg](const Vector& w, const PolicyParams& p, int j, int k) {
    Vector u = w.segment(lo.u(k), cfg.n_a);
    if (j > 0)
      u -= p.K * (w.segment(lo.x(j, k), cfg.n) - w.segment(lo.x(0, k), cfg.n));
    return u;
  };

  nlp.cost = [lo, cfg, branch_input](const Vector& w, const Vector&, const Vector& theta) {
    const PolicyParams p = PolicyParams::unflatten(theta, cfg);
    double phi = 0.0;
    for (int j = 0; j <= cfg.n_branch; ++j) {
      for (int k = 0; k < cfg.N; ++k) {
        phi += (w.segment(lo.x(j, k), cfg.n) - p.x_bar).squaredNorm();
        phi += (branch_input(w, p, j, k) - p.u_bar).squaredNorm();
      }
      phi += (w.segment(lo.x(j, cfg.N), cfg.n) - p.x_bar).squaredNorm();
    }
    return phi;
  };

  nlp.cost_grad = [lo, cfg, branch_input](const Vector& w, const Vector&, const Vector& theta) {
    const PolicyParams p = PolicyParams::unflatten(theta, cfg);
    Vector g = Vector::Zero(lo.n_w);
    for (int j = 0; j <= cfg.n_branch; ++j) {
      for (int k = 0; k <= cfg.N; ++k)
        g.segment(lo.x(j, k), cfg.n) += 2.0 * (w.segment(lo.x(j, k), cfg.n) - p.x_bar);
      for (int k = 0; k < cfg.N; ++k) {
        const Vector e = branch_input(w, p, j, k) - p.u_bar;
        g.segment(lo.u(k), cfg.n_a) += 2.0 * e;
        if (j > 0) {
          const Vector kte = 2.0 * (p.K.transpose() * e);
          g.segment(lo.x(0, k), cfg.n) += kte;
          g.segment(lo.x(j, k), cfg.n) -= kte;
        }
      }
    }
    return g;
  };

  nlp.eq = [lo, cfg, branch_input](const Vector& w, const Vector& s, const Vector& theta) {
    const PolicyParams p = PolicyParams::unflatten(theta, cfg);
    Vector f(lo.n_f);
    for (int j = 0; j <= cfg.n_branch; ++j) {
      f.segment(lo.eq_ic(j), cfg.n) = w.segment(lo.x(j, 0), cfg.n) - s;
      for (int k = 0; k < cfg.N; ++k) {
        Vector pred = p.A0 * w.segment(lo.x(j, k), cfg.n) + p.B0 * branch_input(w, p, j, k) + p.b0;
        if (j > 0) pred += p.W[j - 1];
        f.segment(lo.eq_dyn(j, k), cfg.n) = w.segment(lo.x(j, k + 1), cfg.n) - pred;
      }
    }
    return f;
  };

  nlp.ineq = [lo, cfg](const Vector& w, const Vector&, const Vector&) {
    Vector h(lo.n_h);
    for (int j = 0; j <= cfg.n_branch; ++j)
      for (int k = 1; k <= cfg.N; ++k)
        h[lo.ineq(j, k)] = w.segment(lo.x(j, k), cfg.n).squaredNorm() - 1.0;
    return h;
  };

  auto add_block = [](TripletList& t, int r0, int c0, const Matrix& M) {
    for (int c = 0; c < M.cols(); ++c)
      for (int r = 0; r < M.rows(); ++r)
        if (M(r, c) != 0.0) t.emplace_back(r0 + r, c0 + c, M(r, c));
  };

  nlp.eq_jac = [lo, cfg, add_block](const Vector&, const Vector&, const Vector& theta) {
    const PolicyParams p = PolicyParams::unflatten(theta, cfg);
    const Matrix I = Matrix::Identity(cfg.n, cfg.n);
    const Matrix BK = p.B0 * p.K;
    const Matrix Acl = p.A0 - BK;
    TripletList trips;
    for (int j = 0; j <= cfg.n_branch; ++j) {
      add_block(trips, lo.eq_ic(j), lo.x(j, 0), I);
      for (int k = 0; k < cfg.N; ++k) {
        const int r0 = lo.eq_dyn(j, k);
        add_block(trips, r0, lo.x(j, k + 1), I);
        add_block(trips, r0, lo.u(k), -p.B0);
        if (j == 0) {
          add_block(trips, r0, lo.x(0, k), -p.A0);
        } else {
          add_block(trips, r0, lo.x(j, k), -Acl);
          add_block(trips, r0, lo.x(0, k), -BK);
        }
      }
    }
    SparseMatrix A(lo.n_f, lo.n_w);
    A.setFromTriplets(trips.begin(), trips.end());
    return A;
  };

  nlp.ineq_jac = [lo, cfg](const Vector& w, const Vector&, const Vector&) {
    TripletList trips;
    for (int j = 0; j <= cfg.n_branch; ++j)
      for (int k = 1; k <= cfg.N; ++k)
        for (int i = 0; i < cfg.n; ++i)
          trips.emplace_back(lo.ineq(j, k), lo.x(j, k) + i, 2.0 * w[lo.x(j, k) + i]);
    SparseMatrix G(lo.n_h, lo.n_w);
    G.setFromTriplets(trips.begin(), trips.end());
    return G;
  };

  nlp.lag_hess = [lo, cfg, add_block](const Vector&, const Vector&, const Vector& theta,
                                      const Vector&, const Vector& mu) {
    const PolicyParams p = PolicyParams::unflatten(theta, cfg);
    const Matrix In = Matrix::Identity(cfg.n, cfg.n);
    const Matrix Ia = Matrix::Identity(cfg.n_a, cfg.n_a);
    const Matrix KtK = p.K.transpose() * p.K;
    TripletList trips;
    for (int j = 0; j <= cfg.n_branch; ++j) {
      // state tracking terms 2|x - x_bar|^2, plus the ball-constraint curvature
      for (int k = 0; k <= cfg.N; ++k) {
        double diag = 2.0;
        if (k >= 1) diag += 2.0 * mu[lo.ineq(j, k)];
        add_block(trips, lo.x(j, k), lo.x(j, k), diag * In);
      }
      // input terms |u_{j,k} - u_bar|^2 with the ancillary substitution
      for (int k = 0; k < cfg.N; ++k) {
        add_block(trips, lo.u(k), lo.u(k), 2.0 * Ia);
        if (j > 0) {
          add_block(trips, lo.u(k), lo.x(0, k), 2.0 * p.K);
          add_block(trips, lo.x(0, k), lo.u(k), 2.0 * p.K.transpose());
          add_block(trips, lo.u(k), lo.x(j, k), -2.0 * p.K);
          add_block(trips, lo.x(j, k), lo.u(k), -2.0 * p.K.transpose());
          add_block(trips, lo.x(0, k), lo.x(0, k), 2.0 * KtK);
          add_block(trips, lo.x(j, k), lo.x(j, k), 2.0 * KtK);
          add_block(trips, lo.x(0, k), lo.x(j, k), -2.0 * KtK);
          add_block(trips, lo.x(j, k), lo.x(0, k), -2.0 * KtK);
        }
      }
    }
    SparseMatrix H(lo.n_w, lo.n_w);
    H.setFromTriplets(trips.begin(), trips.end());
    return H;
  };

  nlp.initial_primal = [lo, cfg](const Vector& s, const Vector& theta) {
    const PolicyParams p = PolicyParams::unflatten(theta, cfg);
    Vector w = Vector::Zero(lo.n_w);
    for (int k = 0; k < cfg.N; ++k) w.segment(lo.u(k), cfg.n_a) = p.u_bar;
    const double norm = s.norm();
    const Vector interior = norm > 0.95 ? Vector(0.95 / norm * s) : s;
    for (int j = 0; j <= cfg.n_branch; ++j) {
      w.segment(lo.x(j, 0), cfg.n) = s;
      for (int k = 1; k <= cfg.N; ++k) w.segment(lo.x(j, k), cfg.n) = interior;
    }
    return w;
  };

  attach_fd_theta_derivatives(nlp);
  return nlp;
}

Matrix lqr_gain(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R, double tol,
                int max_iter) {
  Matrix P = Q;
  for (int it = 0; it < max_iter; ++it) {
    const Matrix BtP = B.transpose() * P;
    const Matrix K = (R + BtP * B).ldlt().solve(BtP * A);
    const Matrix P_next = Q + A.transpose() * P * (A - B * K);
    const double diff = (P_next - P).cwiseAbs().maxCoeff();
    P = P_next;
    if (diff <= tol) {
      const Matrix BtP2 = B.transpose() * P;
      return (R + BtP2 * B).ldlt().solve(BtP2 * A);
    }
  }
  throw std::runtime_error("lqr_gain: Riccati iteration did not converge");
}

Vector nominal_residual(const PolicyParams& p, const Vector& s, const Vector& a,
                        const Vector& s_plus) {
  return s_plus - (p.A0 * s + p.B0 * a + p.b0);
}

void attach_fd_theta_derivatives(ParametricNlp& nlp, double step) {
  const auto cost_grad = nlp.cost_grad;
  const auto eq = nlp.eq;
  const auto ineq = nlp.ineq;
  const auto eq_jac = nlp.eq_jac;
  const auto ineq_jac = nlp.ineq_jac;
  const int n_f = nlp.n_f, n_h = nlp.n_h;

  auto central = [step](auto&& fn, const Vector& theta, int rows) {
    Matrix J(rows, theta.size());
    Vector th = theta;
    for (int i = 0; i < theta.size(); ++i) {
      const double h = step * std::max(1.0, std::abs(theta[i]));
      const double orig = th[i];
      th[i] = orig + h;
      const Vector fp = fn(th);
      th[i] = orig - h;
      const Vector fm = fn(th);
      th[i] = orig;
      J.col(i) = (fp - fm) / (2.0 * h);
    }
    return J;
  };

  nlp.stat_theta_jac = [=](const Vector& w, const Vector& s, const Vector& theta,
                           const Vector& lambda, const Vector& mu) {
    auto stat = [&](const Vector& th) {
      Vector g = cost_grad(w, s, th);
      if (n_f > 0) g += eq_jac(w, s, th).transpose() * lambda;
      if (n_h > 0) g += ineq_jac(w, s, th).transpose() * mu;
      return g;
    };
    return central(stat, theta, static_cast<int>(w.size()));
  };
  nlp.eq_theta_jac = [=](const Vector& w, const Vector& s, const Vector& theta) {
    return central([&](const Vector& th) { return eq(w, s, th); }, theta, n_f);
  };
  nlp.ineq_theta_jac = [=](const Vector& w, const Vector& s, const Vector& theta) {
    return central([&](const Vector& th) { return ineq(w, s, th); }, theta, n_h);
  };
}

}  // namespace mpcrl
