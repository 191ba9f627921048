#include "mpcrl/learner.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mpcrl {

GradientEstimate estimate_policy_gradient(const std::vector<EpisodeTrace>& batch,
                                          const ValueWeights& vw, double gamma) {
  GradientEstimate est;
  std::vector<double> costs;
  for (const EpisodeTrace& ep : batch) {
    if (ep.truncated) continue;
    costs.push_back(ep.discounted_cost);
    for (const TransitionRecord& rec : ep.records) {
      if (rec.score.size() == 0)
        throw std::invalid_argument("transition is missing its score vector");
      if (est.grad.size() == 0) est.grad = Vector::Zero(rec.score.size());
      est.grad += rec.score * td_error(vw, gamma, rec);
      ++est.n_transitions;
    }
  }
  est.n_episodes = static_cast<int>(costs.size());
  if (est.n_episodes == 0)
    throw std::invalid_argument("no untruncated episodes in the batch");
  // Monte-Carlo estimate of the gradient expectation: mean over episodes of
  // the per-episode sum. Without the 1/S the magnitude scales with the batch
  // size and no fixed step size can track the true gradient.
  est.grad /= static_cast<double>(est.n_episodes);
  double mean = 0.0;
  for (double c : costs) mean += c;
  mean /= costs.size();
  est.j_hat = mean;
  if (costs.size() > 1) {
    double ss = 0.0;
    for (double c : costs) ss += (c - mean) * (c - mean);
    est.j_std = std::sqrt(ss / (costs.size() - 1));
  }
  return est;
}

MembershipResult membership_check(const Vector& residual, const Matrix& vertices, double tol) {
  const int n = static_cast<int>(residual.size());
  if (vertices.rows() != n)
    throw std::invalid_argument("vertex dimension does not match the residual");
  const int V = static_cast<int>(vertices.cols());
  if (V == 0) return {};

  // Phase-1 simplex on [W; 1'] theta = [r; 1], theta >= 0: minimize the sum
  // of artificial variables. Bland's rule throughout, so no cycling.
  const int m = n + 1;
  const int total = V + m;  // structural + artificial columns
  Matrix T(m, total + 1);   // working tableau [B^-1 A | B^-1 b]
  T.setZero();
  T.block(0, 0, n, V) = vertices;
  T.block(n, 0, 1, V).setOnes();
  T.block(0, V, m, m).setIdentity();
  T.block(0, total, n, 1) = residual;
  T(n, total) = 1.0;
  for (int i = 0; i < m; ++i) {
    if (T(i, total) < 0.0) T.row(i) = -T.row(i);
  }

  std::vector<int> basis(m);
  for (int i = 0; i < m; ++i) basis[i] = V + i;

  const double pivot_tol = 1e-12;
  const int max_pivots = 10000;
  for (int pivot = 0; pivot < max_pivots; ++pivot) {
    // Reduced costs for cost = sum of artificials: c_j - sum_i c_{basis_i} T(i, j).
    int enter = -1;
    for (int j = 0; j < total; ++j) {
      double red = (j >= V) ? 1.0 : 0.0;
      for (int i = 0; i < m; ++i) {
        if (basis[i] >= V) red -= T(i, j);
      }
      if (red < -pivot_tol) {
        enter = j;  // Bland: smallest index
        break;
      }
    }
    if (enter < 0) break;

    int leave = -1;
    double best_ratio = 0.0;
    for (int i = 0; i < m; ++i) {
      if (T(i, enter) > pivot_tol) {
        double ratio = T(i, total) / T(i, enter);
        if (leave < 0 || ratio < best_ratio - pivot_tol ||
            (ratio < best_ratio + pivot_tol && basis[i] < basis[leave])) {
          leave = i;
          best_ratio = ratio;
        }
      }
    }
    if (leave < 0) break;  // unbounded column; cannot improve through it

    T.row(leave) /= T(leave, enter);
    for (int i = 0; i < m; ++i) {
      if (i != leave && std::abs(T(i, enter)) > 0.0) T.row(i) -= T(i, enter) * T.row(leave);
    }
    basis[leave] = enter;
  }

  double objective = 0.0;
  for (int i = 0; i < m; ++i) {
    if (basis[i] >= V) objective += T(i, total);
  }

  MembershipResult result;
  result.inside = objective <= tol;
  result.gap = result.inside ? 0.0 : objective;
  if (result.inside) {
    result.weights = Vector::Zero(V);
    for (int i = 0; i < m; ++i) {
      if (basis[i] < V) result.weights[basis[i]] = std::max(0.0, T(i, total));
    }
  }
  return result;
}

namespace {

struct ThetaOffsets {
  int A, B, b, K, W;
};

ThetaOffsets theta_offsets(const MpcConfig& cfg) {
  ThetaOffsets off;
  off.A = cfg.n + cfg.n_a;
  off.B = off.A + cfg.n * cfg.n;
  off.b = off.B + cfg.n * cfg.n_a;
  off.K = off.b + cfg.n;
  off.W = off.K + cfg.n_a * cfg.n;
  return off;
}

}  // namespace

ParametricNlp build_safe_update_nlp(const Vector& theta_prev, const Vector& grad, double alpha,
                                    const std::deque<ConstraintData>& dataset,
                                    const MpcConfig& cfg) {
  const int n = cfg.n;
  const int V = cfg.n_branch;
  const int nt = PolicyParams::n_theta(cfg);
  if (theta_prev.size() != nt || grad.size() != nt)
    throw std::invalid_argument("parameter size does not match the controller configuration");
  const int K = static_cast<int>(dataset.size());
  const ThetaOffsets off = theta_offsets(cfg);

  ParametricNlp nlp;
  nlp.n_w = nt + V * K;
  nlp.n_f = K * (n + 1);
  nlp.n_h = V * K;
  nlp.n_a = 0;
  nlp.n_theta = 0;

  auto vidx = [nt, V](int i, int k) { return nt + k * V + i; };
  auto eq_row = [n](int k) { return k * (n + 1); };
  std::vector<ConstraintData> data(dataset.begin(), dataset.end());

  nlp.cost = [theta_prev, grad, alpha, nt](const Vector& w, const Vector&, const Vector&) {
    Vector dt = w.head(nt) - theta_prev;
    return 0.5 * dt.squaredNorm() + alpha * grad.dot(dt);
  };
  nlp.cost_grad = [theta_prev, grad, alpha, nt](const Vector& w, const Vector&, const Vector&) {
    Vector g = Vector::Zero(w.size());
    g.head(nt) = w.head(nt) - theta_prev + alpha * grad;
    return g;
  };
  nlp.eq = [data, cfg, off, nt, n, V, vidx, eq_row](const Vector& w, const Vector&,
                                                    const Vector&) {
    PolicyParams p = PolicyParams::unflatten(w.head(nt), cfg);
    Vector f(static_cast<int>(data.size()) * (n + 1));
    for (int k = 0; k < static_cast<int>(data.size()); ++k) {
      Vector r = nominal_residual(p, data[k].s, data[k].a, data[k].s_plus);
      double sum = 0.0;
      for (int i = 0; i < V; ++i) {
        const double th = w[vidx(i, k)];
        r -= th * p.W[i];
        sum += th;
      }
      f.segment(eq_row(k), n) = r;
      f[eq_row(k) + n] = sum - 1.0;
    }
    return f;
  };
  nlp.eq_jac = [data, off, nt, n, V, vidx, eq_row, n_w = nlp.n_w,
                n_f = nlp.n_f](const Vector& w, const Vector&, const Vector&) {
    TripletList trips;
    for (int k = 0; k < static_cast<int>(data.size()); ++k) {
      const int row0 = eq_row(k);
      for (int p = 0; p < n; ++p) {
        for (int q = 0; q < n; ++q)
          trips.emplace_back(row0 + p, off.A + q * n + p, -data[k].s[q]);
        for (int q = 0; q < static_cast<int>(data[k].a.size()); ++q)
          trips.emplace_back(row0 + p, off.B + q * n + p, -data[k].a[q]);
        trips.emplace_back(row0 + p, off.b + p, -1.0);
        for (int i = 0; i < V; ++i) {
          trips.emplace_back(row0 + p, off.W + i * n + p, -w[vidx(i, k)]);
          trips.emplace_back(row0 + p, vidx(i, k), -w[off.W + i * n + p]);
        }
      }
      for (int i = 0; i < V; ++i) trips.emplace_back(row0 + n, vidx(i, k), 1.0);
    }
    SparseMatrix Jf(n_f, n_w);
    Jf.setFromTriplets(trips.begin(), trips.end());
    return Jf;
  };
  nlp.ineq = [V, K](const Vector& w, const Vector&, const Vector&) {
    return Vector(-w.tail(V * K));
  };
  nlp.ineq_jac = [nt, V, K, n_w = nlp.n_w](const Vector&, const Vector&, const Vector&) {
    TripletList trips;
    for (int j = 0; j < V * K; ++j) trips.emplace_back(j, nt + j, -1.0);
    SparseMatrix Jh(V * K, n_w);
    Jh.setFromTriplets(trips.begin(), trips.end());
    return Jh;
  };
  nlp.lag_hess = [data, off, nt, n, V, vidx, eq_row, n_w = nlp.n_w](
                     const Vector&, const Vector&, const Vector&, const Vector& lambda,
                     const Vector&) {
    TripletList trips;
    for (int j = 0; j < nt; ++j) trips.emplace_back(j, j, 1.0);
    // Bilinear terms -theta_{ik} W^i in the residual rows couple the vertex
    // parameters with the convex weights.
    for (int k = 0; k < static_cast<int>(data.size()); ++k) {
      for (int i = 0; i < V; ++i) {
        for (int p = 0; p < n; ++p) {
          const double lam = lambda[eq_row(k) + p];
          trips.emplace_back(off.W + i * n + p, vidx(i, k), -lam);
          trips.emplace_back(vidx(i, k), off.W + i * n + p, -lam);
        }
      }
    }
    SparseMatrix H(n_w, n_w);
    H.setFromTriplets(trips.begin(), trips.end());
    return H;
  };
  nlp.initial_primal = [theta_prev, nt, V, K](const Vector&, const Vector&) {
    Vector w0(nt + V * K);
    w0.head(nt) = theta_prev;
    w0.tail(V * K).setConstant(1.0 / V);  // flat interior start for the hull weights
    return w0;
  };
  return nlp;
}

namespace {

// Vertex indices of the planar convex hull (monotone chain); for other
// dimensions, the coordinate-extreme points. Deterministic, ties by index.
std::vector<int> extreme_indices(const std::vector<Vector>& pts) {
  const int n = static_cast<int>(pts.size());
  std::vector<int> out;
  if (n == 0) return out;
  if (pts[0].size() != 2 || n <= 2) {
    std::vector<char> keep(n, 0);
    for (Eigen::Index axis = 0; axis < pts[0].size(); ++axis) {
      int lo = 0, hi = 0;
      for (int k = 1; k < n; ++k) {
        if (pts[k][axis] < pts[lo][axis]) lo = k;
        if (pts[k][axis] > pts[hi][axis]) hi = k;
      }
      keep[lo] = keep[hi] = 1;
    }
    for (int k = 0; k < n; ++k)
      if (keep[k]) out.push_back(k);
    return out;
  }

  std::vector<int> order(n);
  for (int k = 0; k < n; ++k) order[k] = k;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (pts[a][0] != pts[b][0]) return pts[a][0] < pts[b][0];
    if (pts[a][1] != pts[b][1]) return pts[a][1] < pts[b][1];
    return a < b;
  });
  auto cross = [&pts](int o, int a, int b) {
    return (pts[a][0] - pts[o][0]) * (pts[b][1] - pts[o][1]) -
           (pts[a][1] - pts[o][1]) * (pts[b][0] - pts[o][0]);
  };
  std::vector<int> hull;
  for (int k = 0; k < n; ++k) {
    while (hull.size() >= 2 && cross(hull[hull.size() - 2], hull.back(), order[k]) <= 0.0)
      hull.pop_back();
    hull.push_back(order[k]);
  }
  const std::size_t lower = hull.size() + 1;
  for (int k = n - 2; k >= 0; --k) {
    while (hull.size() >= lower && cross(hull[hull.size() - 2], hull.back(), order[k]) <= 0.0)
      hull.pop_back();
    hull.push_back(order[k]);
  }
  hull.pop_back();
  std::sort(hull.begin(), hull.end());
  hull.erase(std::unique(hull.begin(), hull.end()), hull.end());
  return hull;
}

}  // namespace

SafeUpdateResult safe_update(const Vector& theta_prev, const Vector& grad, double alpha,
                             const std::deque<ConstraintData>& dataset, const MpcConfig& cfg,
                             const SafeUpdateOptions& opts) {
  SafeUpdateResult result;
  result.theta = theta_prev;

  if (alpha == 0.0) {
    // Degenerate objective: theta_prev itself minimizes, so just decide
    // feasibility there and return it bit-exactly.
    PolicyParams p = PolicyParams::unflatten(theta_prev, cfg);
    Matrix W(cfg.n, cfg.n_branch);
    for (int i = 0; i < cfg.n_branch; ++i) W.col(i) = p.W[i];
    bool ok = true;
    for (const ConstraintData& c : dataset) {
      if (!membership_check(nominal_residual(p, c.s, c.a, c.s_plus), W).inside) {
        ok = false;
        break;
      }
    }
    result.accepted = ok;
    result.report.converged = ok;
    if (!ok) result.report.failure = "previous parameters violate the hull constraint";
    return result;
  }

  const Vector empty;
  const Vector d0 = Vector::Zero(0);
  auto solve_subset = [&](const std::deque<ConstraintData>& subset) {
    ParametricNlp nlp = build_safe_update_nlp(theta_prev, grad, alpha, subset, cfg);
    SolverOptions sopt;
    sopt.tol = opts.tol;
    sopt.max_iterations = opts.max_iterations;
    SolveResult sol = solve_nlp(nlp, empty, empty, d0, opts.tau_final, sopt);
    if (!sol.report.converged) {
      sopt.tol = opts.retry_tol;
      sol = solve_nlp(nlp, empty, empty, d0, opts.tau_final, sopt);
    }
    return sol;
  };

  const std::vector<ConstraintData> data(dataset.begin(), dataset.end());
  const int K = static_cast<int>(data.size());
  if (K == 0) {
    SolveResult sol = solve_subset({});
    result.report = sol.report;
    if (sol.report.converged) {
      result.theta = sol.z.w.head(theta_prev.size());
      result.accepted = true;
    }
    return result;
  }

  // Working set seeded with the residuals that are extreme at theta_prev and
  // at the unconstrained target: only they can shape the updated hull.
  auto residuals_at = [&](const Vector& th) {
    PolicyParams p = PolicyParams::unflatten(th, cfg);
    std::vector<Vector> r(K);
    for (int k = 0; k < K; ++k) r[k] = nominal_residual(p, data[k].s, data[k].a, data[k].s_plus);
    return r;
  };
  std::vector<char> in_set(K, 0);
  for (int k : extreme_indices(residuals_at(theta_prev))) in_set[k] = 1;
  for (int k : extreme_indices(residuals_at(theta_prev - alpha * grad))) in_set[k] = 1;

  int total_iterations = 0;
  for (int round = 0; round < opts.max_rounds; ++round) {
    std::deque<ConstraintData> subset;
    for (int k = 0; k < K; ++k)
      if (in_set[k]) subset.push_back(data[k]);

    SolveResult sol = solve_subset(subset);
    total_iterations += sol.report.iterations;
    result.report = sol.report;
    result.report.iterations = total_iterations;
    if (!sol.report.converged) return result;

    // Certify the whole dataset at the candidate parameters.
    const Vector th = sol.z.w.head(theta_prev.size());
    PolicyParams p = PolicyParams::unflatten(th, cfg);
    Matrix W(cfg.n, cfg.n_branch);
    for (int i = 0; i < cfg.n_branch; ++i) W.col(i) = p.W[i];
    std::vector<std::pair<double, int>> violations;  // (-gap, index): worst first
    for (int k = 0; k < K; ++k) {
      if (in_set[k]) continue;
      MembershipResult mr =
          membership_check(nominal_residual(p, data[k].s, data[k].a, data[k].s_plus), W);
      if (!mr.inside) violations.emplace_back(-mr.gap, k);
    }
    if (violations.empty()) {
      result.theta = th;
      result.accepted = true;
      return result;
    }
    std::sort(violations.begin(), violations.end());
    const int admit = std::min<int>(static_cast<int>(violations.size()), opts.max_additions);
    for (int v = 0; v < admit; ++v) in_set[violations[v].second] = 1;
  }
  result.report.converged = false;
  result.accepted = false;
  result.report.failure = "working set did not settle";
  result.theta = theta_prev;
  return result;
}

}  // namespace mpcrl
