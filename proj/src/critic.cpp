#include "mpcrl/critic.hpp"

#include <stdexcept>

namespace mpcrl {

int critic_feature_dim(int n) { return 1 + n + n * (n + 1) / 2; }

Vector critic_features(const Vector& s) {
  const int n = static_cast<int>(s.size());
  Vector phi(critic_feature_dim(n));
  phi[0] = 1.0;
  phi.segment(1, n) = s;
  int idx = 1 + n;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) phi[idx++] = s[i] * s[j];
  return phi;
}

ValueWeights lstd_fit_features(const std::vector<Vector>& phi, const std::vector<Vector>& phi_plus,
                               const std::vector<double>& cost, double gamma, double sv_cutoff) {
  if (phi.empty() || phi.size() != phi_plus.size() || phi.size() != cost.size())
    throw std::invalid_argument("lstd_fit: empty or inconsistent batch");
  const int k = static_cast<int>(phi.front().size());
  Matrix A = Matrix::Zero(k, k);
  Vector b = Vector::Zero(k);
  for (size_t i = 0; i < phi.size(); ++i) {
    A += phi[i] * (phi[i] - gamma * phi_plus[i]).transpose();
    b += phi[i] * cost[i];
  }
  Eigen::JacobiSVD<Matrix> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double cutoff = sv_cutoff * std::max(sv[0], 1e-300);
  ValueWeights out;
  out.min_sv = sv[sv.size() - 1];
  Vector scaled = svd.matrixU().transpose() * b;
  for (int i = 0; i < sv.size(); ++i) {
    if (sv[i] > cutoff) {
      scaled[i] /= sv[i];
      ++out.rank;
    } else {
      scaled[i] = 0.0;
    }
  }
  out.v = svd.matrixV() * scaled;
  out.degenerate = (out.rank < k);
  return out;
}

ValueWeights lstd_fit(const std::vector<TransitionRecord>& batch, double gamma, double sv_cutoff) {
  std::vector<Vector> phi, phi_plus;
  std::vector<double> cost;
  phi.reserve(batch.size());
  phi_plus.reserve(batch.size());
  cost.reserve(batch.size());
  for (const auto& rec : batch) {
    phi.push_back(critic_features(rec.s));
    phi_plus.push_back(critic_features(rec.s_plus));
    cost.push_back(rec.stage_cost);
  }
  return lstd_fit_features(phi, phi_plus, cost, gamma, sv_cutoff);
}

double value_of(const ValueWeights& vw, const Vector& s) {
  return critic_features(s).dot(vw.v);
}

double td_error(const ValueWeights& vw, double gamma, const TransitionRecord& rec) {
  return rec.stage_cost + gamma * value_of(vw, rec.s_plus) - value_of(vw, rec.s);
}

}  // namespace mpcrl
