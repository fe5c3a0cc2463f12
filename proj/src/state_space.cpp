#include "ctid/state_space.hpp"

#include <stdexcept>
#include <unsupported/Eigen/MatrixFunctions>

namespace ctid {

Eigen::MatrixXd companion_dynamics(const Polynomial& denominator) {
  const int n = denominator.degree();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  const double lead = denominator.leading();
  for (int j = 0; j + 1 < n; ++j) a(j, j + 1) = 1.0;
  for (int j = 0; j < n; ++j) a(n - 1, j) = -denominator[j] / lead;
  return a;
}

DiscreteMaps zoh_maps(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, double sample_period) {
  if (!(sample_period > 0.0)) throw std::invalid_argument("zoh_maps: sample period must be positive");
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(n + 1, n + 1);
  aug.topLeftCorner(n, n) = a * sample_period;
  aug.topRightCorner(n, 1) = b * sample_period;
  const Eigen::MatrixXd e = aug.exp();
  return {e.topLeftCorner(n, n), e.topRightCorner(n, 1)};
}

std::vector<double> characteristic_polynomial(const Eigen::MatrixXd& m) {
  const Eigen::Index n = m.rows();
  if (n == 0) return {1.0};
  Eigen::MatrixXd h = m;
  if (n > 2) h = Eigen::HessenbergDecomposition<Eigen::MatrixXd>(m).matrixH();

  // p[k] holds det(xI - H[0:k,0:k]) in ascending order.
  std::vector<std::vector<double>> p(static_cast<std::size_t>(n) + 1);
  p[0] = {1.0};
  for (Eigen::Index k = 1; k <= n; ++k) {
    const auto& prev = p[static_cast<std::size_t>(k - 1)];
    std::vector<double> cur(static_cast<std::size_t>(k) + 1, 0.0);
    for (std::size_t i = 0; i < prev.size(); ++i) {
      cur[i + 1] += prev[i];
      cur[i] -= h(k - 1, k - 1) * prev[i];
    }
    double sub = 1.0;
    for (Eigen::Index i = k - 1; i >= 1; --i) {
      sub *= h(i, i - 1);
      const double w = h(i - 1, k - 1) * sub;
      const auto& pi = p[static_cast<std::size_t>(i - 1)];
      for (std::size_t j = 0; j < pi.size(); ++j) cur[j] -= w * pi[j];
    }
    p[static_cast<std::size_t>(k)] = std::move(cur);
  }
  std::vector<double> out(p.back().rbegin(), p.back().rend());
  return out;
}

}  // namespace ctid
