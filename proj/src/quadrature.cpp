#include "wharm/quadrature.hpp"

#include <cmath>
#include <numbers>

namespace wharm {

Eigen::MatrixXd tuning_matrix_quadrature(const FeatureBank& bank, int points_per_dim, Whitening whitening) {
  const std::size_t n = bank.dim();
  if (n == 0 || n > kMaxQuadratureDim) {
    throw FeatureError("tuning_matrix_quadrature supports domains of dimension 1.." +
                       std::to_string(kMaxQuadratureDim) + ", got " + std::to_string(n));
  }
  if (points_per_dim < 1) throw FeatureError("tuning_matrix_quadrature needs at least one node per axis");

  const bool holo = bank.kind() == FeatureKind::Holomorphic;
  const double lo = holo ? -std::numbers::pi : 0.0;
  const double length = holo ? 2.0 * std::numbers::pi : std::numbers::pi;
  const double h = length / points_per_dim;
  // Midpoint weight h^n times the normalization (2/pi)^n or (2 pi)^-n.
  const double weight = std::pow(h / (holo ? length : std::numbers::pi / 2.0), double(n));

  const std::size_t K = bank.size();
  std::vector<double> inv(K, 1.0);
  if (whitening == Whitening::Applied) {
    for (std::size_t k = 0; k < K; ++k) inv[k] = 1.0 / bank.scales()[k];
  }

  std::size_t total = 1;
  for (std::size_t d = 0; d < n; ++d) total *= std::size_t(points_per_dim);

  const auto rows = Eigen::Index(n);
  const auto cols = Eigen::Index(K);
  Eigen::MatrixXd real_grads(rows, cols);
  Eigen::MatrixXcd holo_grads(rows, cols);
  Eigen::MatrixXcd holo_sigma = Eigen::MatrixXcd::Zero(cols, cols);
  Eigen::MatrixXd real_sigma = Eigen::MatrixXd::Zero(cols, cols);
  std::vector<double> x(n);
  for (std::size_t node = 0; node < total; ++node) {
    std::size_t rest = node;
    for (std::size_t d = 0; d < n; ++d) {
      x[d] = lo + (double(rest % std::size_t(points_per_dim)) + 0.5) * h;
      rest /= std::size_t(points_per_dim);
    }
    for (std::size_t k = 0; k < K; ++k) {
      const auto& alpha = bank.indices()[k];
      if (holo) {
        const auto g = holo_feature_gradient(alpha, x);
        for (std::size_t d = 0; d < n; ++d) holo_grads(Eigen::Index(d), Eigen::Index(k)) = g[d] * inv[k];
      } else {
        const auto g = cosine_feature_gradient(alpha, x);
        for (std::size_t d = 0; d < n; ++d) real_grads(Eigen::Index(d), Eigen::Index(k)) = g[d] * inv[k];
      }
    }
    if (holo) {
      holo_sigma.noalias() += holo_grads.adjoint() * holo_grads;
    } else {
      real_sigma.noalias() += real_grads.transpose() * real_grads;
    }
  }
  return (holo ? Eigen::MatrixXd(holo_sigma.real()) : real_sigma) * weight;
}

}  // namespace wharm
