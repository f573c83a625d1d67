#pragma once

#include <Eigen/Dense>

#include "wharm/feature_bank.hpp"

namespace wharm {

enum class Whitening { Applied, None };

/// Largest domain dimension accepted by the dense quadrature routines.
inline constexpr std::size_t kMaxQuadratureDim = 3;

/// Tuning matrix Sigma_ij = int grad phi_i . grad phi_j dx by tensor-product
/// midpoint quadrature with `points_per_dim` nodes per axis.
///
/// Cosine banks integrate over [0, pi]^n and scale by (2/pi)^n. Holomorphic
/// banks integrate the Hermitian product conj(grad psi_i) . grad psi_j over the
/// full period [-pi, pi]^n and scale by (2 pi)^-n; the imaginary part vanishes
/// and the real part is returned.
Eigen::MatrixXd tuning_matrix_quadrature(const FeatureBank& bank, int points_per_dim,
                                         Whitening whitening = Whitening::Applied);

}  // namespace wharm
