#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace wharm {

using Complex = std::complex<double>;

class FeatureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One nonzero entry of a multi-index: frequency `power` on coordinate `index`.
struct IndexTerm {
  std::size_t index = 0;
  unsigned power = 0;

  friend bool operator==(const IndexTerm&, const IndexTerm&) = default;
  friend auto operator<=>(const IndexTerm&, const IndexTerm&) = default;
};

/// Nonnegative integer frequency vector over an n-dimensional domain, stored
/// sparsely. Entries are kept sorted by coordinate and zero entries dropped.
class MultiIndex {
 public:
  MultiIndex() = default;
  MultiIndex(std::size_t dim, std::vector<IndexTerm> terms);

  static MultiIndex from_dense(std::span<const unsigned> entries);
  static MultiIndex one_hot(std::size_t dim, std::size_t index, unsigned power = 1);

  std::size_t dim() const { return dim_; }
  std::span<const IndexTerm> terms() const { return terms_; }
  std::size_t support_size() const { return terms_.size(); }
  bool is_zero() const { return terms_.empty(); }

  unsigned operator[](std::size_t coordinate) const;
  std::vector<unsigned> dense() const;

  unsigned l1_norm() const;
  unsigned max_norm() const;
  double l2_norm() const;

  /// Copy with the entry at `coordinate` set to zero.
  MultiIndex without(std::size_t coordinate) const;

  friend bool operator==(const MultiIndex&, const MultiIndex&) = default;
  friend auto operator<=>(const MultiIndex&, const MultiIndex&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<IndexTerm> terms_;
};

/// prod_j cos(alpha_j x_j), x in the feature domain [0, pi]^n.
double cosine_feature(const MultiIndex& alpha, std::span<const double> x);

/// The same eigenfunction written as an average of plain cosines over sign
/// patterns: 2^-s sum_Q cos(Q alpha . x), where Q ranges over the 2^s sign
/// flips of the s nonzero entries of alpha. Zero entries contribute cos(0) = 1
/// and are skipped.
double cosine_sum_expansion(const MultiIndex& alpha, std::span<const double> x);

/// Gradient of cosine_feature with respect to x (dense, length n).
std::vector<double> cosine_feature_gradient(const MultiIndex& alpha, std::span<const double> x);

/// e^{i alpha . z}. Unit magnitude for real z.
Complex holo_feature(const MultiIndex& alpha, std::span<const Complex> z);
Complex holo_feature(const MultiIndex& alpha, std::span<const double> x);

/// Gradient of e^{i alpha . x} along the real coordinates: i alpha_j e^{i alpha . x}.
std::vector<Complex> holo_feature_gradient(const MultiIndex& alpha, std::span<const double> x);

/// Holomorphic extension of cosine: cos(x + iy) = cos(x) cosh(y) - i sin(x) sinh(y).
/// (The "+ i" form is cos of the conjugate and fails Cauchy-Riemann.)
Complex cos_complex(Complex z);

/// Whitening divisor ||alpha||_2. Throws FeatureError for the zero index, which
/// has no gradient and is represented by the bias instead.
double whiten_scale(const MultiIndex& alpha);

}  // namespace wharm
