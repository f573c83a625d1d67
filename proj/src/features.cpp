#include "wharm/features.hpp"

#include <algorithm>
#include <cmath>

namespace wharm {

namespace {

void check_dims(const MultiIndex& alpha, std::size_t n) {
  if (alpha.dim() != n) {
    throw FeatureError("multi-index dimension " + std::to_string(alpha.dim()) +
                       " does not match input dimension " + std::to_string(n));
  }
}

}  // namespace

MultiIndex::MultiIndex(std::size_t dim, std::vector<IndexTerm> terms) : dim_(dim), terms_(std::move(terms)) {
  std::erase_if(terms_, [](const IndexTerm& t) { return t.power == 0; });
  std::sort(terms_.begin(), terms_.end());
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    if (terms_[i].index >= dim_) throw FeatureError("multi-index coordinate out of range");
    if (i > 0 && terms_[i].index == terms_[i - 1].index) {
      throw FeatureError("multi-index lists a coordinate twice");
    }
  }
}

MultiIndex MultiIndex::from_dense(std::span<const unsigned> entries) {
  std::vector<IndexTerm> terms;
  for (std::size_t j = 0; j < entries.size(); ++j) {
    if (entries[j] != 0) terms.push_back({j, entries[j]});
  }
  return MultiIndex(entries.size(), std::move(terms));
}

MultiIndex MultiIndex::one_hot(std::size_t dim, std::size_t index, unsigned power) {
  return MultiIndex(dim, {{index, power}});
}

unsigned MultiIndex::operator[](std::size_t coordinate) const {
  auto it = std::lower_bound(terms_.begin(), terms_.end(), IndexTerm{coordinate, 0},
                             [](const IndexTerm& a, const IndexTerm& b) { return a.index < b.index; });
  return (it != terms_.end() && it->index == coordinate) ? it->power : 0;
}

std::vector<unsigned> MultiIndex::dense() const {
  std::vector<unsigned> out(dim_, 0);
  for (const auto& t : terms_) out[t.index] = t.power;
  return out;
}

unsigned MultiIndex::l1_norm() const {
  unsigned s = 0;
  for (const auto& t : terms_) s += t.power;
  return s;
}

unsigned MultiIndex::max_norm() const {
  unsigned m = 0;
  for (const auto& t : terms_) m = std::max(m, t.power);
  return m;
}

double MultiIndex::l2_norm() const {
  double s = 0.0;
  for (const auto& t : terms_) s += double(t.power) * double(t.power);
  return std::sqrt(s);
}

MultiIndex MultiIndex::without(std::size_t coordinate) const {
  MultiIndex out = *this;
  std::erase_if(out.terms_, [&](const IndexTerm& t) { return t.index == coordinate; });
  return out;
}

double cosine_feature(const MultiIndex& alpha, std::span<const double> x) {
  check_dims(alpha, x.size());
  double v = 1.0;
  for (const auto& t : alpha.terms()) v *= std::cos(double(t.power) * x[t.index]);
  return v;
}

double cosine_sum_expansion(const MultiIndex& alpha, std::span<const double> x) {
  check_dims(alpha, x.size());
  const auto terms = alpha.terms();
  const std::size_t s = terms.size();
  if (s == 0) return 1.0;
  if (s >= 8 * sizeof(std::size_t)) throw FeatureError("support too large for sign-pattern expansion");

  // Each sign pattern Q and its negation -Q give the same cosine, so only the
  // patterns with a fixed sign on the first entry are summed and doubled.
  const std::size_t half = std::size_t{1} << (s - 1);
  const double first = double(terms[0].power) * x[terms[0].index];
  double sum = 0.0;
  for (std::size_t mask = 0; mask < half; ++mask) {
    double phase = first;
    for (std::size_t j = 1; j < s; ++j) {
      const double a = double(terms[j].power) * x[terms[j].index];
      phase += ((mask >> (j - 1)) & 1U) ? -a : a;
    }
    sum += std::cos(phase);
  }
  return sum / double(half);
}

std::vector<double> cosine_feature_gradient(const MultiIndex& alpha, std::span<const double> x) {
  check_dims(alpha, x.size());
  std::vector<double> grad(x.size(), 0.0);
  const auto terms = alpha.terms();
  for (std::size_t j = 0; j < terms.size(); ++j) {
    const double a = double(terms[j].power);
    double g = -a * std::sin(a * x[terms[j].index]);
    for (std::size_t l = 0; l < terms.size(); ++l) {
      if (l != j) g *= std::cos(double(terms[l].power) * x[terms[l].index]);
    }
    grad[terms[j].index] = g;
  }
  return grad;
}

Complex holo_feature(const MultiIndex& alpha, std::span<const Complex> z) {
  check_dims(alpha, z.size());
  Complex phase{0.0, 0.0};
  for (const auto& t : alpha.terms()) phase += double(t.power) * z[t.index];
  return std::exp(Complex{0.0, 1.0} * phase);
}

Complex holo_feature(const MultiIndex& alpha, std::span<const double> x) {
  check_dims(alpha, x.size());
  double phase = 0.0;
  for (const auto& t : alpha.terms()) phase += double(t.power) * x[t.index];
  return std::polar(1.0, phase);
}

std::vector<Complex> holo_feature_gradient(const MultiIndex& alpha, std::span<const double> x) {
  const Complex value = holo_feature(alpha, x);
  std::vector<Complex> grad(x.size(), Complex{});
  for (const auto& t : alpha.terms()) grad[t.index] = Complex{0.0, double(t.power)} * value;
  return grad;
}

Complex cos_complex(Complex z) {
  const double x = z.real();
  const double y = z.imag();
  return {std::cos(x) * std::cosh(y), -std::sin(x) * std::sinh(y)};
}

double whiten_scale(const MultiIndex& alpha) {
  if (alpha.is_zero()) throw FeatureError("the zero multi-index has no whitening scale");
  return alpha.l2_norm();
}

}  // namespace wharm
