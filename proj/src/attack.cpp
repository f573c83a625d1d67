#include "wharm/attack.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace wharm {

double reflect_project(double x) {
  if (x >= 0.0 && x <= 1.0) return x;
  const double whole = std::trunc(x);
  const double frac = x - whole;
  const bool even = std::fmod(whole, 2.0) == 0.0;
  if (x > 1.0) return even ? frac : 1.0 - frac;
  return even ? -frac : 1.0 + frac;
}

void AttackConfig::validate() const {
  if (!(radius > 0.0)) throw std::invalid_argument("attack radius must be positive");
  if (steps < 1) throw std::invalid_argument("attack needs at least one step");
  if (!(step_size > 0.0)) throw std::invalid_argument("attack step size must be positive");
}

namespace {

// splitmix64 finalizer; decorrelates (cfg.seed, sample) pairs.
std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

std::vector<double> pgd(const Classifier& c, std::span<const double> pixels, int label, const AttackConfig& cfg,
                        std::uint64_t sample_seed) {
  cfg.validate();
  if (cfg.target && (*cfg.target < 0 || std::size_t(*cfg.target) >= c.num_labels())) {
    throw std::invalid_argument("attack target outside the label range");
  }
  const std::size_t n = pixels.size();
  std::mt19937_64 rng(mix(cfg.seed, sample_seed));
  std::uniform_real_distribution<double> start(-cfg.radius, cfg.radius);

  std::vector<double> x(n);
  for (std::size_t p = 0; p < n; ++p) x[p] = reflect_project(pixels[p] + start(rng));

  const int loss_label = cfg.target ? *cfg.target : label;
  const double direction = cfg.target ? -1.0 : 1.0;
  for (std::size_t it = 0; it < cfg.steps; ++it) {
    const auto g = input_gradient(c, x, loss_label, cfg.aware_extra);
    for (std::size_t p = 0; p < n; ++p) {
      const double moved = x[p] + direction * cfg.step_size * sign(g.grad[p]);
      const double clipped = std::clamp(moved, pixels[p] - cfg.radius, pixels[p] + cfg.radius);
      x[p] = reflect_project(clipped);
    }
  }
  return x;
}

}  // namespace wharm
