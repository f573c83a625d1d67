#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "wharm/model.hpp"

namespace wharm {

/// Folds a coordinate back into [0, 1] by mirror reflection at both ends
/// (a triangle wave of period 2). With [x] the integer part truncated toward
/// zero and fp(x) = x - [x]:
///   x > 1:  fp(x)       if [x] even, 1 - fp(x) otherwise
///   x < 0: -fp(x)       if [x] even, 1 + fp(x) otherwise
double reflect_project(double x);

struct AttackConfig {
  double radius = 0.3;
  std::size_t steps = 40;
  double step_size = 0.01;
  std::optional<int> target;
  /// Whether the attacker's softmax includes the zero-class logit.
  bool aware_extra = true;
  std::uint64_t seed = 0;

  void validate() const;
};

/// l-infinity PGD with a uniform random start in the ball. Each step moves
/// along sign(dL/dx) (ascent on the true-label loss, or descent on the
/// target-label loss), clamps the deviation from `pixels` into the ball and
/// then reflects every coordinate into [0, 1]. `sample_seed` is mixed with
/// cfg.seed so different samples get independent starts.
std::vector<double> pgd(const Classifier& c, std::span<const double> pixels, int label, const AttackConfig& cfg,
                        std::uint64_t sample_seed = 0);

}  // namespace wharm
