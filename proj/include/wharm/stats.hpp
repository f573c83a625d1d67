#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <variant>
#include <vector>

#include "wharm/detect.hpp"
#include "wharm/optim.hpp"

namespace wharm {

class StatsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Regularized incomplete beta function I_x(a, b), evaluated by Lentz's
/// continued fraction on whichever tail converges fastest.
double regularized_incomplete_beta(double a, double b, double x);

double student_t_cdf(double nu, double t);

/// Quantile of Student's t with `nu` degrees of freedom, by bracketing and
/// bisection on student_t_cdf. Throws StatsError for p outside (0, 1) or nu < 1.
double t_inverse_cdf(int nu, double p);

/// (mean / unbiased sd) * sqrt(n). Throws StatsError when n < 2 or sd == 0.
double t_statistic(std::span<const double> samples);

enum class Decision { AcceptH1, RejectH1 };
std::string to_string(Decision d);

struct BiasTestReport {
  std::vector<double> samples;
  double mean = 0.0;
  double sd = 0.0;
  double statistic = 0.0;
  double critical = 0.0;
  double confidence = 0.01;
  Decision decision = Decision::RejectH1;

  /// Recomputes statistic, critical value and decision from `samples`.
  /// A zero-spread sample gets statistic 0 (all zero), or +/-infinity by the
  /// sign of its mean, instead of the t_statistic error.
  static BiasTestReport from_samples(std::vector<double> samples, double confidence);
};

/// Collects `trials` continuity-bias samples from `task_family(trial)` and tests
/// H1: epsilon > 0 at level `confidence` (accept iff T > t_{trials-1}^{-1}(1 - c)).
BiasTestReport run_bias_test(std::size_t trials, double confidence,
                             const std::function<double(std::size_t)>& task_family);

/// Continuous target drawn on a whitened cosine bank: coefficients
/// w_a ~ Normal(0, 1 / (1 + ||a||^2)^2), bias 0.
class HarmonicTarget {
 public:
  HarmonicTarget(std::shared_ptr<const FeatureBank> bank, std::vector<double> weights);

  double operator()(std::span<const double> pixels) const;
  const std::vector<double>& weights() const { return weights_; }
  double energy() const;
  /// Upper bound on |dt/dx_p| in pixel units: pi * sum |w_a|, since every
  /// whitened cosine feature has a gradient of norm at most one.
  double lipschitz_bound() const;

 private:
  std::shared_ptr<const FeatureBank> bank_;
  std::vector<double> weights_;
};

HarmonicTarget random_harmonic_target(std::shared_ptr<const FeatureBank> bank, std::uint64_t seed);

/// Pool-of-origin routed loss: natural test samples scored by h, adversarial
/// ones by f. Classification uses the 0-1 loss.
double switching_loss(const Classifier& h, const Classifier& f, const LabeledSet& test_nat,
                      const LabeledSet& test_adv);

/// 0-1 loss of one classifier over the pooled test sets.
double pooled_error(const Classifier& g, const LabeledSet& test_nat, const LabeledSet& test_adv);

/// Two-superclass relabelling: superclass[label] in {0, 1}.
struct BinaryTask {
  std::array<int, 10> superclass{};
};

/// Seeded balanced split of the ten labels into two groups of five.
BinaryTask random_binary_task(std::uint64_t seed);

struct RegressionTask {
  std::shared_ptr<const HarmonicTarget> target;
};

using BiasTask = std::variant<BinaryTask, RegressionTask>;

/// Training and held-out pools shared by all trials of a bias test.
struct BiasData {
  std::shared_ptr<const FeatureBank> bank;  // cosine kind
  Partition train;
  LabeledSet test_nat;
  LabeledSet test_adv;
};

struct BiasSample {
  double epsilon = 0.0;
  double union_loss = 0.0;
  double switching_loss = 0.0;
};

/// Trains h on S_nat, f on S_adv and g on S (real cosine classifiers with fresh
/// seeds derived from `seed`) and returns eps = loss(g) - switching loss(h, f)
/// on the held-out pools. Classification tasks train with cross-entropy and
/// score 0-1 loss; regression tasks train and score mean squared error.
BiasSample continuity_bias_trial(const BiasData& data, const BiasTask& task, const TrainConfig& train_cfg,
                                 std::uint64_t seed);

}  // namespace wharm
