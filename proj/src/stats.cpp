#include "wharm/stats.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

namespace wharm {

namespace {

// Continued fraction for I_x(a, b), modified Lentz.
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw StatsError("incomplete beta continued fraction did not converge");
}

// x^a (1-x)^b / (a B(a, b)) with 1 - x passed separately to keep precision.
double beta_front(double a, double b, double x, double one_minus_x) {
  const double log_beta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  return std::exp(a * std::log(x) + b * std::log(one_minus_x) - log_beta);
}

double incomplete_beta(double a, double b, double x, double one_minus_x) {
  if (x <= 0.0) return 0.0;
  if (one_minus_x <= 0.0) return 1.0;
  if (x < (a + 1.0) / (a + b + 2.0)) return beta_front(a, b, x, one_minus_x) * beta_continued_fraction(a, b, x) / a;
  return 1.0 - beta_front(b, a, one_minus_x, x) * beta_continued_fraction(b, a, one_minus_x) / b;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw StatsError("incomplete beta needs positive shape parameters");
  if (!(x >= 0.0 && x <= 1.0)) throw StatsError("incomplete beta argument outside [0, 1]");
  return incomplete_beta(a, b, x, 1.0 - x);
}

double student_t_cdf(double nu, double t) {
  if (!(nu > 0.0)) throw StatsError("degrees of freedom must be positive");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double t2 = t * t;
  // Tail mass P(|T| > |t|) = I_{nu/(nu+t^2)}(nu/2, 1/2).
  const double tail = incomplete_beta(nu / 2.0, 0.5, nu / (nu + t2), t2 / (nu + t2));
  return t >= 0.0 ? 1.0 - 0.5 * tail : 0.5 * tail;
}

double t_inverse_cdf(int nu, double p) {
  if (nu < 1) throw StatsError("degrees of freedom must be at least 1");
  if (!(p > 0.0 && p < 1.0)) throw StatsError("quantile probability must lie in (0, 1)");
  if (p == 0.5) return 0.0;
  if (p < 0.5) return -t_inverse_cdf(nu, 1.0 - p);
  double lo = 0.0;
  double hi = 1.0;
  while (student_t_cdf(nu, hi) < p) {
    lo = hi;
    hi *= 2.0;
    if (!std::isfinite(hi)) throw StatsError("quantile bracket overflow");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (student_t_cdf(nu, mid) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

namespace {

struct Moments {
  double mean = 0.0;
  double sd = 0.0;
};

Moments moments(std::span<const double> samples) {
  const double n = double(samples.size());
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : samples) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

}  // namespace

double t_statistic(std::span<const double> samples) {
  if (samples.size() < 2) throw StatsError("t statistic needs at least two samples");
  const auto m = moments(samples);
  if (!(m.sd > 0.0)) throw StatsError("t statistic undefined for a zero-spread sample");
  return m.mean / m.sd * std::sqrt(double(samples.size()));
}

std::string to_string(Decision d) { return d == Decision::AcceptH1 ? "accepted" : "rejected"; }

BiasTestReport BiasTestReport::from_samples(std::vector<double> samples, double confidence) {
  if (samples.size() < 2) throw StatsError("bias test needs at least two trials");
  if (!(confidence > 0.0 && confidence < 1.0)) throw StatsError("confidence must lie in (0, 1)");
  BiasTestReport r;
  const auto m = moments(samples);
  r.mean = m.mean;
  r.sd = m.sd;
  if (m.sd > 0.0) {
    r.statistic = t_statistic(samples);
  } else if (m.mean == 0.0) {
    r.statistic = 0.0;
  } else {
    r.statistic = m.mean > 0.0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
  }
  r.samples = std::move(samples);
  r.confidence = confidence;
  r.critical = t_inverse_cdf(int(r.samples.size()) - 1, 1.0 - confidence);
  r.decision = r.statistic > r.critical ? Decision::AcceptH1 : Decision::RejectH1;
  return r;
}

BiasTestReport run_bias_test(std::size_t trials, double confidence,
                             const std::function<double(std::size_t)>& task_family) {
  if (trials < 2) throw StatsError("bias test needs at least two trials");
  std::vector<double> samples;
  samples.reserve(trials);
  for (std::size_t t = 0; t < trials; ++t) {
    const double eps = task_family(t);
    if (!std::isfinite(eps)) throw StatsError("non-finite continuity-bias sample in trial " + std::to_string(t));
    samples.push_back(eps);
  }
  return BiasTestReport::from_samples(std::move(samples), confidence);
}

HarmonicTarget::HarmonicTarget(std::shared_ptr<const FeatureBank> bank, std::vector<double> weights)
    : bank_(std::move(bank)), weights_(std::move(weights)) {
  if (bank_->kind() != FeatureKind::Cosine) throw StatsError("harmonic targets live on cosine banks");
  if (weights_.size() != bank_->size()) throw StatsError("target coefficient count does not match the bank");
}

double HarmonicTarget::operator()(std::span<const double> pixels) const {
  thread_local std::vector<double> phi;
  phi.resize(bank_->size());
  bank_->evaluate_cosine(pixels, phi);
  return std::inner_product(phi.begin(), phi.end(), weights_.begin(), 0.0);
}

double HarmonicTarget::energy() const {
  return std::inner_product(weights_.begin(), weights_.end(), weights_.begin(), 0.0);
}

double HarmonicTarget::lipschitz_bound() const {
  double s = 0.0;
  for (double w : weights_) s += std::abs(w);
  return std::numbers::pi * s;
}

HarmonicTarget random_harmonic_target(std::shared_ptr<const FeatureBank> bank, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> w(bank->size());
  for (std::size_t k = 0; k < w.size(); ++k) {
    const double a2 = bank->scales()[k] * bank->scales()[k];
    w[k] = normal(rng) / (1.0 + a2);
  }
  return HarmonicTarget(std::move(bank), std::move(w));
}

namespace {

void check_same_bank(const Classifier& a, const Classifier& b) {
  if (a.bank_ptr() != b.bank_ptr() && a.bank().indices() != b.bank().indices()) {
    throw StatsError("switching classifiers must share one feature bank");
  }
  if (a.num_labels() != b.num_labels()) throw StatsError("switching classifiers must share one label set");
}

std::size_t errors(const Classifier& c, const LabeledSet& set) {
  std::size_t e = 0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (predict(c, set.image(i)) != std::size_t(set.label(i))) ++e;
  }
  return e;
}

double squared_error_sum(const Classifier& c, const LabeledSet& set, const HarmonicTarget& target) {
  double s = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const double r = c.class_values(set.image(i))[0].real() - target(set.image(i));
    s += r * r;
  }
  return s;
}

LabeledSet relabel(const LabeledSet& set, const BinaryTask& task) {
  std::vector<int> labels(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    const int l = set.label(i);
    if (l < 0 || l >= int(task.superclass.size())) throw StatsError("label outside the binary task map");
    labels[i] = task.superclass[std::size_t(l)];
  }
  return set.with_labels(std::move(labels));
}

std::vector<double> targets_for(const LabeledSet& set, const HarmonicTarget& target) {
  std::vector<double> t(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) t[i] = target(set.image(i));
  return t;
}

std::uint64_t derive(std::uint64_t seed, std::uint64_t salt) {
  std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(salt)};
  std::array<std::uint32_t, 2> words{};
  seq.generate(words.begin(), words.end());
  return (std::uint64_t(words[0]) << 32) | words[1];
}

}  // namespace

double switching_loss(const Classifier& h, const Classifier& f, const LabeledSet& test_nat,
                      const LabeledSet& test_adv) {
  check_same_bank(h, f);
  const std::size_t total = test_nat.size() + test_adv.size();
  if (total == 0) throw StatsError("switching loss needs test samples");
  return double(errors(h, test_nat) + errors(f, test_adv)) / double(total);
}

double pooled_error(const Classifier& g, const LabeledSet& test_nat, const LabeledSet& test_adv) {
  const std::size_t total = test_nat.size() + test_adv.size();
  if (total == 0) throw StatsError("pooled error needs test samples");
  return double(errors(g, test_nat) + errors(g, test_adv)) / double(total);
}

BinaryTask random_binary_task(std::uint64_t seed) {
  std::array<int, 10> labels{};
  std::iota(labels.begin(), labels.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t i = labels.size() - 1; i > 0; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i);
    std::swap(labels[i], labels[pick(rng)]);
  }
  BinaryTask task;
  for (std::size_t i = 0; i < labels.size(); ++i) task.superclass[std::size_t(labels[i])] = i < 5 ? 0 : 1;
  return task;
}

BiasSample continuity_bias_trial(const BiasData& data, const BiasTask& task, const TrainConfig& train_cfg,
                                 std::uint64_t seed) {
  if (!data.bank || data.bank->kind() != FeatureKind::Cosine) {
    throw StatsError("continuity-bias trials use a cosine feature bank");
  }
  auto fit = [&](const LabeledSet& set, std::size_t labels, std::uint64_t salt, const Objective& objective) {
    TrainConfig cfg = train_cfg;
    cfg.seed = derive(seed, salt);
    Classifier init = Classifier::random(data.bank, labels, derive(seed, salt + 100));
    return train(std::move(init), set, cfg, objective).classifier;
  };

  BiasSample out;
  if (const auto* binary = std::get_if<BinaryTask>(&task)) {
    const auto nat = relabel(data.train.s_nat, *binary);
    const auto adv = relabel(data.train.s_adv, *binary);
    const auto all = relabel(data.train.s_union, *binary);
    const auto test_nat = relabel(data.test_nat, *binary);
    const auto test_adv = relabel(data.test_adv, *binary);
    const Classifier h = fit(nat, 2, 1, {});
    const Classifier f = fit(adv, 2, 2, {});
    const Classifier g = fit(all, 2, 3, {});
    out.union_loss = pooled_error(g, test_nat, test_adv);
    out.switching_loss = switching_loss(h, f, test_nat, test_adv);
  } else {
    const auto& target = *std::get<RegressionTask>(task).target;
    const auto t_nat = targets_for(data.train.s_nat, target);
    const auto t_adv = targets_for(data.train.s_adv, target);
    const auto t_all = targets_for(data.train.s_union, target);
    const Classifier h = fit(data.train.s_nat, 1, 1, {LossKind::SquaredError, t_nat});
    const Classifier f = fit(data.train.s_adv, 1, 2, {LossKind::SquaredError, t_adv});
    const Classifier g = fit(data.train.s_union, 1, 3, {LossKind::SquaredError, t_all});
    const double total = double(data.test_nat.size() + data.test_adv.size());
    if (total == 0) throw StatsError("regression trial needs test samples");
    out.union_loss = (squared_error_sum(g, data.test_nat, target) + squared_error_sum(g, data.test_adv, target)) / total;
    out.switching_loss =
        (squared_error_sum(h, data.test_nat, target) + squared_error_sum(f, data.test_adv, target)) / total;
  }
  out.epsilon = out.union_loss - out.switching_loss;
  return out;
}

}  // namespace wharm
