#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>

#ifdef WHARM_HAVE_BOOST_MATH
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>
#endif

#include "test_support.hpp"
#include "wharm/stats.hpp"

using namespace wharm;
using wharm::testing::random_set;
using wharm::testing::small_bank;

TEST_CASE("incomplete beta closed forms") {
  for (double x : {0.0, 0.1, 0.5, 0.93, 1.0}) {
    CHECK(regularized_incomplete_beta(1.0, 1.0, x) == doctest::Approx(x));
    CHECK(regularized_incomplete_beta(3.0, 1.0, x) == doctest::Approx(x * x * x));
    CHECK(regularized_incomplete_beta(1.0, 2.0, x) == doctest::Approx(1.0 - (1.0 - x) * (1.0 - x)));
  }
  CHECK_THROWS_AS(regularized_incomplete_beta(0.0, 1.0, 0.5), StatsError);
  CHECK_THROWS_AS(regularized_incomplete_beta(1.0, 1.0, 1.5), StatsError);
}

TEST_CASE("student t cdf closed forms") {
  for (double t : {-7.0, -1.0, -0.2, 0.0, 0.4, 1.0, 3.0, 25.0}) {
    // Cauchy and nu = 2.
    CHECK(student_t_cdf(1.0, t) == doctest::Approx(0.5 + std::atan(t) / std::numbers::pi).epsilon(1e-12));
    CHECK(student_t_cdf(2.0, t) == doctest::Approx(0.5 + t / (2.0 * std::sqrt(2.0 + t * t))).epsilon(1e-12));
  }
  CHECK(student_t_cdf(5.0, INFINITY) == 1.0);
  CHECK(student_t_cdf(5.0, -INFINITY) == 0.0);
}

TEST_CASE("student t quantiles") {
  CHECK(t_inverse_cdf(1, 0.75) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(t_inverse_cdf(2, 0.9) == doctest::Approx(std::sqrt(2.0) * 0.8 / std::sqrt(1.0 - 0.64)).epsilon(1e-10));
  CHECK(std::abs(t_inverse_cdf(19, 0.99) - 2.539) < 0.01);
  CHECK(t_inverse_cdf(19, 0.5) == 0.0);
  CHECK(t_inverse_cdf(7, 0.05) == doctest::Approx(-t_inverse_cdf(7, 0.95)));
  double worst = 0.0;
  for (int nu : {1, 2, 5, 19, 60}) {
    for (double p : {0.001, 0.01, 0.2, 0.5, 0.77, 0.95, 0.99, 0.999}) {
      worst = std::max(worst, std::abs(student_t_cdf(nu, t_inverse_cdf(nu, p)) - p));
    }
  }
  CHECK(worst < 1e-7);
  CHECK_THROWS_AS(t_inverse_cdf(0, 0.5), StatsError);
  CHECK_THROWS_AS(t_inverse_cdf(3, 1.0), StatsError);
  CHECK_THROWS_AS(t_inverse_cdf(3, 0.0), StatsError);
}

#ifdef WHARM_HAVE_BOOST_MATH
TEST_CASE("student t agrees with Boost.Math") {
  for (double nu : {1.0, 3.0, 9.5, 19.0, 120.0}) {
    const boost::math::students_t dist(nu);
    for (double t : {-12.0, -2.5, -0.3, 0.0, 0.7, 2.539, 6.0}) {
      CHECK(student_t_cdf(nu, t) == doctest::Approx(boost::math::cdf(dist, t)).epsilon(1e-12));
    }
    if (nu == std::floor(nu)) {
      for (double p : {0.01, 0.4, 0.9, 0.99}) {
        CHECK(t_inverse_cdf(int(nu), p) == doctest::Approx(boost::math::quantile(dist, p)).epsilon(1e-9));
      }
    }
  }
  for (double a : {0.5, 2.0, 9.5}) {
    for (double x : {0.05, 0.5, 0.95}) {
      CHECK(regularized_incomplete_beta(a, 0.5, x) == doctest::Approx(boost::math::ibeta(a, 0.5, x)).epsilon(1e-12));
    }
  }
}
#endif

TEST_CASE("t statistic") {
  const std::vector<double> s{1.0, 1.0, 1.0, 2.0};
  CHECK(t_statistic(s) == doctest::Approx(5.0));
  CHECK_THROWS_AS(t_statistic(std::vector<double>{1.0}), StatsError);
  CHECK_THROWS_AS(t_statistic(std::vector<double>{2.0, 2.0}), StatsError);
}

TEST_CASE("bias test decisions") {
  const auto pos = BiasTestReport::from_samples({0.3, 0.25, 0.4, 0.35, 0.28, 0.31}, 0.01);
  CHECK(pos.decision == Decision::AcceptH1);
  CHECK(pos.critical == doctest::Approx(t_inverse_cdf(5, 0.99)));
  CHECK(to_string(pos.decision) == "accepted");

  const auto mixed = BiasTestReport::from_samples({0.1, -0.1, 0.05, -0.05, 0.02, -0.03}, 0.01);
  CHECK(mixed.decision == Decision::RejectH1);
  CHECK(to_string(mixed.decision) == "rejected");

  const auto zeros = BiasTestReport::from_samples({0.0, 0.0, 0.0}, 0.01);
  CHECK(zeros.statistic == 0.0);
  CHECK(zeros.decision == Decision::RejectH1);
  const auto flat = BiasTestReport::from_samples({0.25, 0.25, 0.25}, 0.01);
  CHECK(std::isinf(flat.statistic));
  CHECK(flat.decision == Decision::AcceptH1);
  const auto neg = BiasTestReport::from_samples({-0.2, -0.2}, 0.01);
  CHECK(neg.statistic < 0.0);

  const auto r = run_bias_test(20, 0.01, [](std::size_t t) { return 1.0 + 0.01 * double(t); });
  CHECK(r.samples.size() == 20);
  CHECK(r.critical == doctest::Approx(2.539).epsilon(0.004));
  CHECK(r.decision == Decision::AcceptH1);
  CHECK_THROWS_AS(run_bias_test(1, 0.01, [](std::size_t) { return 0.0; }), StatsError);
  CHECK_THROWS_AS(run_bias_test(3, 0.01, [](std::size_t) { return NAN; }), StatsError);
}

TEST_CASE("random binary tasks are balanced and seeded") {
  std::set<std::array<int, 10>> seen;
  for (std::uint64_t s = 0; s < 30; ++s) {
    const auto t = random_binary_task(s);
    int ones = 0;
    for (int v : t.superclass) {
      CHECK((v == 0 || v == 1));
      ones += v;
    }
    CHECK(ones == 5);
    CHECK(t.superclass == random_binary_task(s).superclass);
    seen.insert(t.superclass);
  }
  CHECK(seen.size() > 20);
}

TEST_CASE("harmonic targets follow the coefficient law and their Lipschitz bound") {
  auto bank = std::make_shared<const FeatureBank>(
      enumerate_bank({28, 28}, TemplateConfig::default_family(FeatureKind::Cosine)));
  const auto t = random_harmonic_target(bank, 3);
  // Variance 1 / (1 + |a|^2)^2: 1/4 for singletons, 1/9 for pairs.
  double s1 = 0.0, s2 = 0.0;
  std::size_t n1 = 0, n2 = 0;
  for (std::size_t k = 0; k < bank->size(); ++k) {
    const auto support = bank->indices()[k].support_size();
    const double w2 = t.weights()[k] * t.weights()[k];
    if (support == 1) {
      s1 += w2;
      ++n1;
    } else if (support == 2) {
      s2 += w2;
      ++n2;
    }
  }
  CHECK(s1 / double(n1) == doctest::Approx(0.25).epsilon(0.12));
  CHECK(s2 / double(n2) == doctest::Approx(1.0 / 9.0).epsilon(0.06));
  CHECK(t.energy() == doctest::Approx(std::inner_product(t.weights().begin(), t.weights().end(),
                                                         t.weights().begin(), 0.0)));
  CHECK(random_harmonic_target(bank, 3).weights() == t.weights());

  auto small = small_bank(FeatureKind::Cosine, {2, 2});
  const auto st = random_harmonic_target(small, 9);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> a(4), b(4);
    for (auto& v : a) v = u(rng);
    for (auto& v : b) v = u(rng);
    double l1 = 0.0;
    for (int j = 0; j < 4; ++j) l1 += std::abs(a[j] - b[j]);
    CHECK(std::abs(st(a) - st(b)) <= st.lipschitz_bound() * l1 + 1e-12);
  }
  CHECK_THROWS_AS(HarmonicTarget(small_bank(FeatureKind::Holomorphic), {}), StatsError);
}

TEST_CASE("switching and pooled losses count errors by pool of origin") {
  auto bank = small_bank(FeatureKind::Cosine, {2, 2});
  Classifier says0(bank, 2), says1(bank, 2);
  says0.real_bias() << 1.0, 0.0;
  says1.real_bias() << 0.0, 1.0;
  LabeledSet nat(2, 2), adv(2, 2);
  for (int i = 0; i < 4; ++i) nat.push_back(std::vector<double>(4, 0.1), 0);
  for (int i = 0; i < 2; ++i) adv.push_back(std::vector<double>(4, 0.9), 1);
  adv.push_back(std::vector<double>(4, 0.9), 0);
  CHECK(switching_loss(says0, says1, nat, adv) == doctest::Approx(1.0 / 7.0));
  CHECK(pooled_error(says0, nat, adv) == doctest::Approx(2.0 / 7.0));
  CHECK(pooled_error(says1, nat, adv) == doctest::Approx(5.0 / 7.0));
  CHECK_THROWS_AS(switching_loss(says0, Classifier(bank, 3), nat, adv), StatsError);
}

TEST_CASE("a continuity-bias trial is deterministic and consistent") {
  BiasData data;
  data.bank = small_bank(FeatureKind::Cosine, {2, 2});
  data.train.s_nat = random_set(2, 2, 60, 10, 1);
  data.train.s_adv = random_set(2, 2, 30, 10, 2);
  data.train.s_union = data.train.s_nat;
  data.train.s_union.append(data.train.s_adv);
  data.test_nat = random_set(2, 2, 20, 10, 3);
  data.test_adv = random_set(2, 2, 10, 10, 4);
  TrainConfig cfg;
  cfg.epochs = 2;
  const auto a = continuity_bias_trial(data, random_binary_task(5), cfg, 11);
  const auto b = continuity_bias_trial(data, random_binary_task(5), cfg, 11);
  CHECK(a.epsilon == b.epsilon);
  CHECK(a.epsilon == doctest::Approx(a.union_loss - a.switching_loss));
  CHECK(a.union_loss >= 0.0);
  CHECK(a.union_loss <= 1.0);

  const auto target = std::make_shared<const HarmonicTarget>(random_harmonic_target(data.bank, 2));
  const auto r = continuity_bias_trial(data, RegressionTask{target}, cfg, 11);
  CHECK(std::isfinite(r.epsilon));
  CHECK(r.union_loss >= 0.0);

  BiasData holo = data;
  holo.bank = small_bank(FeatureKind::Holomorphic, {2, 2});
  CHECK_THROWS_AS(continuity_bias_trial(holo, random_binary_task(1), cfg, 1), StatsError);
}
