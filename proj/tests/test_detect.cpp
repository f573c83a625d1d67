#include <doctest.h>

#include <random>

#include "test_support.hpp"
#include "wharm/detect.hpp"

using namespace wharm;
using wharm::testing::random_set;
using wharm::testing::randomized;
using wharm::testing::small_bank;

TEST_CASE("polyhedron membership and its preconditions") {
  auto bank = small_bank(FeatureKind::Holomorphic);
  Classifier c(bank, 3);
  CHECK_THROWS_AS(in_polyhedron(c, std::vector<double>(4, 0.5)), DetectionError);
  c.attach_zero_class();
  CHECK(in_polyhedron(c, std::vector<double>(4, 0.5)));
  c.complex_bias()(1) = Complex(0.0, 1.5);
  CHECK_FALSE(in_polyhedron(c, std::vector<double>(4, 0.5)));
  c.complex_bias()(1) = Complex(0.0, 1.0);
  CHECK_FALSE(in_polyhedron(c, std::vector<double>(4, 0.5)));

  Classifier cosine(small_bank(FeatureKind::Cosine), 3);
  cosine.attach_zero_class();
  CHECK_THROWS_AS(in_polyhedron(cosine, std::vector<double>(4, 0.5)), DetectionError);
}

TEST_CASE("membership agrees with the definition and with zero-class prediction") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Classifier c = randomized(small_bank(FeatureKind::Holomorphic, {2, 3}), 4, seed);
    for (double& v : c.weight_values()) v *= 0.6;
    c.attach_zero_class();
    for (int i = 0; i < 50; ++i) {
      std::vector<double> x(6);
      for (auto& v : x) v = u(rng);
      double largest = 0.0;
      for (const auto& h : c.class_values(x)) largest = std::max(largest, std::abs(h));
      CHECK(in_polyhedron(c, x) == (largest < 1.0));
      CHECK(in_polyhedron(c, x) == (predict(c, x) == c.num_labels()));
    }
  }
}

TEST_CASE("metrics from counts") {
  const auto none = DetectionReport::from_counts({0, 0, 10, 10});
  CHECK(none.degenerate);
  CHECK(none.precision == 0.0);
  CHECK(none.recall == 0.0);
  CHECK(none.f1 == 0.0);

  const auto perfect = DetectionReport::from_counts({10, 0, 0, 10});
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);
  CHECK(perfect.f1 == 1.0);
  CHECK_FALSE(perfect.degenerate);

  const auto mixed = DetectionReport::from_counts({4, 1, 6, 9});
  CHECK(mixed.precision == doctest::Approx(0.8));
  CHECK(mixed.recall == doctest::Approx(0.4));
  CHECK(mixed.f1 == doctest::Approx(2 * 0.8 * 0.4 / 1.2));
  CHECK(mixed.counts.total() == 20);
}

TEST_CASE("detect_run pools one attack per benign sample") {
  auto bank = small_bank(FeatureKind::Holomorphic, {2, 2});
  Classifier everything(bank, 3);
  everything.attach_zero_class();
  const auto data = random_set(2, 2, 12, 3, 4);
  AttackConfig cfg;
  cfg.steps = 2;
  // The vanishing hypothesis flags every sample, benign or not.
  const auto r = detect_run(everything, data, cfg);
  CHECK(r.counts.total() == 24);
  CHECK(r.counts.tp == 12);
  CHECK(r.counts.fp == 12);
  CHECK(r.precision == doctest::Approx(0.5));
  CHECK(r.recall == 1.0);

  cfg.target = 1;
  const auto t = detect_run(everything, data, cfg);
  CHECK(t.counts.total() == 2 * 8);

  Classifier nothing(bank, 3);
  nothing.complex_bias().setConstant(Complex(2.0, 0.0));
  nothing.attach_zero_class();
  const auto n = detect_run(nothing, data, AttackConfig{});
  CHECK(n.degenerate);
  CHECK(n.counts.fn == 12);
  CHECK(n.counts.tn == 12);

  CHECK_THROWS_AS(detect_run(everything, LabeledSet(2, 2), AttackConfig{}), DetectionError);
  LabeledSet all_ones(2, 2);
  all_ones.push_back(std::vector<double>(4, 0.3), 1);
  CHECK_THROWS_AS(detect_run(everything, all_ones, cfg), DetectionError);
}

TEST_CASE("partitions keep labels, membership and survive persistence") {
  auto bank = small_bank(FeatureKind::Holomorphic, {2, 2});
  Classifier c(bank, 3);
  c.complex_bias() << Complex(0.5, 0.0), Complex(0.0, 0.4), Complex(0.3, 0.3);
  c.attach_zero_class();
  const auto data = random_set(2, 2, 9, 3, 8);
  AttackConfig cfg;
  cfg.steps = 3;
  cfg.seed = 5;
  const auto p = build_partition(c, data, cfg);
  CHECK(p.s_nat.size() == 9);
  CHECK(p.s_adv.size() == 9);
  CHECK(p.s_union.size() == 18);
  for (std::size_t i = 0; i < p.s_adv.size(); ++i) {
    CHECK(p.s_adv.label(i) == data.label(i));
    CHECK(p.s_adv.origin(i) == Origin::Adversarial);
    CHECK(in_polyhedron(c, p.s_adv.image(i)));
  }
  CHECK(p.s_adv.provenance.at("attack") == describe(cfg));

  const auto dir = std::filesystem::temp_directory_path() / "wharm_partition_test";
  persist_partition(p, dir);
  const auto back = load_partition(dir);
  CHECK(back.s_nat == p.s_nat);
  CHECK(back.s_adv == p.s_adv);
  CHECK(back.s_union.pixels() == p.s_union.pixels());
  CHECK(back.s_union.labels() == p.s_union.labels());
  for (std::size_t i = 0; i < back.s_adv.size(); ++i) CHECK(in_polyhedron(c, back.s_adv.image(i)));
  std::filesystem::remove_all(dir);

  Classifier outside(bank, 3);
  outside.complex_bias().setConstant(Complex(3.0, 0.0));
  outside.attach_zero_class();
  CHECK_THROWS_AS(build_partition(outside, data, cfg), DetectionError);
}
