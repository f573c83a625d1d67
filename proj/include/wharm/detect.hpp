#pragma once

#include <cstdint>
#include <filesystem>

#include "wharm/attack.hpp"
#include "wharm/data.hpp"
#include "wharm/model.hpp"

namespace wharm {

class DetectionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// max_j |h_j(x)| < 1 over the true classes. Requires a holomorphic classifier
/// with the zero-class attached; agrees with predict() returning the zero-class.
bool in_polyhedron(const Classifier& c, std::span<const double> pixels);

struct DetectionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  std::size_t total() const { return tp + fp + fn + tn; }
};

/// Positive class = adversarial. Precision with no flagged samples is reported
/// as 0 with `degenerate` set; F1 is 0 whenever precision + recall is 0.
struct DetectionReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  DetectionCounts counts;
  bool degenerate = false;

  static DetectionReport from_counts(const DetectionCounts& counts);
};

/// Attacks every benign sample once (skipping samples whose label equals a
/// configured target), then scores the pooled benign + adversarial samples by
/// polyhedron membership.
DetectionReport detect_run(const Classifier& c, const LabeledSet& benign, const AttackConfig& cfg);

struct Partition {
  LabeledSet s_nat;
  LabeledSet s_adv;
  LabeledSet s_union;
};

/// Adversarial versions of `benign` that land inside the polyhedron, keeping
/// their source labels. Origin tags and provenance (seed, attack settings) are
/// filled in.
LabeledSet adversarial_inside(const Classifier& c, const LabeledSet& benign, const AttackConfig& cfg);

/// S_nat = benign, S_adv = adversarial_inside(...), S = S_nat followed by S_adv.
/// Throws DetectionError when S_adv comes out empty.
Partition build_partition(const Classifier& c, const LabeledSet& benign, const AttackConfig& cfg);

void persist_partition(const Partition& p, const std::filesystem::path& dir);
Partition load_partition(const std::filesystem::path& dir);

std::string describe(const AttackConfig& cfg);

}  // namespace wharm
