#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "wharm/attack.hpp"
#include "wharm/detect.hpp"
#include "wharm/optim.hpp"
#include "wharm/stats.hpp"

namespace wharm {

inline constexpr const char* kLibraryVersion = "0.1.0";

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DetectionSettings {
  std::size_t pool = 200;
  std::size_t repeats = 10;
  /// Also run the ten targeted sweeps, one per target label.
  bool targeted = true;
};

struct BiasSettings {
  std::size_t trials = 20;
  double confidence = 0.01;
  /// Optional caps on the training pools used inside each trial (0 = all).
  std::size_t max_train_nat = 0;
  std::size_t max_train_adv = 0;
};

struct ExperimentConfig {
  std::string dataset = "mnist";
  std::filesystem::path data_dir;
  std::optional<std::filesystem::path> template_config;
  TrainConfig train;
  AttackConfig attack;
  std::size_t train_subset = 10000;
  std::size_t test_subset = 2000;
  bool full_scale = false;
  DetectionSettings detection;
  BiasSettings bias;
  std::uint64_t seed = 1;
  std::filesystem::path output_dir = "out";
  /// FNV-1a hash of the raw config text, carried into every report footer.
  std::string config_hash = "none";

  /// Parses JSON. Relative paths resolve against `base_dir`. Throws ConfigError.
  static ExperimentConfig parse(const std::string& json_text, const std::filesystem::path& base_dir = {});
  static ExperimentConfig load(const std::filesystem::path& path);

  /// Checks value ranges and that the referenced files exist.
  void validate() const;

  TemplateConfig templates(FeatureKind kind) const;
  std::uint64_t derived_seed(std::string_view purpose) const;
};

std::string fnv1a_hex(std::string_view text);

struct Datasets {
  LabeledSet train;
  LabeledSet test;
};

/// Loads the IDX files under data_dir and draws the seeded desk-scale subsets
/// (or keeps everything in full-scale mode). The split sizes and seeds are
/// written into each set's provenance.
Datasets load_datasets(const ExperimentConfig& cfg);

std::shared_ptr<const FeatureBank> make_bank(const ExperimentConfig& cfg, FeatureKind kind);

/// Trains a holomorphic classifier with the zero-class attached.
TrainResult train_holomorphic(const ExperimentConfig& cfg, std::shared_ptr<const FeatureBank> bank,
                              const LabeledSet& data, std::uint64_t seed);

struct DetectionRow {
  std::optional<int> target;
  DetectionReport aware;    // averaged metrics, summed counts
  DetectionReport unaware;
};

/// Detection table: untargeted row plus (optionally) one row per target label, each for
/// an attacker that does and does not see the zero-class, averaging the per-run
/// metrics over `repeats` seeded benign pools.
std::vector<DetectionRow> run_detection_table(const ExperimentConfig& cfg, const Classifier& h, const LabeledSet& test);

/// Test pools for the infeasibility table and the bias test: benign test samples and the
/// adversarial versions of them that land inside the polyhedron of h.
struct TestPools {
  LabeledSet benign;
  LabeledSet adversarial;
};

TestPools build_test_pools(const ExperimentConfig& cfg, const Classifier& h, const LabeledSet& test);

struct AccuracyRow {
  std::string name;
  double adversarial = 0.0;
  double benign = 0.0;
};

struct InfeasibilityResult {
  std::vector<AccuracyRow> rows;  // h, f, g
  Classifier f;
  Classifier g;
};

InfeasibilityResult run_infeasibility(const ExperimentConfig& cfg, const Classifier& h, const Partition& partition,
                                      const TestPools& pools);

struct BiasTables {
  BiasTestReport continuous;
  BiasTestReport discontinuous;
  std::vector<BiasSample> continuous_samples;
  std::vector<BiasSample> discontinuous_samples;
};

BiasTables run_bias_tables(const ExperimentConfig& cfg, const Partition& partition, const TestPools& pools);

void write_detection_csv(const ExperimentConfig& cfg, const std::vector<DetectionRow>& rows,
                         const std::filesystem::path& path);
void write_infeasibility_csv(const ExperimentConfig& cfg, const std::vector<AccuracyRow>& rows,
                             const std::filesystem::path& path);
void write_bias_csv(const ExperimentConfig& cfg, const BiasTables& tables, const std::filesystem::path& path);

}  // namespace wharm
