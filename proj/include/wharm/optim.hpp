#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "wharm/model.hpp"

namespace wharm {

class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, std::size_t step) : std::runtime_error(what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

struct TrainConfig {
  double learning_rate = 0.001;
  double momentum = 0.9;
  double weight_decay = 1.0;
  std::size_t batch_size = 32;
  std::size_t epochs = 5;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TraceRow {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double loss = 0.0;
  double energy = 0.0;
};

struct TrainResult {
  Classifier classifier;
  std::vector<TraceRow> steps;
  /// Sample-weighted mean batch loss per epoch.
  std::vector<double> epoch_loss;
};

/// Heavy-ball SGD state. Decay is added to the weight gradient before the
/// momentum update and never touches biases:
///   v <- momentum v + (g + weight_decay w),   w <- w - lr v.
class MomentumSgd {
 public:
  MomentumSgd(const TrainConfig& cfg, const Classifier& c);
  void step(Classifier& c, const ParameterGradient& g);

 private:
  TrainConfig cfg_;
  std::vector<double> weight_velocity_;
  std::vector<double> bias_velocity_;
};

/// Mini-batch training, reshuffling the data every epoch from one generator
/// seeded by cfg.seed. The last partial batch is kept. Throws TrainingError on a
/// non-finite batch loss.
TrainResult train(Classifier c, const LabeledSet& data, const TrainConfig& cfg, const Objective& objective = {});

void write_trace_csv(const std::vector<TraceRow>& trace, const std::filesystem::path& path);

}  // namespace wharm
