#include "wharm/optim.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

namespace wharm {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be at least 1");
  if (epochs < 1) throw std::invalid_argument("epochs must be at least 1");
  if (momentum < 0.0 || weight_decay < 0.0) throw std::invalid_argument("momentum and weight_decay must be nonnegative");
}

MomentumSgd::MomentumSgd(const TrainConfig& cfg, const Classifier& c)
    : cfg_(cfg), weight_velocity_(c.weight_values().size(), 0.0), bias_velocity_(c.bias_values().size(), 0.0) {}

void MomentumSgd::step(Classifier& c, const ParameterGradient& g) {
  auto w = c.weight_values();
  auto b = c.bias_values();
  if (g.weights.size() != w.size() || g.bias.size() != b.size()) {
    throw std::invalid_argument("gradient layout does not match the classifier");
  }
  for (std::size_t i = 0; i < w.size(); ++i) {
    weight_velocity_[i] = cfg_.momentum * weight_velocity_[i] + (g.weights[i] + cfg_.weight_decay * w[i]);
    w[i] -= cfg_.learning_rate * weight_velocity_[i];
  }
  for (std::size_t i = 0; i < b.size(); ++i) {
    bias_velocity_[i] = cfg_.momentum * bias_velocity_[i] + g.bias[i];
    b[i] -= cfg_.learning_rate * bias_velocity_[i];
  }
}

TrainResult train(Classifier c, const LabeledSet& data, const TrainConfig& cfg, const Objective& objective) {
  cfg.validate();
  if (data.empty()) throw std::invalid_argument("training set is empty");

  MomentumSgd opt(cfg, c);
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result{c, {}, {}};
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, order.size() - start);
      std::span<const std::size_t> rows(order.data() + start, len);
      const ParameterGradient g = gradient(c, data, rows, objective);
      if (!std::isfinite(g.loss)) {
        throw TrainingError("non-finite loss at step " + std::to_string(step) + " (epoch " + std::to_string(epoch) + ")",
                            step);
      }
      opt.step(c, g);
      epoch_sum += g.loss * double(len);
      result.steps.push_back({epoch, step, g.loss, dirichlet_energy(c)});
      ++step;
    }
    result.epoch_loss.push_back(epoch_sum / double(data.size()));
  }
  result.classifier = std::move(c);
  return result;
}

void write_trace_csv(const std::vector<TraceRow>& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  out << "epoch,step,loss,energy\n";
  for (const auto& r : trace) out << r.epoch << ',' << r.step << ',' << r.loss << ',' << r.energy << "\n";
}

}  // namespace wharm
