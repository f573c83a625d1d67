#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "wharm/data.hpp"
#include "wharm/feature_bank.hpp"

namespace wharm {

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// log|h_j| is clamped from below here so that points of the analytic set keep
/// finite losses and gradients.
inline constexpr double kLogMagnitudeFloor = -30.0;

struct Logits {
  std::vector<double> values;
  bool has_zero_class = false;

  std::size_t num_labels() const { return values.size() - (has_zero_class ? 1 : 0); }
};

/// Per-class coefficients over a fixed feature bank:
///   h_j(x) = b_j + sum_k w_jk phi*_k(pi x).
/// Cosine banks carry real coefficients; holomorphic banks carry complex ones.
class Classifier {
 public:
  Classifier(std::shared_ptr<const FeatureBank> bank, std::size_t num_labels);

  /// Weights uniform in [-s, s] with s = 1/sqrt(K) (independently for real and
  /// imaginary parts), biases zero.
  static Classifier random(std::shared_ptr<const FeatureBank> bank, std::size_t num_labels, std::uint64_t seed);

  FeatureKind kind() const { return bank_->kind(); }
  const FeatureBank& bank() const { return *bank_; }
  const std::shared_ptr<const FeatureBank>& bank_ptr() const { return bank_; }
  std::size_t num_labels() const { return num_labels_; }
  std::size_t num_features() const { return bank_->size(); }
  bool has_zero_class() const { return has_zero_class_; }
  std::size_t num_outputs() const { return num_labels_ + (has_zero_class_ ? 1 : 0); }

  void attach_zero_class();

  Eigen::MatrixXd& real_weights() { return real_w_; }
  const Eigen::MatrixXd& real_weights() const { return real_w_; }
  Eigen::VectorXd& real_bias() { return real_b_; }
  const Eigen::VectorXd& real_bias() const { return real_b_; }
  Eigen::MatrixXcd& complex_weights() { return complex_w_; }
  const Eigen::MatrixXcd& complex_weights() const { return complex_w_; }
  Eigen::VectorXcd& complex_bias() { return complex_b_; }
  const Eigen::VectorXcd& complex_bias() const { return complex_b_; }

  /// Parameters flattened to reals: complex entries appear as (re, im) pairs,
  /// weights in column-major (label fastest) order.
  std::span<double> weight_values();
  std::span<const double> weight_values() const;
  std::span<double> bias_values();
  std::span<const double> bias_values() const;

  /// Raw class functions h_j(x) for a pixel vector (real kinds have zero imaginary part).
  std::vector<Complex> class_values(std::span<const double> pixels) const;

  friend bool operator==(const Classifier& a, const Classifier& b);

 private:
  std::shared_ptr<const FeatureBank> bank_;
  std::size_t num_labels_;
  bool has_zero_class_ = false;
  Eigen::MatrixXd real_w_;
  Eigen::VectorXd real_b_;
  Eigen::MatrixXcd complex_w_;
  Eigen::VectorXcd complex_b_;
};

Logits forward(const Classifier& c, std::span<const double> pixels);
std::vector<double> probabilities(const Logits& logits);

/// Argmax over logits. Ties between a true class and the zero-class go to the
/// true class; ties among true classes go to the lowest index.
std::size_t predict(const Classifier& c, std::span<const double> pixels);
std::size_t predict(const Logits& logits);

Classifier attach_zero_class(Classifier c);

double cross_entropy(const Classifier& c, std::span<const double> pixels, int label);

/// Sum of |w_jk|^2 over classes and features; biases excluded.
double dirichlet_energy(const Classifier& c);

enum class LossKind { CrossEntropy, SquaredError };

/// Training objective. SquaredError reads `targets[row]` for each batch row and
/// needs a single-output real classifier.
struct Objective {
  LossKind kind = LossKind::CrossEntropy;
  std::span<const double> targets;
};

/// Mean loss and mean parameter gradient over a batch, flattened in the same
/// layout as Classifier::weight_values / bias_values.
struct ParameterGradient {
  std::vector<double> weights;
  std::vector<double> bias;
  double loss = 0.0;
};

ParameterGradient gradient(const Classifier& c, const LabeledSet& data, std::span<const std::size_t> rows,
                           const Objective& objective = {});

/// Loss of one sample and its gradient with respect to the pixels.
/// `include_zero_class` selects whether the zero-class logit (when attached)
/// takes part in the softmax.
struct InputGradient {
  double loss = 0.0;
  std::vector<double> grad;
};

InputGradient input_gradient(const Classifier& c, std::span<const double> pixels, int label,
                             bool include_zero_class = true);

/// Accuracy of predict() against labels; a zero-class prediction is always wrong.
double accuracy(const Classifier& c, const LabeledSet& data);

/// Plain-text checkpoint: header `kind num_labels K n has_zero_class`, then one
/// line per bias followed by one line per weight (column-major), each as one
/// (real) or two (complex) hex-float columns.
void save_checkpoint(const Classifier& c, std::ostream& out);
void save_checkpoint(const Classifier& c, const std::filesystem::path& path);
Classifier load_checkpoint(std::shared_ptr<const FeatureBank> bank, std::istream& in);
Classifier load_checkpoint(std::shared_ptr<const FeatureBank> bank, const std::filesystem::path& path);

}  // namespace wharm
