#include "wharm/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

namespace wharm {

namespace {

double log_magnitude(Complex h) {
  const double mag = std::abs(h);
  if (!(mag > 0.0)) return kLogMagnitudeFloor;
  return std::max(std::log(mag), kLogMagnitudeFloor);
}

bool clamped(Complex h) {
  const double mag = std::abs(h);
  return !(mag > 0.0) || std::log(mag) <= kLogMagnitudeFloor;
}

// Softmax over `logits`; returns -log p[label].
double softmax_loss(std::span<const double> logits, std::size_t label, std::span<double> probs) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    probs[j] = std::exp(logits[j] - mx);
    z += probs[j];
  }
  for (double& p : probs) p /= z;
  return -(logits[label] - mx - std::log(z));
}

void check_label(const Classifier& c, int label) {
  if (label < 0 || std::size_t(label) >= c.num_labels()) {
    throw ModelError("label " + std::to_string(label) + " outside [0, " + std::to_string(c.num_labels()) + ")");
  }
}

}  // namespace

Classifier::Classifier(std::shared_ptr<const FeatureBank> bank, std::size_t num_labels)
    : bank_(std::move(bank)), num_labels_(num_labels) {
  if (!bank_) throw ModelError("classifier needs a feature bank");
  if (num_labels_ == 0) throw ModelError("classifier needs at least one label");
  const auto L = Eigen::Index(num_labels_);
  const auto K = Eigen::Index(bank_->size());
  if (kind() == FeatureKind::Cosine) {
    real_w_ = Eigen::MatrixXd::Zero(L, K);
    real_b_ = Eigen::VectorXd::Zero(L);
  } else {
    complex_w_ = Eigen::MatrixXcd::Zero(L, K);
    complex_b_ = Eigen::VectorXcd::Zero(L);
  }
}

Classifier Classifier::random(std::shared_ptr<const FeatureBank> bank, std::size_t num_labels, std::uint64_t seed) {
  Classifier c(std::move(bank), num_labels);
  const double s = 1.0 / std::sqrt(double(c.num_features()));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-s, s);
  for (double& w : c.weight_values()) w = u(rng);
  return c;
}

void Classifier::attach_zero_class() {
  if (has_zero_class_) throw ModelError("zero-class already attached");
  has_zero_class_ = true;
}

std::span<double> Classifier::weight_values() {
  if (kind() == FeatureKind::Cosine) return {real_w_.data(), std::size_t(real_w_.size())};
  return {reinterpret_cast<double*>(complex_w_.data()), 2 * std::size_t(complex_w_.size())};
}

std::span<const double> Classifier::weight_values() const {
  if (kind() == FeatureKind::Cosine) return {real_w_.data(), std::size_t(real_w_.size())};
  return {reinterpret_cast<const double*>(complex_w_.data()), 2 * std::size_t(complex_w_.size())};
}

std::span<double> Classifier::bias_values() {
  if (kind() == FeatureKind::Cosine) return {real_b_.data(), std::size_t(real_b_.size())};
  return {reinterpret_cast<double*>(complex_b_.data()), 2 * std::size_t(complex_b_.size())};
}

std::span<const double> Classifier::bias_values() const {
  if (kind() == FeatureKind::Cosine) return {real_b_.data(), std::size_t(real_b_.size())};
  return {reinterpret_cast<const double*>(complex_b_.data()), 2 * std::size_t(complex_b_.size())};
}

std::vector<Complex> Classifier::class_values(std::span<const double> pixels) const {
  const auto K = Eigen::Index(num_features());
  std::vector<Complex> out(num_labels_);
  if (kind() == FeatureKind::Cosine) {
    Eigen::VectorXd phi(K);
    bank_->evaluate_cosine(pixels, {phi.data(), std::size_t(K)});
    const Eigen::VectorXd h = real_w_ * phi + real_b_;
    for (std::size_t j = 0; j < num_labels_; ++j) out[j] = h(Eigen::Index(j));
  } else {
    Eigen::VectorXcd psi(K);
    bank_->evaluate_holomorphic(pixels, {psi.data(), std::size_t(K)});
    const Eigen::VectorXcd h = complex_w_ * psi + complex_b_;
    for (std::size_t j = 0; j < num_labels_; ++j) out[j] = h(Eigen::Index(j));
  }
  return out;
}

bool operator==(const Classifier& a, const Classifier& b) {
  return a.kind() == b.kind() && a.num_labels_ == b.num_labels_ && a.has_zero_class_ == b.has_zero_class_ &&
         a.num_features() == b.num_features() &&
         std::ranges::equal(a.weight_values(), b.weight_values()) &&
         std::ranges::equal(a.bias_values(), b.bias_values());
}

Logits forward(const Classifier& c, std::span<const double> pixels) {
  if (pixels.size() != c.bank().dim()) throw ModelError("input dimension does not match the feature bank");
  const auto h = c.class_values(pixels);
  Logits out;
  out.has_zero_class = c.has_zero_class();
  out.values.reserve(c.num_outputs());
  for (const auto& v : h) out.values.push_back(c.kind() == FeatureKind::Cosine ? v.real() : log_magnitude(v));
  if (c.has_zero_class()) out.values.push_back(0.0);
  return out;
}

std::vector<double> probabilities(const Logits& logits) {
  if (logits.values.empty()) throw ModelError("no logits");
  std::vector<double> p(logits.values.size());
  softmax_loss(logits.values, 0, p);
  return p;
}

std::size_t predict(const Logits& logits) {
  const std::size_t L = logits.num_labels();
  std::size_t best = 0;
  for (std::size_t j = 1; j < L; ++j) {
    if (logits.values[j] > logits.values[best]) best = j;
  }
  if (logits.has_zero_class && logits.values[best] < 0.0) return L;
  return best;
}

std::size_t predict(const Classifier& c, std::span<const double> pixels) { return predict(forward(c, pixels)); }

Classifier attach_zero_class(Classifier c) {
  c.attach_zero_class();
  return c;
}

double cross_entropy(const Classifier& c, std::span<const double> pixels, int label) {
  check_label(c, label);
  const auto logits = forward(c, pixels);
  std::vector<double> p(logits.values.size());
  return softmax_loss(logits.values, std::size_t(label), p);
}

double dirichlet_energy(const Classifier& c) {
  double e = 0.0;
  for (double v : c.weight_values()) e += v * v;
  return e;
}

ParameterGradient gradient(const Classifier& c, const LabeledSet& data, std::span<const std::size_t> rows,
                           const Objective& objective) {
  if (rows.empty()) throw ModelError("gradient needs a nonempty batch");
  if (data.dim() != c.bank().dim()) throw ModelError("data dimension does not match the feature bank");
  const bool squared = objective.kind == LossKind::SquaredError;
  if (squared && (c.kind() != FeatureKind::Cosine || c.num_labels() != 1 || c.has_zero_class())) {
    throw ModelError("squared-error objective needs a single-output cosine classifier");
  }
  const auto B = Eigen::Index(rows.size());
  const auto K = Eigen::Index(c.num_features());
  const auto L = Eigen::Index(c.num_labels());
  const std::size_t outputs = c.num_outputs();
  std::vector<double> logits(outputs), probs(outputs);
  double total_loss = 0.0;
  ParameterGradient g;

  if (c.kind() == FeatureKind::Cosine) {
    Eigen::MatrixXd phi(K, B);
    for (Eigen::Index b = 0; b < B; ++b) {
      c.bank().evaluate_cosine(data.image(rows[std::size_t(b)]), {phi.col(b).data(), std::size_t(K)});
    }
    Eigen::MatrixXd scores = c.real_weights() * phi;
    scores.colwise() += c.real_bias();
    Eigen::MatrixXd adj(L, B);
    for (Eigen::Index b = 0; b < B; ++b) {
      const std::size_t row = rows[std::size_t(b)];
      if (squared) {
        if (row >= objective.targets.size()) throw ModelError("missing regression target");
        const double r = scores(0, b) - objective.targets[row];
        total_loss += r * r;
        adj(0, b) = 2.0 * r;
        continue;
      }
      const int label = data.label(row);
      check_label(c, label);
      for (Eigen::Index j = 0; j < L; ++j) logits[std::size_t(j)] = scores(j, b);
      if (c.has_zero_class()) logits[outputs - 1] = 0.0;
      total_loss += softmax_loss(logits, std::size_t(label), probs);
      for (Eigen::Index j = 0; j < L; ++j) adj(j, b) = probs[std::size_t(j)] - (j == label ? 1.0 : 0.0);
    }
    const Eigen::MatrixXd gw = adj * phi.transpose() / double(B);
    const Eigen::VectorXd gb = adj.rowwise().sum() / double(B);
    g.weights.assign(gw.data(), gw.data() + gw.size());
    g.bias.assign(gb.data(), gb.data() + gb.size());
  } else {
    Eigen::MatrixXcd psi(K, B);
    for (Eigen::Index b = 0; b < B; ++b) {
      c.bank().evaluate_holomorphic(data.image(rows[std::size_t(b)]), {psi.col(b).data(), std::size_t(K)});
    }
    Eigen::MatrixXcd scores = c.complex_weights() * psi;
    scores.colwise() += c.complex_bias();
    // For logit log|h|, the real-pair gradient packed as a complex number is
    // dL/dlogit * (h / |h|^2) * conj(feature).
    Eigen::MatrixXcd adj(L, B);
    for (Eigen::Index b = 0; b < B; ++b) {
      const int label = data.label(rows[std::size_t(b)]);
      check_label(c, label);
      for (Eigen::Index j = 0; j < L; ++j) logits[std::size_t(j)] = log_magnitude(scores(j, b));
      if (c.has_zero_class()) logits[outputs - 1] = 0.0;
      total_loss += softmax_loss(logits, std::size_t(label), probs);
      for (Eigen::Index j = 0; j < L; ++j) {
        const Complex h = scores(j, b);
        const double delta = probs[std::size_t(j)] - (j == label ? 1.0 : 0.0);
        adj(j, b) = clamped(h) ? Complex{} : delta * h / std::norm(h);
      }
    }
    const Eigen::MatrixXcd gw = adj * psi.adjoint() / double(B);
    const Eigen::VectorXcd gb = adj.rowwise().sum() / double(B);
    const auto* wp = reinterpret_cast<const double*>(gw.data());
    const auto* bp = reinterpret_cast<const double*>(gb.data());
    g.weights.assign(wp, wp + 2 * gw.size());
    g.bias.assign(bp, bp + 2 * gb.size());
  }
  g.loss = total_loss / double(B);
  return g;
}

InputGradient input_gradient(const Classifier& c, std::span<const double> pixels, int label, bool include_zero_class) {
  check_label(c, label);
  if (pixels.size() != c.bank().dim()) throw ModelError("input dimension does not match the feature bank");
  const auto K = Eigen::Index(c.num_features());
  const auto L = Eigen::Index(c.num_labels());
  const bool zero = c.has_zero_class() && include_zero_class;
  std::vector<double> logits(std::size_t(L) + (zero ? 1 : 0));
  std::vector<double> probs(logits.size());
  InputGradient out;
  out.grad.assign(pixels.size(), 0.0);

  if (c.kind() == FeatureKind::Cosine) {
    Eigen::VectorXd phi(K);
    c.bank().evaluate_cosine(pixels, {phi.data(), std::size_t(K)});
    const Eigen::VectorXd h = c.real_weights() * phi + c.real_bias();
    for (Eigen::Index j = 0; j < L; ++j) logits[std::size_t(j)] = h(j);
    out.loss = softmax_loss(logits, std::size_t(label), probs);
    Eigen::VectorXd delta(L);
    for (Eigen::Index j = 0; j < L; ++j) delta(j) = probs[std::size_t(j)] - (j == label ? 1.0 : 0.0);
    const Eigen::VectorXd adjoint = c.real_weights().transpose() * delta;
    c.bank().backprop_cosine(pixels, {adjoint.data(), std::size_t(K)}, out.grad);
  } else {
    Eigen::VectorXcd psi(K);
    c.bank().evaluate_holomorphic(pixels, {psi.data(), std::size_t(K)});
    const Eigen::VectorXcd h = c.complex_weights() * psi + c.complex_bias();
    for (Eigen::Index j = 0; j < L; ++j) logits[std::size_t(j)] = log_magnitude(h(j));
    out.loss = softmax_loss(logits, std::size_t(label), probs);
    // dL = Re(sum_j delta_j conj(h_j)/|h_j|^2 dh_j); the adjoint of the
    // features is W^T applied to those per-class coefficients.
    Eigen::VectorXcd coef(L);
    for (Eigen::Index j = 0; j < L; ++j) {
      const double delta = probs[std::size_t(j)] - (j == label ? 1.0 : 0.0);
      coef(j) = clamped(h(j)) ? Complex{} : delta * std::conj(h(j)) / std::norm(h(j));
    }
    const Eigen::VectorXcd adjoint = c.complex_weights().transpose() * coef;
    c.bank().backprop_holomorphic(pixels, {adjoint.data(), std::size_t(K)}, out.grad);
  }
  return out;
}

double accuracy(const Classifier& c, const LabeledSet& data) {
  if (data.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (predict(c, data.image(i)) == std::size_t(data.label(i))) ++hits;
  }
  return double(hits) / double(data.size());
}

void save_checkpoint(const Classifier& c, std::ostream& out) {
  out << to_string(c.kind()) << ' ' << c.num_labels() << ' ' << c.num_features() << ' ' << c.bank().dim() << ' '
      << (c.has_zero_class() ? 1 : 0) << "\n";
  const bool cplx = c.kind() == FeatureKind::Holomorphic;
  char buf[64];
  auto emit = [&](std::span<const double> values) {
    const std::size_t step = cplx ? 2 : 1;
    for (std::size_t i = 0; i < values.size(); i += step) {
      std::snprintf(buf, sizeof buf, "%a", values[i]);
      out << buf;
      if (cplx) {
        std::snprintf(buf, sizeof buf, "%a", values[i + 1]);
        out << ' ' << buf;
      }
      out << "\n";
    }
  };
  emit(c.bias_values());
  emit(c.weight_values());
}

void save_checkpoint(const Classifier& c, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ModelError("cannot write checkpoint " + path.string());
  save_checkpoint(c, out);
  if (!out) throw ModelError("checkpoint write failed for " + path.string());
}

Classifier load_checkpoint(std::shared_ptr<const FeatureBank> bank, std::istream& in) {
  std::string kind;
  std::size_t labels = 0, K = 0, n = 0;
  int zero = 0;
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  if (!(hs >> kind >> labels >> K >> n >> zero)) throw ModelError("malformed checkpoint header '" + header + "'");
  if (parse_feature_kind(kind) != bank->kind() || K != bank->size() || n != bank->dim()) {
    throw ModelError("checkpoint does not match the feature bank (" + header + ")");
  }
  Classifier c(std::move(bank), labels);
  if (zero != 0) c.attach_zero_class();
  auto read = [&](std::span<double> values) {
    std::string line;
    for (double& v : values) {
      in >> line;
      if (!in) throw ModelError("checkpoint truncated");
      char* end = nullptr;
      v = std::strtod(line.c_str(), &end);
      if (end == line.c_str() || *end != '\0') throw ModelError("bad checkpoint value '" + line + "'");
    }
  };
  read(c.bias_values());
  read(c.weight_values());
  return c;
}

Classifier load_checkpoint(std::shared_ptr<const FeatureBank> bank, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open checkpoint " + path.string());
  return load_checkpoint(std::move(bank), in);
}

}  // namespace wharm
