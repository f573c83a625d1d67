#include "wharm/feature_bank.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace wharm {

std::string to_string(FeatureKind kind) {
  return kind == FeatureKind::Cosine ? "cosine" : "holomorphic";
}

FeatureKind parse_feature_kind(const std::string& text) {
  std::string lower = text;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "cosine") return FeatureKind::Cosine;
  if (lower == "holomorphic") return FeatureKind::Holomorphic;
  throw FeatureError("unknown feature kind '" + text + "'");
}

int TemplateMask::height() const {
  int h = 0;
  for (const auto& c : cells) h = std::max(h, c.row + 1);
  return h;
}

int TemplateMask::width() const {
  int w = 0;
  for (const auto& c : cells) w = std::max(w, c.col + 1);
  return w;
}

TemplateConfig TemplateConfig::default_family(FeatureKind kind) {
  TemplateConfig cfg;
  cfg.kind = kind;
  cfg.masks = {
      {"singleton", {{0, 0}}},
      {"hpair", {{0, 0}, {0, 1}}},
      {"vpair", {{0, 0}, {1, 0}}},
      {"diagonal", {{0, 0}, {1, 1}}},
      {"block", {{0, 0}, {0, 1}, {1, 0}, {1, 1}}},
  };
  return cfg;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool is_mask_row(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c == '0' || c == '1'; });
}

void finish_mask(TemplateMask& mask, int line_no) {
  if (mask.cells.empty()) {
    throw FeatureError("template config line " + std::to_string(line_no) + ": mask '" + mask.name +
                       "' has no active cells");
  }
  // Normalize so the top-left active cell bounds sit at (0, 0).
  int r0 = mask.cells.front().row, c0 = mask.cells.front().col;
  for (const auto& c : mask.cells) {
    r0 = std::min(r0, c.row);
    c0 = std::min(c0, c.col);
  }
  for (auto& c : mask.cells) {
    c.row -= r0;
    c.col -= c0;
  }
  std::sort(mask.cells.begin(), mask.cells.end());
}

}  // namespace

TemplateConfig TemplateConfig::parse(std::istream& in) {
  TemplateConfig cfg;
  cfg.masks.clear();
  bool have_kind = false;
  TemplateMask* current = nullptr;
  int mask_row = 0;
  int line_no = 0;
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    if (current != nullptr && is_mask_row(line)) {
      for (int c = 0; c < int(line.size()); ++c) {
        if (line[std::size_t(c)] == '1') current->cells.push_back({mask_row, c});
      }
      ++mask_row;
      continue;
    }
    if (current != nullptr) {
      finish_mask(*current, line_no);
      current = nullptr;
    }
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "kind") {
      std::string value;
      ls >> value;
      cfg.kind = parse_feature_kind(value);
      have_kind = true;
    } else if (key == "dilations") {
      cfg.dilations.clear();
      int d = 0;
      while (ls >> d) {
        if (d < 1 || d > 5) {
          throw FeatureError("template config line " + std::to_string(line_no) + ": dilation " +
                             std::to_string(d) + " outside [1, 5]");
        }
        cfg.dilations.push_back(d);
      }
      if (!ls.eof()) throw FeatureError("template config line " + std::to_string(line_no) + ": bad dilation list");
    } else if (key == "mask") {
      std::string name;
      ls >> name;
      if (name.empty()) name = "mask" + std::to_string(cfg.masks.size());
      cfg.masks.push_back({name, {}});
      current = &cfg.masks.back();
      mask_row = 0;
    } else {
      throw FeatureError("template config line " + std::to_string(line_no) + ": unknown directive '" + key + "'");
    }
  }
  if (current != nullptr) finish_mask(*current, line_no);
  if (!have_kind) throw FeatureError("template config is missing a 'kind' line");
  if (cfg.masks.empty()) throw FeatureError("template config lists no masks");
  if (cfg.dilations.empty()) throw FeatureError("template config lists no dilations");
  return cfg;
}

TemplateConfig TemplateConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FeatureError("cannot open template config " + path.string());
  return parse(in);
}

void TemplateConfig::write(std::ostream& out) const {
  out << "kind " << to_string(kind) << "\n";
  out << "dilations";
  for (int d : dilations) out << ' ' << d;
  out << "\n";
  for (const auto& m : masks) {
    out << "mask " << m.name << "\n";
    for (int r = 0; r < m.height(); ++r) {
      std::string row(std::size_t(m.width()), '0');
      for (const auto& c : m.cells) {
        if (c.row == r) row[std::size_t(c.col)] = '1';
      }
      out << row << "\n";
    }
  }
}

FeatureBank::FeatureBank(FeatureKind kind, ImageShape shape, std::vector<MultiIndex> indices)
    : kind_(kind), shape_(shape), dim_(shape.size()), indices_(std::move(indices)) {
  if (indices_.empty()) throw FeatureError("feature bank is empty");
  std::set<MultiIndex> seen;
  scales_.reserve(indices_.size());
  for (const auto& alpha : indices_) {
    if (alpha.dim() != dim_) throw FeatureError("multi-index dimension does not match image shape");
    if (!seen.insert(alpha).second) throw FeatureError("feature bank contains a duplicate multi-index");
    scales_.push_back(whiten_scale(alpha));
    inv_scales_.push_back(1.0 / scales_.back());
    width_ = std::max(width_, alpha.support_size());
    max_power_ = std::max(max_power_, alpha.max_norm());
  }
  slot_pixel_.assign(indices_.size() * width_, std::uint32_t(dim_));
  slot_power_.assign(indices_.size() * width_, 0);
  for (std::size_t k = 0; k < indices_.size(); ++k) {
    const auto terms = indices_[k].terms();
    for (std::size_t j = 0; j < terms.size(); ++j) {
      slot_pixel_[k * width_ + j] = std::uint32_t(terms[j].index);
      slot_power_[k * width_ + j] = terms[j].power;
    }
  }
}

void FeatureBank::fill_cos_tables(std::span<const double> pixels, std::vector<double>& cos_t,
                                  std::vector<double>* sin_t) const {
  const std::size_t stride = max_power_ + 1;
  cos_t.assign((dim_ + 1) * stride, 1.0);
  if (sin_t != nullptr) sin_t->assign((dim_ + 1) * stride, 0.0);
  for (std::size_t p = 0; p < dim_; ++p) {
    const double theta = std::numbers::pi * pixels[p];
    for (unsigned a = 1; a <= max_power_; ++a) {
      cos_t[p * stride + a] = std::cos(a * theta);
      if (sin_t != nullptr) (*sin_t)[p * stride + a] = std::sin(a * theta);
    }
  }
}

void FeatureBank::evaluate_cosine(std::span<const double> pixels, std::span<double> out) const {
  if (pixels.size() != dim_ || out.size() != size()) throw FeatureError("evaluate_cosine: size mismatch");
  thread_local std::vector<double> cos_t;
  fill_cos_tables(pixels, cos_t, nullptr);
  const std::size_t stride = max_power_ + 1;
  const std::size_t K = size();
  for (std::size_t k = 0; k < K; ++k) {
    const std::uint32_t* px = &slot_pixel_[k * width_];
    const std::uint32_t* pw = &slot_power_[k * width_];
    double v = inv_scales_[k];
    for (std::size_t j = 0; j < width_; ++j) v *= cos_t[px[j] * stride + pw[j]];
    out[k] = v;
  }
}

void FeatureBank::evaluate_holomorphic(std::span<const double> pixels, std::span<Complex> out) const {
  if (pixels.size() != dim_ || out.size() != size()) throw FeatureError("evaluate_holomorphic: size mismatch");
  thread_local std::vector<double> cos_t, sin_t;
  fill_cos_tables(pixels, cos_t, &sin_t);
  const std::size_t stride = max_power_ + 1;
  const std::size_t K = size();
  for (std::size_t k = 0; k < K; ++k) {
    const std::uint32_t* px = &slot_pixel_[k * width_];
    const std::uint32_t* pw = &slot_power_[k * width_];
    double re = inv_scales_[k], im = 0.0;
    for (std::size_t j = 0; j < width_; ++j) {
      const std::size_t t = px[j] * stride + pw[j];
      const double c = cos_t[t], s = sin_t[t];
      const double nre = re * c - im * s;
      im = re * s + im * c;
      re = nre;
    }
    out[k] = {re, im};
  }
}

void FeatureBank::backprop_cosine(std::span<const double> pixels, std::span<const double> adjoint,
                                  std::span<double> grad_pixels) const {
  if (pixels.size() != dim_ || adjoint.size() != size() || grad_pixels.size() != dim_) {
    throw FeatureError("backprop_cosine: size mismatch");
  }
  thread_local std::vector<double> cos_t, sin_t, grad;
  fill_cos_tables(pixels, cos_t, &sin_t);
  grad.assign(dim_ + 1, 0.0);
  const std::size_t stride = max_power_ + 1;
  for (std::size_t k = 0; k < size(); ++k) {
    const double g = adjoint[k] * inv_scales_[k];
    if (g == 0.0) continue;
    const std::uint32_t* px = &slot_pixel_[k * width_];
    const std::uint32_t* pw = &slot_power_[k * width_];
    for (std::size_t j = 0; j < width_; ++j) {
      if (pw[j] == 0) continue;
      double d = -double(pw[j]) * sin_t[px[j] * stride + pw[j]];
      for (std::size_t l = 0; l < width_; ++l) {
        if (l != j) d *= cos_t[px[l] * stride + pw[l]];
      }
      grad[px[j]] += g * d;
    }
  }
  for (std::size_t p = 0; p < dim_; ++p) grad_pixels[p] += std::numbers::pi * grad[p];
}

void FeatureBank::backprop_holomorphic(std::span<const double> pixels, std::span<const Complex> adjoint,
                                       std::span<double> grad_pixels) const {
  if (pixels.size() != dim_ || adjoint.size() != size() || grad_pixels.size() != dim_) {
    throw FeatureError("backprop_holomorphic: size mismatch");
  }
  thread_local std::vector<double> cos_t, sin_t, grad;
  fill_cos_tables(pixels, cos_t, &sin_t);
  grad.assign(dim_ + 1, 0.0);
  const std::size_t stride = max_power_ + 1;
  for (std::size_t k = 0; k < size(); ++k) {
    const std::uint32_t* px = &slot_pixel_[k * width_];
    const std::uint32_t* pw = &slot_power_[k * width_];
    double re = inv_scales_[k], im = 0.0;
    for (std::size_t j = 0; j < width_; ++j) {
      const std::size_t t = px[j] * stride + pw[j];
      const double c = cos_t[t], s = sin_t[t];
      const double nre = re * c - im * s;
      im = re * s + im * c;
      re = nre;
    }
    // d psi / dx_p = i a psi, so Re(adjoint * i a psi) = -a Im(adjoint * psi).
    const double m = -(adjoint[k].real() * im + adjoint[k].imag() * re);
    for (std::size_t j = 0; j < width_; ++j) grad[px[j]] += double(pw[j]) * m;
  }
  for (std::size_t p = 0; p < dim_; ++p) grad_pixels[p] += std::numbers::pi * grad[p];
}

FeatureBank enumerate_bank(ImageShape shape, const TemplateConfig& config) {
  if (shape.rows <= 0 || shape.cols <= 0) throw FeatureError("image shape must be positive");
  for (int d : config.dilations) {
    if (d < 1 || d > 5) throw FeatureError("dilation " + std::to_string(d) + " outside [1, 5]");
  }
  const std::size_t n = shape.size();
  std::set<MultiIndex> seen;
  std::vector<MultiIndex> ordered;

  auto add = [&](MultiIndex alpha) {
    if (seen.insert(alpha).second) ordered.push_back(std::move(alpha));
  };

  for (const auto& mask : config.masks) {
    if (mask.cells.empty()) throw FeatureError("mask '" + mask.name + "' has no active cells");
    for (int d : config.dilations) {
      const int span_r = (mask.height() - 1) * d;
      const int span_c = (mask.width() - 1) * d;
      for (int r = 0; r + span_r < shape.rows; ++r) {
        for (int c = 0; c + span_c < shape.cols; ++c) {
          std::vector<IndexTerm> terms;
          for (const auto& cell : mask.cells) {
            terms.push_back({std::size_t(r + cell.row * d) * std::size_t(shape.cols) + std::size_t(c + cell.col * d), 1});
          }
          // Breadth-first walk over sub-masks, one removed cell at a time.
          std::vector<MultiIndex> frontier{MultiIndex(n, std::move(terms))};
          while (!frontier.empty()) {
            std::vector<MultiIndex> next;
            for (auto& alpha : frontier) {
              if (seen.contains(alpha)) continue;
              if (alpha.support_size() > 1) {
                for (const auto& t : alpha.terms()) next.push_back(alpha.without(t.index));
              }
              add(std::move(alpha));
            }
            frontier = std::move(next);
          }
        }
      }
    }
  }
  if (ordered.empty()) throw FeatureError("template config produced an empty feature bank");
  return FeatureBank(config.kind, shape, std::move(ordered));
}

}  // namespace wharm
