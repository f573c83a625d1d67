#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "wharm/features.hpp"

namespace wharm {

enum class FeatureKind { Cosine, Holomorphic };

std::string to_string(FeatureKind kind);
FeatureKind parse_feature_kind(const std::string& text);

struct Cell {
  int row = 0;
  int col = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
  friend auto operator<=>(const Cell&, const Cell&) = default;
};

/// Binary template mask. Active cells are stored relative to the mask's
/// top-left corner; dilation d places cell (r, c) at offset (d*r, d*c).
struct TemplateMask {
  std::string name;
  std::vector<Cell> cells;

  int height() const;
  int width() const;
};

struct ImageShape {
  int rows = 0;
  int cols = 0;
  std::size_t size() const { return std::size_t(rows) * std::size_t(cols); }
};

struct TemplateConfig {
  FeatureKind kind = FeatureKind::Holomorphic;
  std::vector<int> dilations{1, 2, 3, 4, 5};
  std::vector<TemplateMask> masks;

  /// singleton, horizontal pair, vertical pair, diagonal pair and 2x2 block.
  static TemplateConfig default_family(FeatureKind kind);

  /// Text format, one directive per line, '#' starts a comment:
  ///
  ///   kind holomorphic
  ///   dilations 1 2 3 4 5
  ///   mask hpair
  ///   11
  ///
  /// Mask rows are strings of 0/1 and run until the next directive.
  static TemplateConfig parse(std::istream& in);
  static TemplateConfig load(const std::filesystem::path& path);
  void write(std::ostream& out) const;
};

/// Ordered set of multi-indices plus their whitening divisors. Also owns a
/// flattened term table used by the batched evaluators below.
class FeatureBank {
 public:
  FeatureBank(FeatureKind kind, ImageShape shape, std::vector<MultiIndex> indices);

  FeatureKind kind() const { return kind_; }
  ImageShape shape() const { return shape_; }
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return indices_.size(); }
  const std::vector<MultiIndex>& indices() const { return indices_; }
  const std::vector<double>& scales() const { return scales_; }

  /// Widest support in the bank and largest frequency; both size the term table.
  std::size_t max_support() const { return width_; }
  unsigned max_power() const { return max_power_; }

  /// Whitened features phi*_k(pi x) for a pixel vector x in [0,1]^n.
  void evaluate_cosine(std::span<const double> pixels, std::span<double> out) const;
  void evaluate_holomorphic(std::span<const double> pixels, std::span<Complex> out) const;

  /// Pull a per-feature adjoint back to pixel coordinates:
  ///   cosine:      grad_x += sum_k adjoint_k * d phi*_k / dx
  ///   holomorphic: grad_x += sum_k Re(adjoint_k * d psi*_k / dx)
  /// The pi of the pixel-to-feature-domain scaling is included.
  void backprop_cosine(std::span<const double> pixels, std::span<const double> adjoint,
                       std::span<double> grad_pixels) const;
  void backprop_holomorphic(std::span<const double> pixels, std::span<const Complex> adjoint,
                            std::span<double> grad_pixels) const;

 private:
  void fill_cos_tables(std::span<const double> pixels, std::vector<double>& cos_t,
                       std::vector<double>* sin_t) const;

  FeatureKind kind_;
  ImageShape shape_;
  std::size_t dim_;
  std::vector<MultiIndex> indices_;
  std::vector<double> scales_;
  std::vector<double> inv_scales_;

  // Row k holds `width_` slots (pixel, power). Unused slots point at the
  // padding pixel `dim_` with power 0, whose table entry is exactly 1.
  std::size_t width_ = 1;
  unsigned max_power_ = 1;
  std::vector<std::uint32_t> slot_pixel_;
  std::vector<std::uint32_t> slot_power_;
};

/// All placements of every dilated mask that fit inside the image, closed under
/// removal of single cells, deduplicated. Order is (mask, dilation, row, col),
/// each placement followed by its not-yet-seen sub-masks.
FeatureBank enumerate_bank(ImageShape shape, const TemplateConfig& config);

}  // namespace wharm
