#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace wharm {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Distinct IDX failure modes.
class IdxMagicError : public DataError {
 public:
  using DataError::DataError;
};
class IdxTruncatedError : public DataError {
 public:
  using DataError::DataError;
};
class IdxCountMismatchError : public DataError {
 public:
  using DataError::DataError;
};
class SetVersionError : public DataError {
 public:
  using DataError::DataError;
};

enum class Origin : std::uint8_t { Natural = 0, Adversarial = 1 };

/// Images as rows of pixels in [0, 1], flattened row-major.
class LabeledSet {
 public:
  LabeledSet() = default;
  LabeledSet(int rows, int cols) : rows_(rows), cols_(cols) {}

  int image_rows() const { return rows_; }
  int image_cols() const { return cols_; }
  std::size_t dim() const { return std::size_t(rows_) * std::size_t(cols_); }
  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }

  std::span<const double> image(std::size_t i) const { return {pixels_.data() + i * dim(), dim()}; }
  int label(std::size_t i) const { return labels_[i]; }
  const std::vector<int>& labels() const { return labels_; }
  const std::vector<double>& pixels() const { return pixels_; }

  bool has_origins() const { return !origins_.empty(); }
  Origin origin(std::size_t i) const { return origins_.empty() ? Origin::Natural : origins_[i]; }
  const std::vector<Origin>& origins() const { return origins_; }

  /// Throws DataError if a pixel leaves [0, 1] or the size is wrong.
  void push_back(std::span<const double> image, int label);
  void push_back(std::span<const double> image, int label, Origin origin);
  void append(const LabeledSet& other);

  LabeledSet subset(std::span<const std::size_t> rows) const;
  LabeledSet with_labels(std::vector<int> labels) const;
  LabeledSet with_origin(Origin origin) const;

  /// Free-form provenance (seed, attack settings, split) carried through persistence.
  std::map<std::string, std::string> provenance;

  friend bool operator==(const LabeledSet&, const LabeledSet&) = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> pixels_;
  std::vector<int> labels_;
  std::vector<Origin> origins_;
};

/// Parses big-endian IDX image (magic 0x803) and label (magic 0x801) files,
/// optionally gzip-wrapped, scaling bytes by 1/255.
LabeledSet load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

/// Parses an in-memory IDX pair; exposed for fixture tests.
LabeledSet parse_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels);

/// Pixel [0,1] -> feature domain [0,pi] and back.
std::vector<double> to_feature_domain(std::span<const double> pixels);
std::vector<double> from_feature_domain(std::span<const double> x);

inline constexpr int kSetFormatVersion = 1;

void persist_set(const LabeledSet& set, const std::filesystem::path& path);
LabeledSet load_set(const std::filesystem::path& path);
void export_csv(const LabeledSet& set, const std::filesystem::path& path);

/// Seeded sample of `count` rows without replacement, returned in increasing order.
std::vector<std::size_t> sample_rows(std::size_t population, std::size_t count, std::uint64_t seed);

}  // namespace wharm
