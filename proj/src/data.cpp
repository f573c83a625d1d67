#include "wharm/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

namespace wharm {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

void check_pixels(std::span<const double> image, std::size_t dim) {
  if (image.size() != dim) {
    throw DataError("image has " + std::to_string(image.size()) + " pixels, expected " + std::to_string(dim));
  }
  for (double v : image) {
    if (!(v >= 0.0 && v <= 1.0)) throw DataError("pixel value outside [0, 1]");
  }
}

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  return (std::uint32_t(bytes[offset]) << 24) | (std::uint32_t(bytes[offset + 1]) << 16) |
         (std::uint32_t(bytes[offset + 2]) << 8) | std::uint32_t(bytes[offset + 3]);
}

// gzread passes plain files through untouched, so gzipped and raw IDX files
// share one reader.
std::vector<std::uint8_t> read_maybe_gzip(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("file not found: " + path.string());
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (f == nullptr) throw DataError("cannot open " + path.string());
  std::vector<std::uint8_t> out;
  std::vector<std::uint8_t> chunk(1 << 20);
  int got = 0;
  while ((got = gzread(f, chunk.data(), unsigned(chunk.size()))) > 0) {
    out.insert(out.end(), chunk.begin(), chunk.begin() + got);
  }
  const bool failed = got < 0;
  gzclose(f);
  if (failed) throw IdxTruncatedError("corrupt gzip stream in " + path.string());
  return out;
}

}  // namespace

void LabeledSet::push_back(std::span<const double> image, int label) {
  if (!origins_.empty()) throw DataError("set carries origin tags; push_back needs an origin");
  check_pixels(image, dim());
  pixels_.insert(pixels_.end(), image.begin(), image.end());
  labels_.push_back(label);
}

void LabeledSet::push_back(std::span<const double> image, int label, Origin origin) {
  if (origins_.empty() && !labels_.empty()) origins_.assign(labels_.size(), Origin::Natural);
  check_pixels(image, dim());
  pixels_.insert(pixels_.end(), image.begin(), image.end());
  labels_.push_back(label);
  origins_.push_back(origin);
}

void LabeledSet::append(const LabeledSet& other) {
  if (other.rows_ != rows_ || other.cols_ != cols_) throw DataError("cannot append sets of different image shape");
  if (has_origins() || other.has_origins()) {
    if (!has_origins()) origins_.assign(labels_.size(), Origin::Natural);
    for (std::size_t i = 0; i < other.size(); ++i) origins_.push_back(other.origin(i));
  }
  pixels_.insert(pixels_.end(), other.pixels_.begin(), other.pixels_.end());
  labels_.insert(labels_.end(), other.labels_.begin(), other.labels_.end());
}

LabeledSet LabeledSet::subset(std::span<const std::size_t> rows) const {
  LabeledSet out(rows_, cols_);
  out.provenance = provenance;
  out.pixels_.reserve(rows.size() * dim());
  for (std::size_t r : rows) {
    if (r >= size()) throw DataError("subset row out of range");
    const auto img = image(r);
    out.pixels_.insert(out.pixels_.end(), img.begin(), img.end());
    out.labels_.push_back(labels_[r]);
    if (has_origins()) out.origins_.push_back(origins_[r]);
  }
  return out;
}

LabeledSet LabeledSet::with_labels(std::vector<int> labels) const {
  if (labels.size() != size()) throw DataError("relabel size mismatch");
  LabeledSet out = *this;
  out.labels_ = std::move(labels);
  return out;
}

LabeledSet LabeledSet::with_origin(Origin origin) const {
  LabeledSet out = *this;
  out.origins_.assign(size(), origin);
  return out;
}

LabeledSet parse_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels) {
  if (images.size() < 16) throw IdxTruncatedError("IDX image header truncated");
  if (labels.size() < 8) throw IdxTruncatedError("IDX label header truncated");
  if (read_be32(images, 0) != kImageMagic) throw IdxMagicError("IDX image file has wrong magic number");
  if (read_be32(labels, 0) != kLabelMagic) throw IdxMagicError("IDX label file has wrong magic number");
  const std::size_t count = read_be32(images, 4);
  const int rows = int(read_be32(images, 8));
  const int cols = int(read_be32(images, 12));
  const std::size_t label_count = read_be32(labels, 4);
  if (count != label_count) {
    throw IdxCountMismatchError("IDX image count " + std::to_string(count) + " differs from label count " +
                                std::to_string(label_count));
  }
  const std::size_t dim = std::size_t(rows) * std::size_t(cols);
  if (images.size() < 16 + count * dim) throw IdxTruncatedError("IDX image payload truncated");
  if (labels.size() < 8 + count) throw IdxTruncatedError("IDX label payload truncated");

  LabeledSet set(rows, cols);
  std::vector<double> img(dim);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint8_t* src = images.data() + 16 + i * dim;
    for (std::size_t p = 0; p < dim; ++p) img[p] = double(src[p]) / 255.0;
    set.push_back(img, int(labels[8 + i]));
  }
  return set;
}

LabeledSet load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  const auto images = read_maybe_gzip(images_path);
  const auto labels = read_maybe_gzip(labels_path);
  LabeledSet set = parse_idx(images, labels);
  set.provenance["source"] = images_path.filename().string();
  return set;
}

std::vector<double> to_feature_domain(std::span<const double> pixels) {
  std::vector<double> out(pixels.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    if (!(pixels[i] >= 0.0 && pixels[i] <= 1.0)) throw DataError("pixel value outside [0, 1]");
    out[i] = pixels[i] * std::numbers::pi;
  }
  return out;
}

std::vector<double> from_feature_domain(std::span<const double> x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] / std::numbers::pi;
  return out;
}

void persist_set(const LabeledSet& set, const std::filesystem::path& path) {
  static_assert(std::endian::native == std::endian::little, "set container assumes a little-endian host");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "WHARMSET " << kSetFormatVersion << "\n";
  out << "rows " << set.image_rows() << " cols " << set.image_cols() << " count " << set.size() << " origins "
      << (set.has_origins() ? 1 : 0) << "\n";
  for (const auto& [key, value] : set.provenance) {
    if (key.find_first_of(" \n") != std::string::npos || value.find('\n') != std::string::npos) {
      throw DataError("provenance entries must be single-line and keys must not contain spaces");
    }
    out << "prov " << key << ' ' << value << "\n";
  }
  out << "end\n";
  out.write(reinterpret_cast<const char*>(set.pixels().data()), std::streamsize(set.pixels().size() * sizeof(double)));
  std::vector<std::int32_t> labels(set.labels().begin(), set.labels().end());
  out.write(reinterpret_cast<const char*>(labels.data()), std::streamsize(labels.size() * sizeof(std::int32_t)));
  if (set.has_origins()) {
    out.write(reinterpret_cast<const char*>(set.origins().data()), std::streamsize(set.origins().size()));
  }
  if (!out) throw DataError("write failed for " + path.string());
}

LabeledSet load_set(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  std::istringstream magic(line);
  std::string tag;
  int version = -1;
  magic >> tag >> version;
  if (tag != "WHARMSET" || version != kSetFormatVersion) {
    throw SetVersionError("unsupported set container header '" + line + "' in " + path.string());
  }
  std::getline(in, line);
  std::istringstream dims(line);
  std::string k1, k2, k3, k4;
  int rows = 0, cols = 0, origins = 0;
  std::size_t count = 0;
  dims >> k1 >> rows >> k2 >> cols >> k3 >> count >> k4 >> origins;
  if (!dims || k1 != "rows" || k2 != "cols" || k3 != "count" || k4 != "origins") {
    throw SetVersionError("malformed set container shape line in " + path.string());
  }
  LabeledSet set(rows, cols);
  while (std::getline(in, line) && line != "end") {
    if (line.rfind("prov ", 0) != 0) throw SetVersionError("unexpected header line '" + line + "'");
    const auto rest = line.substr(5);
    const auto sp = rest.find(' ');
    set.provenance[rest.substr(0, sp)] = sp == std::string::npos ? "" : rest.substr(sp + 1);
  }
  if (line != "end") throw SetVersionError("set container header not terminated");

  const std::size_t dim = set.dim();
  std::vector<double> pixels(count * dim);
  std::vector<std::int32_t> labels(count);
  std::vector<Origin> tags(origins ? count : 0);
  in.read(reinterpret_cast<char*>(pixels.data()), std::streamsize(pixels.size() * sizeof(double)));
  in.read(reinterpret_cast<char*>(labels.data()), std::streamsize(labels.size() * sizeof(std::int32_t)));
  if (origins) in.read(reinterpret_cast<char*>(tags.data()), std::streamsize(tags.size()));
  if (!in) throw DataError("set container payload truncated in " + path.string());
  for (std::size_t i = 0; i < count; ++i) {
    std::span<const double> img(pixels.data() + i * dim, dim);
    if (origins) {
      set.push_back(img, labels[i], tags[i]);
    } else {
      set.push_back(img, labels[i]);
    }
  }
  return set;
}

void export_csv(const LabeledSet& set, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "label,origin";
  for (std::size_t p = 0; p < set.dim(); ++p) out << ",p" << p;
  out << "\n";
  out.precision(17);
  for (std::size_t i = 0; i < set.size(); ++i) {
    out << set.label(i) << ',' << (set.origin(i) == Origin::Natural ? "natural" : "adversarial");
    for (double v : set.image(i)) out << ',' << v;
    out << "\n";
  }
}

std::vector<std::size_t> sample_rows(std::size_t population, std::size_t count, std::uint64_t seed) {
  if (count > population) throw DataError("cannot sample more rows than available");
  std::vector<std::size_t> rows(population);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates keeps the draw independent of library shuffle internals.
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, population - 1);
    std::swap(rows[i], rows[pick(rng)]);
  }
  rows.resize(count);
  std::sort(rows.begin(), rows.end());
  return rows;
}

}  // namespace wharm
