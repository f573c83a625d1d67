#include <doctest.h>

#include <zlib.h>

#include <fstream>
#include <numbers>

#include "wharm/data.hpp"

using namespace wharm;
namespace fs = std::filesystem;

namespace {

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(std::uint8_t(v >> s));
}

// Three 2x2 images with bytes 0, 51, 102, ... and labels 7, 0, 3.
std::vector<std::uint8_t> image_fixture(std::uint32_t magic = 0x803, std::uint32_t count = 3) {
  std::vector<std::uint8_t> b;
  put_be32(b, magic);
  put_be32(b, count);
  put_be32(b, 2);
  put_be32(b, 2);
  for (int i = 0; i < 12; ++i) b.push_back(std::uint8_t((i * 51) % 256));
  return b;
}

std::vector<std::uint8_t> label_fixture(std::uint32_t count = 3) {
  std::vector<std::uint8_t> b;
  put_be32(b, 0x801);
  put_be32(b, count);
  for (std::uint8_t l : {7, 0, 3}) b.push_back(l);
  return b;
}

fs::path scratch(const std::string& name) { return fs::temp_directory_path() / ("wharm_data_" + name); }

}  // namespace

TEST_CASE("IDX parsing") {
  const auto set = parse_idx(image_fixture(), label_fixture());
  REQUIRE(set.size() == 3);
  CHECK(set.image_rows() == 2);
  CHECK(set.image_cols() == 2);
  CHECK(set.labels() == std::vector<int>{7, 0, 3});
  CHECK(set.image(0)[1] == doctest::Approx(51.0 / 255.0));
  CHECK(set.image(1)[0] == doctest::Approx(204.0 / 255.0));
  CHECK(set.image(2)[3] == doctest::Approx(((11 * 51) % 256) / 255.0));

  CHECK_THROWS_AS(parse_idx(image_fixture(0x802), label_fixture()), IdxMagicError);
  auto cut = image_fixture();
  cut.pop_back();
  CHECK_THROWS_AS(parse_idx(cut, label_fixture()), IdxTruncatedError);
  CHECK_THROWS_AS(parse_idx(image_fixture(0x803, 2), label_fixture()), IdxCountMismatchError);
}

TEST_CASE("IDX files load raw or gzipped") {
  const auto img = image_fixture();
  const auto lab = label_fixture();
  {
    std::ofstream(scratch("img"), std::ios::binary).write(reinterpret_cast<const char*>(img.data()), std::streamsize(img.size()));
    std::ofstream(scratch("lab"), std::ios::binary).write(reinterpret_cast<const char*>(lab.data()), std::streamsize(lab.size()));
    gzFile gz = gzopen(scratch("img.gz").string().c_str(), "wb");
    gzwrite(gz, img.data(), unsigned(img.size()));
    gzclose(gz);
  }
  const auto raw = load_idx(scratch("img"), scratch("lab"));
  const auto zipped = load_idx(scratch("img.gz"), scratch("lab"));
  CHECK(raw.pixels() == zipped.pixels());
  CHECK(raw.labels() == zipped.labels());
  CHECK(raw.size() == 3);
  CHECK_THROWS_AS(load_idx(scratch("missing"), scratch("lab")), DataError);
  for (const char* f : {"img", "lab", "img.gz"}) fs::remove(scratch(f));
}

TEST_CASE("feature-domain scaling") {
  const std::vector<double> p{0.0, 0.25, 1.0};
  const auto x = to_feature_domain(p);
  CHECK(x[1] == doctest::Approx(std::numbers::pi / 4));
  CHECK(x[2] == doctest::Approx(std::numbers::pi));
  const auto back = from_feature_domain(x);
  for (std::size_t i = 0; i < 3; ++i) CHECK(back[i] == doctest::Approx(p[i]));
  CHECK_THROWS_AS(to_feature_domain(std::vector<double>{1.5}), DataError);
}

TEST_CASE("labeled set operations") {
  LabeledSet s(1, 2);
  s.push_back(std::vector<double>{0.1, 0.2}, 1);
  s.push_back(std::vector<double>{0.3, 0.4}, 2);
  s.push_back(std::vector<double>{0.5, 0.6}, 3);
  CHECK_THROWS_AS(s.push_back(std::vector<double>{0.5}, 3), DataError);
  CHECK_THROWS_AS(s.push_back(std::vector<double>{0.5, 1.1}, 3), DataError);

  const std::vector<std::size_t> rows{2, 0};
  const auto sub = s.subset(rows);
  CHECK(sub.labels() == std::vector<int>{3, 1});
  CHECK(sub.image(0)[1] == 0.6);

  const auto tagged = s.with_origin(Origin::Adversarial);
  CHECK(tagged.origin(1) == Origin::Adversarial);
  auto merged = s;
  merged.append(tagged);
  CHECK(merged.size() == 6);
  CHECK(merged.origin(0) == Origin::Natural);
  CHECK(merged.origin(5) == Origin::Adversarial);
  CHECK(s.with_labels({0, 0, 1}).labels() == std::vector<int>{0, 0, 1});
  CHECK_THROWS_AS(merged.append(LabeledSet(2, 2)), DataError);
}

TEST_CASE("set persistence round-trips bit-exactly and rejects tampering") {
  LabeledSet s(2, 2);
  s.push_back(std::vector<double>{0.1, 1.0 / 3.0, 0.0, 1.0}, 4, Origin::Natural);
  s.push_back(std::vector<double>{0.7, 0.2, 0.5, 0.125}, 9, Origin::Adversarial);
  s.provenance["seed"] = "42";
  s.provenance["attack"] = "radius=0.3;steps=40";
  persist_set(s, scratch("set"));
  CHECK(load_set(scratch("set")) == s);

  std::string bytes;
  {
    std::ifstream in(scratch("set"), std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  auto tampered = bytes;
  tampered.replace(0, 10, "WHARMSET 9");
  std::ofstream(scratch("bad"), std::ios::binary) << tampered;
  CHECK_THROWS_AS(load_set(scratch("bad")), SetVersionError);

  std::ofstream(scratch("short"), std::ios::binary) << bytes.substr(0, bytes.size() - 5);
  CHECK_THROWS_AS(load_set(scratch("short")), DataError);

  LabeledSet bad_prov(1, 1);
  bad_prov.provenance["a key"] = "x";
  CHECK_THROWS_AS(persist_set(bad_prov, scratch("prov")), DataError);

  export_csv(s, scratch("csv"));
  std::ifstream csv(scratch("csv"));
  std::string header, first;
  std::getline(csv, header);
  std::getline(csv, first);
  CHECK(header == "label,origin,p0,p1,p2,p3");
  CHECK(first.rfind("4,natural,0.1", 0) == 0);
  for (const char* f : {"set", "bad", "short", "prov", "csv"}) fs::remove(scratch(f));
}

TEST_CASE("seeded row sampling") {
  const auto a = sample_rows(1000, 50, 7);
  CHECK(a.size() == 50);
  CHECK(std::is_sorted(a.begin(), a.end()));
  CHECK(std::adjacent_find(a.begin(), a.end()) == a.end());
  CHECK(a.back() < 1000);
  CHECK(a == sample_rows(1000, 50, 7));
  CHECK(a != sample_rows(1000, 50, 8));
  CHECK(sample_rows(5, 5, 1) == std::vector<std::size_t>{0, 1, 2, 3, 4});
  CHECK_THROWS_AS(sample_rows(3, 4, 1), DataError);
}
