// Copyright 2026 The capsbench Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "doctest.h"

#include "capsbench/data.hpp"
#include "capsbench/errors.hpp"

using namespace capsbench;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path operator/(const std::string& leaf) const { return path / leaf; }
};

void write_file(const fs::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
}

std::vector<unsigned char> be(std::uint32_t v) {
  return {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 8),
          static_cast<unsigned char>(v)};
}

std::vector<unsigned char> concat(std::initializer_list<std::vector<unsigned char>> parts) {
  std::vector<unsigned char> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

// Two 2x3 images: 0..5 and 250..255, labels 3 and 9.
void write_idx_fixture(const TempDir& dir) {
  write_file(dir / "img", concat({be(0x803), be(2), be(2), be(3), {0, 1, 2, 3, 4, 5, 250, 251, 252, 253, 254, 255}}));
  write_file(dir / "lab", concat({be(0x801), be(2), {3, 9}}));
}

Dataset ones(Index n, Index h, Index w) {
  return Dataset{"ones", Tensor<float>::full({n, 1, h, w}, 1.f), std::vector<Index>(std::size_t(n), 0), 10};
}

Dataset random_dataset(Index n, Index side, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  Dataset d{"rand", Tensor<float>({n, 1, side, side}), {}, 10};
  for (Index i = 0; i < d.images.size(); ++i) d.images[i] = u(rng);
  for (Index i = 0; i < n; ++i) d.labels.push_back(i % 10);
  return d;
}

}  // namespace

TEST_CASE("load_idx reads the fixture exactly") {
  TempDir dir("capsbench_idx");
  write_idx_fixture(dir);
  auto d = load_idx(dir / "img", dir / "lab");
  CHECK(d.size() == 2);
  CHECK(d.images.shape() == Shape{2, 1, 2, 3});
  CHECK(d.labels == std::vector<Index>{3, 9});
  const unsigned char raw[] = {0, 1, 2, 3, 4, 5, 250, 251, 252, 253, 254, 255};
  for (Index i = 0; i < 12; ++i) CHECK(d.images[i] == float(raw[i]) / 255.f);
  CHECK_NOTHROW(d.validate());

  auto first = load_idx(dir / "img", dir / "lab", 1);
  CHECK(first.size() == 1);
  CHECK(first.images.shape() == Shape{1, 1, 2, 3});

  SUBCASE("round trip through save_idx") {
    save_idx(dir / "img2", dir / "lab2", d);
    auto again = load_idx(dir / "img2", dir / "lab2");
    CHECK(again.images == d.images);
    CHECK(again.labels == d.labels);
    CHECK(file_checksum(dir / "img2") == file_checksum(dir / "img"));
  }
}

TEST_CASE("load_idx rejects corrupted files") {
  TempDir dir("capsbench_idx_bad");
  write_idx_fixture(dir);
  SUBCASE("label file given as images") { CHECK_THROWS_AS(load_idx(dir / "lab", dir / "lab"), FormatError); }
  SUBCASE("image file given as labels") { CHECK_THROWS_AS(load_idx(dir / "img", dir / "img"), FormatError); }
  SUBCASE("count mismatch") {
    write_file(dir / "lab3", concat({be(0x801), be(3), {3, 9, 1}}));
    CHECK_THROWS_AS(load_idx(dir / "img", dir / "lab3"), ConsistencyError);
  }
  SUBCASE("truncated pixels") {
    write_file(dir / "short", concat({be(0x803), be(2), be(2), be(3), {0, 1, 2}}));
    CHECK_THROWS_AS(load_idx(dir / "short", dir / "lab"), LengthError);
  }
  SUBCASE("truncated header") {
    write_file(dir / "stub", {0, 0, 8});
    CHECK_THROWS_AS(load_idx(dir / "stub", dir / "lab"), LengthError);
  }
  SUBCASE("label out of range") {
    write_file(dir / "lab10", concat({be(0x801), be(2), {3, 10}}));
    CHECK_THROWS_AS(load_idx(dir / "img", dir / "lab10"), FormatError);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(load_idx(dir / "nope", dir / "lab"), IoError); }
  SUBCASE("all of these are data errors") { CHECK_THROWS_AS(load_idx(dir / "lab", dir / "lab"), DataError); }
}

TEST_CASE("load_cifar10") {
  TempDir dir("capsbench_cifar");
  std::vector<unsigned char> record{7};
  for (int k = 0; k < 3072; ++k) record.push_back(static_cast<unsigned char>(k % 256));
  write_file(dir / "one.bin", record);

  const std::vector<fs::path> one{dir / "one.bin"};
  auto d = load_cifar10(one);
  REQUIRE(d.size() == 1);
  CHECK(d.labels[0] == 7);
  CHECK(d.images.shape() == Shape{1, 3, 32, 32});
  for (Index ch = 0; ch < 3; ++ch)
    for (Index y = 0; y < 32; ++y)
      for (Index x = 0; x < 32; ++x) CHECK(d.images.at({0, ch, y, x}) == float((ch * 1024 + y * 32 + x) % 256) / 255.f);

  auto second = record;
  second[0] = 2;
  write_file(dir / "two.bin", concat({record, second}));
  const std::vector<fs::path> both{dir / "one.bin", dir / "two.bin"};
  auto merged = load_cifar10(both);
  CHECK(merged.labels == std::vector<Index>{7, 7, 2});

  write_file(dir / "empty.bin", {});
  const std::vector<fs::path> empty{dir / "empty.bin"};
  CHECK(load_cifar10(empty).size() == 0);

  record.pop_back();
  write_file(dir / "cut.bin", record);
  const std::vector<fs::path> cut{dir / "cut.bin"};
  CHECK_THROWS_AS(load_cifar10(cut), FormatError);

  record.push_back(0);
  record[0] = 10;
  write_file(dir / "label.bin", record);
  const std::vector<fs::path> bad_label{dir / "label.bin"};
  CHECK_THROWS_AS(load_cifar10(bad_label), FormatError);
}

TEST_CASE("pad_center") {
  auto padded = pad_center(ones(2, 28, 28), 40, 40);
  REQUIRE(padded.images.shape() == Shape{2, 1, 40, 40});
  for (Index y = 0; y < 40; ++y)
    for (Index x = 0; x < 40; ++x) {
      const bool inside = y >= 6 && y <= 33 && x >= 6 && x <= 33;
      CHECK(padded.images.at({1, 0, y, x}) == (inside ? 1.f : 0.f));
    }

  auto r = random_dataset(5, 28, 3);
  auto rp = pad_center(r, 40, 40);
  for (Index i = 0; i < 5; ++i) {
    double before = 0, after = 0;
    for (Index k = 0; k < 784; ++k) before += r.images[i * 784 + k];
    for (Index k = 0; k < 1600; ++k) after += rp.images[i * 1600 + k];
    CHECK(before == after);
  }
  CHECK(rp.labels == r.labels);

  auto square = random_dataset(2, 40, 4);
  CHECK(pad_center(square, 40, 40).images == square.images);
  CHECK_THROWS_AS(pad_center(square, 28, 28), GeometryError);
}

TEST_CASE("affine transform") {
  auto base = pad_center(random_dataset(6, 28, 5), 40, 40);

  SUBCASE("identity spec is bitwise identity") {
    CHECK(affine_transform(base, AffineSpec::identity(9)).images == base.images);
  }
  SUBCASE("integer translation moves a delta exactly") {
    Tensor<float> img({1, 40, 40});
    img.at({0, 10, 12}) = 1.f;
    Tensor<float> out({1, 40, 40});
    warp_image(img.span(), out.span(), 1, 40, 40, {.tx = 3, .ty = 2});
    CHECK(out.at({0, 12, 15}) == 1.f);
    CHECK(out.vec().sum() == 1.f);
  }
  SUBCASE("quarter turn permutes pixels") {
    auto one = base.select(std::vector<Index>{0});
    Tensor<float> out({1, 40, 40});
    warp_image(one.images.span(), out.span(), 1, 40, 40, {.rotation_deg = 90});
    // (x, y) lands on (c - (y - c), c + (x - c)) with c = 19.5
    for (Index y = 0; y < 40; ++y)
      for (Index x = 0; x < 40; ++x) CHECK(std::abs(out.at({0, x, 39 - y}) - one.images.at({0, 0, y, x})) <= 1e-5f);
  }
  SUBCASE("uniform scaling about the centre keeps the centre pixel block") {
    Tensor<float> img = Tensor<float>::full({1, 40, 40}, 0.5f);
    Tensor<float> out({1, 40, 40});
    warp_image(img.span(), out.span(), 1, 40, 40, {.scale = 0.5});
    CHECK(out.at({0, 20, 20}) == 0.5f);
    CHECK(out.at({0, 0, 0}) == 0.f);
  }
  SUBCASE("seeded determinism") {
    AffineSpec spec;
    spec.seed = 11;
    auto a = affine_transform(base, spec);
    auto b = affine_transform(base, spec);
    CHECK(a.images == b.images);
    spec.seed = 12;
    CHECK_FALSE(affine_transform(base, spec).images == a.images);
    CHECK(a.labels == base.labels);
    CHECK(a.images.vec().minCoeff() >= 0.f);
    CHECK(a.images.vec().maxCoeff() <= 1.f);
  }
  SUBCASE("requires 40x40") { CHECK_THROWS_AS(affine_transform(random_dataset(1, 28, 1), AffineSpec{}), GeometryError); }
  SUBCASE("spec validation") {
    AffineSpec spec;
    spec.min_scale = 0;
    CHECK_THROWS_AS(spec.validate(), ConfigError);
  }
}

TEST_CASE("batches") {
  auto d = random_dataset(10, 4, 6);
  Batches natural(d, 4);
  REQUIRE(natural.size() == 3);
  CHECK(natural[0].labels.size() == 4);
  CHECK(natural[1].labels.size() == 4);
  CHECK(natural[2].labels.size() == 2);
  CHECK(natural[2].indices == std::vector<Index>{8, 9});
  CHECK(natural[0].images.shape() == Shape{4, 1, 4, 4});
  CHECK(natural[0].targets.shape() == Shape{4, 10});
  CHECK(natural[0].targets.at({3, 3}) == 1.f);

  Batches a(d, 4, 42), b(d, 4, 42), c(d, 4, 43);
  CHECK(a.order() == b.order());
  CHECK_FALSE(a.order() == c.order());
  std::multiset<Index> seen;
  for (Index i = 0; i < a.size(); ++i) {
    auto batch = a[i];
    for (std::size_t k = 0; k < batch.indices.size(); ++k) {
      seen.insert(batch.indices[k]);
      CHECK(batch.labels[k] == d.labels[std::size_t(batch.indices[k])]);
    }
  }
  CHECK(seen == std::multiset<Index>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  CHECK(Batches(d, 32).size() == 1);
  CHECK_THROWS_AS(Batches(d, 0), ConfigError);
}

TEST_CASE("stratified subset") {
  auto d = random_dataset(100, 2, 7);
  auto s = stratified_subset(d, 25);
  REQUIRE(s.size() == 25);
  std::vector<int> counts(10);
  for (Index label : s.labels) ++counts[std::size_t(label)];
  CHECK(counts == std::vector<int>{3, 3, 3, 3, 3, 2, 2, 2, 2, 2});
  CHECK(s.images.vec().head(4) == d.images.vec().head(4));
  CHECK_THROWS_AS(stratified_subset(d, 101), ConfigError);
}

TEST_CASE("file checksum") {
  TempDir dir("capsbench_sum");
  write_file(dir / "a", {'a'});
  CHECK(file_checksum(dir / "a") == "af63dc4c8601ec8c");
  write_file(dir / "empty", {});
  CHECK(file_checksum(dir / "empty") == "cbf29ce484222325");
}

#ifdef CAPSBENCH_DESK_DATA
TEST_CASE("bundled desk data") {
  const fs::path root = CAPSBENCH_DESK_DATA;
  auto train = load_idx(root / "train-images-idx3-ubyte", root / "train-labels-idx1-ubyte");
  auto test = load_idx(root / "t10k-images-idx3-ubyte", root / "t10k-labels-idx1-ubyte");
  CHECK(train.size() == 4000);
  CHECK(test.size() == 1000);
  CHECK(train.shape() == kMnistShape);
  CHECK_NOTHROW(train.validate());
  CHECK(stratified_subset(train, 1000).size() == 1000);
}
#endif
