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

#include "capsbench/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "capsbench/errors.hpp"
#include "capsbench/loss.hpp"

namespace capsbench {
namespace {

std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const std::vector<unsigned char>& bytes, std::size_t offset, const std::string& what) {
  if (bytes.size() < offset + 4) throw LengthError(what + ": header truncated");
  return std::uint32_t(bytes[offset]) << 24 | std::uint32_t(bytes[offset + 1]) << 16 |
         std::uint32_t(bytes[offset + 2]) << 8 | std::uint32_t(bytes[offset + 3]);
}

void put_be32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {char(v >> 24), char(v >> 16), char(v >> 8), char(v)};
  out.write(b, 4);
}

std::string hex_magic(std::uint32_t v) {
  std::ostringstream s;
  s << "0x" << std::hex << std::setw(8) << std::setfill('0') << v;
  return s.str();
}

std::string stem_name(const std::filesystem::path& path) { return path.filename().string(); }

}  // namespace

void Dataset::validate() const {
  if (images.rank() != 4) throw ConsistencyError(name + ": images must be [n, c, h, w], got " + to_string(images.shape()));
  if (images.dim(0) != size()) {
    throw ConsistencyError(name + ": " + std::to_string(images.dim(0)) + " images but " + std::to_string(size()) + " labels");
  }
  for (Index label : labels) {
    if (label < 0 || label >= num_classes) throw ConsistencyError(name + ": label " + std::to_string(label) + " out of range");
  }
  if (images.size() > 0 && (images.vec().minCoeff() < 0.f || images.vec().maxCoeff() > 1.f)) {
    throw ConsistencyError(name + ": pixel values outside [0, 1]");
  }
}

Dataset Dataset::select(std::span<const Index> indices) const {
  const Index per = images.dim(1) * images.dim(2) * images.dim(3);
  Dataset out{name, Tensor<float>({Index(indices.size()), images.dim(1), images.dim(2), images.dim(3)}), {}, num_classes};
  out.labels.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const Index src = indices[i];
    if (src < 0 || src >= size()) throw ContractError("select: index " + std::to_string(src) + " out of range");
    out.images.vec().segment(Index(i) * per, per) = images.vec().segment(src * per, per);
    out.labels.push_back(labels[std::size_t(src)]);
  }
  return out;
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels, std::optional<Index> limit) {
  const auto image_bytes = read_bytes(images);
  const auto label_bytes = read_bytes(labels);

  const std::uint32_t image_magic = be32(image_bytes, 0, images.string());
  if (image_magic != kIdxImageMagic) {
    throw FormatError(images.string() + ": image magic " + hex_magic(image_magic) + ", expected " + hex_magic(kIdxImageMagic));
  }
  const std::uint32_t label_magic = be32(label_bytes, 0, labels.string());
  if (label_magic != kIdxLabelMagic) {
    throw FormatError(labels.string() + ": label magic " + hex_magic(label_magic) + ", expected " + hex_magic(kIdxLabelMagic));
  }

  const Index count = be32(image_bytes, 4, images.string());
  const Index rows = be32(image_bytes, 8, images.string());
  const Index cols = be32(image_bytes, 12, images.string());
  const Index label_count = be32(label_bytes, 4, labels.string());
  if (count != label_count) {
    throw ConsistencyError("IDX count mismatch: " + std::to_string(count) + " images vs " + std::to_string(label_count) + " labels");
  }
  const std::size_t pixels = std::size_t(count * rows * cols);
  if (image_bytes.size() < 16 + pixels) throw LengthError(images.string() + ": pixel data truncated");
  if (label_bytes.size() < 8 + std::size_t(count)) throw LengthError(labels.string() + ": label data truncated");

  const Index n = limit ? std::min(count, *limit) : count;
  Dataset out{stem_name(images), Tensor<float>({n, 1, rows, cols}), std::vector<Index>(std::size_t(n)), 10};
  float* dst = out.images.data();
  for (std::size_t i = 0; i < std::size_t(n * rows * cols); ++i) dst[i] = float(image_bytes[16 + i]) / 255.f;
  for (Index i = 0; i < n; ++i) {
    const Index label = label_bytes[8 + std::size_t(i)];
    if (label >= out.num_classes) throw FormatError(labels.string() + ": label " + std::to_string(label) + " out of range");
    out.labels[std::size_t(i)] = label;
  }
  return out;
}

void save_idx(const std::filesystem::path& images, const std::filesystem::path& labels, const Dataset& data) {
  data.validate();
  if (data.images.dim(1) != 1) throw ShapeError("save_idx: IDX images are single-channel");
  std::ofstream img(images, std::ios::binary);
  std::ofstream lab(labels, std::ios::binary);
  if (!img || !lab) throw IoError("cannot write IDX pair " + images.string());
  put_be32(img, kIdxImageMagic);
  put_be32(img, std::uint32_t(data.size()));
  put_be32(img, std::uint32_t(data.images.dim(2)));
  put_be32(img, std::uint32_t(data.images.dim(3)));
  std::string pixels(std::size_t(data.images.size()), '\0');
  for (Index i = 0; i < data.images.size(); ++i) pixels[std::size_t(i)] = char(std::lround(data.images[i] * 255.f));
  img.write(pixels.data(), std::streamsize(pixels.size()));
  put_be32(lab, kIdxLabelMagic);
  put_be32(lab, std::uint32_t(data.size()));
  for (Index label : data.labels) lab.put(char(label));
  if (!img || !lab) throw IoError("failed writing IDX pair " + images.string());
}

Dataset load_cifar10(std::span<const std::filesystem::path> files) {
  std::vector<std::vector<unsigned char>> contents;
  Index n = 0;
  for (const auto& file : files) {
    contents.push_back(read_bytes(file));
    const auto bytes = Index(contents.back().size());
    if (bytes % kCifarRecordBytes != 0) {
      throw FormatError(file.string() + ": " + std::to_string(bytes) + " bytes is not a whole number of " +
                        std::to_string(kCifarRecordBytes) + "-byte records");
    }
    n += bytes / kCifarRecordBytes;
  }
  constexpr Index plane = kCifarRecordBytes - 1;
  Dataset out{files.empty() ? "cifar10" : stem_name(files.front()), Tensor<float>({n, 3, 32, 32}),
              std::vector<Index>(std::size_t(n)), 10};
  Index i = 0;
  for (std::size_t f = 0; f < contents.size(); ++f) {
    const auto& bytes = contents[f];
    for (std::size_t at = 0; at < bytes.size(); at += std::size_t(kCifarRecordBytes), ++i) {
      if (bytes[at] >= out.num_classes) {
        throw FormatError(files[f].string() + ": label " + std::to_string(int(bytes[at])) + " out of range");
      }
      out.labels[std::size_t(i)] = bytes[at];
      float* dst = out.images.data() + i * plane;
      for (Index k = 0; k < plane; ++k) dst[k] = float(bytes[at + 1 + std::size_t(k)]) / 255.f;
    }
  }
  return out;
}

Dataset pad_center(const Dataset& data, Index height, Index width) {
  const auto [c, h, w] = data.shape();
  if (height < h || width < w) {
    throw GeometryError("pad_center: target " + std::to_string(height) + "x" + std::to_string(width) + " smaller than " +
                        std::to_string(h) + "x" + std::to_string(w));
  }
  const Index top = (height - h) / 2;
  const Index left = (width - w) / 2;
  Dataset out{data.name, Tensor<float>({data.size(), c, height, width}), data.labels, data.num_classes};
  for (Index plane = 0; plane < data.size() * c; ++plane) {
    const float* src = data.images.data() + plane * h * w;
    float* dst = out.images.data() + plane * height * width;
    for (Index y = 0; y < h; ++y) std::copy_n(src + y * w, w, dst + (y + top) * width + left);
  }
  return out;
}

void AffineSpec::validate() const {
  if (!(min_scale > 0.0) || min_scale > max_scale) throw ConfigError("affine scale range must be positive and ordered");
  if (max_rotation_deg < 0.0 || max_shear_rad < 0.0 || max_translation < 0.0) {
    throw ConfigError("affine rotation, shear and translation bounds must be non-negative");
  }
}

void warp_image(std::span<const float> src, std::span<float> dst, Index channels, Index height, Index width,
                const AffineParams& params) {
  // forward map p' = A (p - c) + c + t with A = rotation * shear * scale
  const double theta = params.rotation_deg * std::numbers::pi / 180.0;
  const double cs = std::cos(theta), sn = std::sin(theta), k = std::tan(params.shear_rad), s = params.scale;
  const double a = cs * s, b = (cs * k - sn) * s, c = sn * s, d = (sn * k + cs) * s;
  const double det = a * d - b * c;
  const double ia = d / det, ib = -b / det, ic = -c / det, id = a / det;
  const double cx = double(width - 1) / 2.0, cy = double(height - 1) / 2.0;

  for (Index y = 0; y < height; ++y) {
    for (Index x = 0; x < width; ++x) {
      const double rx = double(x) - cx - params.tx, ry = double(y) - cy - params.ty;
      const double sx = ia * rx + ib * ry + cx, sy = ic * rx + id * ry + cy;
      const double fx0 = std::floor(sx), fy0 = std::floor(sy);
      const auto x0 = Index(fx0), y0 = Index(fy0);
      const float wx = float(sx - fx0), wy = float(sy - fy0);
      for (Index ch = 0; ch < channels; ++ch) {
        const float* plane = src.data() + ch * height * width;
        auto pixel = [&](Index yy, Index xx) {
          return (yy < 0 || yy >= height || xx < 0 || xx >= width) ? 0.f : plane[yy * width + xx];
        };
        float v = pixel(y0, x0) * (1.f - wx) * (1.f - wy);
        if (wx != 0.f) v += pixel(y0, x0 + 1) * wx * (1.f - wy);
        if (wy != 0.f) v += pixel(y0 + 1, x0) * (1.f - wx) * wy;
        if (wx != 0.f && wy != 0.f) v += pixel(y0 + 1, x0 + 1) * wx * wy;
        dst[std::size_t(ch * height * width + y * width + x)] = std::clamp(v, 0.f, 1.f);
      }
    }
  }
}

Dataset affine_transform(const Dataset& data, const AffineSpec& spec) {
  spec.validate();
  const auto [c, h, w] = data.shape();
  if (h != kAffineSide || w != kAffineSide) {
    throw GeometryError("affine_transform expects 40x40 images, got " + std::to_string(h) + "x" + std::to_string(w));
  }
  std::mt19937_64 rng(spec.seed);
  auto uniform = [&rng](double lo, double hi) { return lo + (hi - lo) * std::uniform_real_distribution<double>(0.0, 1.0)(rng); };

  Dataset out{data.name + "-affine", Tensor<float>(data.images.shape()), data.labels, data.num_classes};
  const Index per = c * h * w;
  for (Index i = 0; i < data.size(); ++i) {
    AffineParams params;
    params.rotation_deg = uniform(-spec.max_rotation_deg, spec.max_rotation_deg);
    params.scale = uniform(spec.min_scale, spec.max_scale);
    params.shear_rad = uniform(-spec.max_shear_rad, spec.max_shear_rad);
    params.tx = uniform(-spec.max_translation, spec.max_translation);
    params.ty = uniform(-spec.max_translation, spec.max_translation);
    warp_image(data.images.span().subspan(std::size_t(i * per), std::size_t(per)),
               out.images.span().subspan(std::size_t(i * per), std::size_t(per)), c, h, w, params);
  }
  return out;
}

Batches::Batches(const Dataset& data, Index batch_size, std::optional<std::uint64_t> shuffle_seed)
    : data_(&data), batch_size_(batch_size), order_(std::size_t(data.size())) {
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  std::iota(order_.begin(), order_.end(), Index{0});
  if (shuffle_seed) {
    std::mt19937_64 rng(*shuffle_seed);
    std::shuffle(order_.begin(), order_.end(), rng);
  }
}

Index Batches::size() const { return (Index(order_.size()) + batch_size_ - 1) / batch_size_; }

Batch Batches::operator[](Index i) const {
  const Index begin = i * batch_size_;
  const Index end = std::min(begin + batch_size_, Index(order_.size()));
  if (i < 0 || begin >= end) throw ContractError("batch index " + std::to_string(i) + " out of range");
  Batch batch;
  batch.indices.assign(order_.begin() + begin, order_.begin() + end);
  Dataset picked = data_->select(batch.indices);
  batch.images = std::move(picked.images);
  batch.labels = std::move(picked.labels);
  batch.targets = one_hot<float>(batch.labels, data_->num_classes);
  return batch;
}

Dataset stratified_subset(const Dataset& data, Index count) {
  if (count < 0 || count > data.size()) throw ConfigError("subset size " + std::to_string(count) + " out of range");
  std::vector<Index> quota(std::size_t(data.num_classes), count / data.num_classes);
  for (Index k = 0; k < count % data.num_classes; ++k) ++quota[std::size_t(k)];
  std::vector<Index> picked;
  picked.reserve(std::size_t(count));
  for (Index i = 0; i < data.size(); ++i) {
    auto& left = quota[std::size_t(data.labels[std::size_t(i)])];
    if (left > 0) {
      --left;
      picked.push_back(i);
    }
  }
  if (Index(picked.size()) != count) {
    throw ConfigError("cannot draw a stratified subset of " + std::to_string(count) + " from " + data.name);
  }
  return data.select(picked);
}

std::string file_checksum(const std::filesystem::path& path) {
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (unsigned char byte : read_bytes(path)) {
    hash ^= byte;
    hash *= 0x100000001b3ull;
  }
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << hash;
  return s.str();
}

}  // namespace capsbench
