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

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "capsbench/network.hpp"
#include "capsbench/tensor.hpp"

namespace capsbench {

/// Images are [n, channels, h, w] in [0, 1]; labels are class indices.
struct Dataset {
  std::string name;
  Tensor<float> images = Tensor<float>({0, 1, 0, 0});
  std::vector<Index> labels;
  Index num_classes = 10;

  Index size() const { return Index(labels.size()); }
  ImageShape shape() const { return {images.dim(1), images.dim(2), images.dim(3)}; }

  // Throws ConsistencyError if the invariants do not hold.
  void validate() const;

  /// Copies the listed samples, in the order given.
  Dataset select(std::span<const Index> indices) const;
};

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;
inline constexpr Index kCifarRecordBytes = 1 + 3 * 32 * 32;

/// Reads an IDX image/label pair. `limit` keeps only the first samples.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 std::optional<Index> limit = std::nullopt);

/// Single-channel datasets only; pixels are rounded to the nearest byte.
void save_idx(const std::filesystem::path& images, const std::filesystem::path& labels, const Dataset& data);

Dataset load_cifar10(std::span<const std::filesystem::path> files);

Dataset pad_center(const Dataset& data, Index height, Index width);

struct AffineSpec {
  double max_rotation_deg = 20.0;
  double min_scale = 0.8;
  double max_scale = 1.2;
  double max_shear_rad = 0.2;
  double max_translation = 8.0;
  std::uint64_t seed = 0;

  static AffineSpec identity(std::uint64_t seed = 0) { return {0.0, 1.0, 1.0, 0.0, 0.0, seed}; }

  void validate() const;
};

/// One concrete draw. Translation is in pixels; +x moves right, +y moves down.
struct AffineParams {
  double rotation_deg = 0.0;
  double scale = 1.0;
  double shear_rad = 0.0;
  double tx = 0.0;
  double ty = 0.0;
};

inline constexpr Index kAffineSide = 40;

/// Bilinear resampling about the image centre with zero fill. Works on any
/// [c, h, w] slab; `dst` must not alias `src`.
void warp_image(std::span<const float> src, std::span<float> dst, Index channels, Index height, Index width,
                const AffineParams& params);

/// Draws one AffineParams per image from `spec` (in sample order) and warps.
/// Requires 40x40 inputs.
Dataset affine_transform(const Dataset& data, const AffineSpec& spec);

struct Batch {
  Tensor<float> images;
  std::vector<Index> labels;
  Tensor<float> targets;  // one-hot [b, num_classes]
  std::vector<Index> indices;
};

/// Deterministic mini-batch schedule. Without a seed the natural order is used;
/// the last batch may be short.
class Batches {
 public:
  Batches(const Dataset& data, Index batch_size, std::optional<std::uint64_t> shuffle_seed = std::nullopt);

  Index size() const;
  Batch operator[](Index i) const;
  const std::vector<Index>& order() const { return order_; }

 private:
  const Dataset* data_;
  Index batch_size_;
  std::vector<Index> order_;
};

/// First `count / num_classes` samples of every class (the remainder goes to
/// the lowest classes), kept in dataset order.
Dataset stratified_subset(const Dataset& data, Index count);

/// FNV-1a 64 of the file contents as 16 hex digits.
std::string file_checksum(const std::filesystem::path& path);

}  // namespace capsbench
