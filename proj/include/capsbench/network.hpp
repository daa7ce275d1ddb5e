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

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "capsbench/capsule.hpp"
#include "capsbench/loss.hpp"

namespace capsbench {

enum class Variant { baseline, qcn, qcn_plus };
enum class DecoderKind { fc, deconv };

std::string to_string(Variant variant);
std::string to_string(DecoderKind decoder);
Variant parse_variant(const std::string& text);
DecoderKind parse_decoder(const std::string& text);

struct ImageShape {
  Index channels = 1;
  Index height = 28;
  Index width = 28;

  Index pixels() const { return channels * height * width; }
  bool operator==(const ImageShape&) const = default;
};

inline constexpr Index kConv1Channels = 256;
inline constexpr Index kConv1Kernel = 9;

/// Everything needed to build a network and count its parameters.
struct ModelConfig {
  Variant variant = Variant::qcn;
  ImageShape input;
  Index num_classes = 10;
  Index pc_count = 6;   // qcn / qcn_plus
  Index pc_types = 32;  // baseline: conv2 has 8 * pc_types output channels
  Index primary_dim = kPrimaryCapsuleDim;
  Index digit_dim = kDigitCapsuleDim;
  int routing_iterations = 3;
  DecoderKind decoder = DecoderKind::fc;
  double recon_weight = 0.0005;
  double transform_init_stddev = 0.05;

  /// Throws ConfigError describing the first violated rule.
  void validate() const;

  Index conv1_size() const { return input.height - kConv1Kernel + 1; }
  Index num_primary_capsules() const;

  static ModelConfig baseline(ImageShape input, Index types = 32);
  static ModelConfig qcn(ImageShape input, Index pc_count);
  static ModelConfig qcn_plus(ImageShape input, Index pc_count);
};

inline const ImageShape kMnistShape{1, 28, 28};
inline const ImageShape kCifarShape{3, 32, 32};
inline const ImageShape kAffineShape{1, 40, 40};

/// Layer layout of the deconvolution decoder for one output shape: a 16 ->
/// seed_channels x 4 x 4 projection, three stride-2 transposed convolutions,
/// then a valid convolution down to the image.
struct DeconvPlan {
  struct Stage {
    Index kernel;
    Index channels;
  };
  Index seed_channels = 64;
  Index seed_size = 4;
  std::array<Stage, 3> stages{};
  Index out_kernel = 1;
};

/// Supported shapes are 1x28x28, 1x40x40 and 3x32x32.
DeconvPlan deconv_plan(const ImageShape& shape);

/// Tag selecting the longest capsule per sample instead of a label.
struct LargestActivity {};

/// Index of the longest capsule per sample; ties go to the lowest index.
template <typename Scalar>
std::vector<Index> classify(const Tensor<Scalar>& digit_caps);

/// Zeroes every capsule but the target and flattens to [b, K*d].
template <typename Scalar>
Var<Scalar> mask_class_dependent(const Var<Scalar>& digit_caps, std::span<const Index> targets);
template <typename Scalar>
Var<Scalar> mask_class_dependent(const Var<Scalar>& digit_caps, LargestActivity);

/// Keeps only the target capsule, [b, d]. No class position survives.
template <typename Scalar>
Var<Scalar> mask_class_independent(const Var<Scalar>& digit_caps, std::span<const Index> targets);
template <typename Scalar>
Var<Scalar> mask_class_independent(const Var<Scalar>& digit_caps, LargestActivity);

template <typename Scalar>
struct ModelOutput {
  Var<Scalar> digit_caps;      // [b, K, 16]
  Var<Scalar> lengths;         // [b, K]
  Var<Scalar> reconstruction;  // [b, c, h, w]
  std::vector<Index> mask_targets;
};

struct BuildOptions {
  std::uint64_t seed = 1;
  // When false all parameters stay zero; enough for counting.
  bool initialize = true;
};

template <typename Scalar>
class Model {
 public:
  using Registry = std::map<std::string, Var<Scalar>>;

  Model(ModelConfig config, BuildOptions options = {});

  const ModelConfig& config() const { return config_; }
  // Ordered by name; this is also the checkpoint order.
  const Registry& parameters() const { return params_; }
  Var<Scalar>& parameter(const std::string& name);
  std::vector<Var<Scalar>> parameter_list() const;

  /// Training passes the labels (ground-truth masking); evaluation passes
  /// std::nullopt and the longest capsule drives the decoder.
  ModelOutput<Scalar> forward(const Tensor<Scalar>& images,
                              std::optional<std::span<const Index>> targets = std::nullopt) const;

  Var<Scalar> encode(const Tensor<Scalar>& images) const;
  Var<Scalar> decode(const Var<Scalar>& masked) const;

 private:
  void add(const std::string& name, Shape shape);
  const Var<Scalar>& p(const std::string& name) const { return params_.at(name); }

  ModelConfig config_;
  Registry params_;
  std::vector<std::string> init_order_;
};

template <typename Scalar>
Model<Scalar> build(const ModelConfig& config, BuildOptions options = {}) {
  return Model<Scalar>(config, options);
}

template <typename Scalar>
Index count_parameters(const Model<Scalar>& model) {
  Index total = 0;
  for (const auto& [name, param] : model.parameters()) total += param.value().size();
  return total;
}

/// Margin loss on the capsule lengths plus the weighted reconstruction loss.
template <typename Scalar>
Var<Scalar> total_loss(const ModelOutput<Scalar>& output, std::span<const Index> labels, const Tensor<Scalar>& images,
                       const ModelConfig& config, const MarginLossParams& params = {});

}  // namespace capsbench
