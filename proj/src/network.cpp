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

#include "capsbench/network.hpp"

#include <cmath>
#include <random>

namespace capsbench {

std::string to_string(Variant variant) {
  switch (variant) {
    case Variant::baseline: return "baseline";
    case Variant::qcn: return "qcn";
    case Variant::qcn_plus: return "qcn_plus";
  }
  return "?";
}

std::string to_string(DecoderKind decoder) { return decoder == DecoderKind::fc ? "fc" : "deconv"; }

Variant parse_variant(const std::string& text) {
  if (text == "baseline") return Variant::baseline;
  if (text == "qcn") return Variant::qcn;
  if (text == "qcn_plus" || text == "qcn+") return Variant::qcn_plus;
  throw ConfigError("unknown variant '" + text + "' (expected baseline, qcn or qcn_plus)");
}

DecoderKind parse_decoder(const std::string& text) {
  if (text == "fc") return DecoderKind::fc;
  if (text == "deconv") return DecoderKind::deconv;
  throw ConfigError("unknown decoder '" + text + "' (expected fc or deconv)");
}

ModelConfig ModelConfig::baseline(ImageShape input, Index types) {
  ModelConfig c;
  c.variant = Variant::baseline;
  c.input = input;
  c.pc_types = types;
  c.decoder = DecoderKind::fc;
  return c;
}

ModelConfig ModelConfig::qcn(ImageShape input, Index pc_count) {
  ModelConfig c;
  c.variant = Variant::qcn;
  c.input = input;
  c.pc_count = pc_count;
  c.decoder = DecoderKind::fc;
  return c;
}

ModelConfig ModelConfig::qcn_plus(ImageShape input, Index pc_count) {
  ModelConfig c = qcn(input, pc_count);
  c.variant = Variant::qcn_plus;
  c.decoder = DecoderKind::deconv;
  return c;
}

void ModelConfig::validate() const {
  if (input.channels < 1) throw ConfigError("input needs at least one channel");
  if (num_classes < 1) throw ConfigError("num_classes must be positive");
  if (routing_iterations < 1) throw ConfigError("routing_iterations must be positive");
  if (primary_dim != kPrimaryCapsuleDim) throw ConfigError("primary capsules are 8-dimensional");
  if (digit_dim < 1) throw ConfigError("digit_dim must be positive");
  if (!(recon_weight >= 0.0)) throw ConfigError("recon_weight must be nonnegative");
  if (!(transform_init_stddev > 0.0)) throw ConfigError("transform_init_stddev must be positive");
  const bool fc = decoder == DecoderKind::fc;
  if (variant == Variant::qcn_plus && fc) throw ConfigError("qcn_plus uses the deconv decoder");
  if (variant != Variant::qcn_plus && !fc) throw ConfigError(to_string(variant) + " uses the fc decoder");
  if (variant == Variant::baseline) {
    if (pc_types < 1) throw ConfigError("pc_types must be positive");
    if (input.height < 18 || input.width < 18) {
      throw ConfigError("baseline needs inputs of at least 18x18, got " + std::to_string(input.height) + "x" +
                        std::to_string(input.width));
    }
  } else {
    if (pc_count < 1) throw ConfigError("pc_count must be positive");
    if (input.height < kConv1Kernel || input.width < kConv1Kernel) {
      throw ConfigError("input " + std::to_string(input.height) + "x" + std::to_string(input.width) +
                        " is smaller than the 9x9 first convolution");
    }
  }
  if (!fc) deconv_plan(input);
  if (!fc && digit_dim != kDigitCapsuleDim) throw ConfigError("deconv decoder expects 16D capsules");
}

Index ModelConfig::num_primary_capsules() const {
  if (variant != Variant::baseline) return pc_count;
  const Index h = (input.height - kConv1Kernel + 1 - kPrimaryKernel) / kPrimaryStride + 1;
  const Index w = (input.width - kConv1Kernel + 1 - kPrimaryKernel) / kPrimaryStride + 1;
  return pc_types * h * w;
}

DeconvPlan deconv_plan(const ImageShape& shape) {
  // Spatial sizes: 4 -> 2*(4-1)+k1 -> ... -> h3, then h3 - out_kernel + 1.
  DeconvPlan plan;
  if (shape == ImageShape{1, 28, 28}) {
    plan.stages = {{{2, 128}, {3, 128}, {2, 128}}};  // 8, 17, 34
    plan.out_kernel = 7;
  } else if (shape == ImageShape{1, 40, 40}) {
    plan.stages = {{{2, 128}, {5, 64}, {4, 32}}};  // 8, 19, 40
    plan.out_kernel = 1;
  } else if (shape == ImageShape{3, 32, 32}) {
    plan.stages = {{{2, 128}, {3, 128}, {5, 32}}};  // 8, 17, 37
    plan.out_kernel = 6;
  } else {
    throw ConfigError("deconv decoder supports 1x28x28, 1x40x40 and 3x32x32 outputs, not " +
                      std::to_string(shape.channels) + "x" + std::to_string(shape.height) + "x" +
                      std::to_string(shape.width));
  }
  return plan;
}

template <typename Scalar>
std::vector<Index> classify(const Tensor<Scalar>& digit_caps) {
  if (digit_caps.rank() != 3) throw ShapeError("classify expects [b,K,d], got " + to_string(digit_caps.shape()));
  const Index b = digit_caps.dim(0), k = digit_caps.dim(1), d = digit_caps.dim(2);
  auto caps = digit_caps.matrix(b * k, d);
  std::vector<Index> out(std::size_t(b), 0);
  for (Index n = 0; n < b; ++n) {
    Scalar best = caps.row(n * k).squaredNorm();
    for (Index j = 1; j < k; ++j) {
      const Scalar q = caps.row(n * k + j).squaredNorm();
      if (q > best) {
        best = q;
        out[std::size_t(n)] = j;
      }
    }
  }
  return out;
}

namespace {

template <typename Scalar>
void check_targets(const Var<Scalar>& caps, std::span<const Index> targets) {
  if (caps.rank() != 3) throw ShapeError("mask expects [b,K,d], got " + to_string(caps.shape()));
  if (Index(targets.size()) != caps.dim(0)) {
    throw ContractError("mask: " + std::to_string(targets.size()) + " targets for batch of " + std::to_string(caps.dim(0)));
  }
  for (Index t : targets) {
    if (t < 0 || t >= caps.dim(1)) throw ContractError("mask target " + std::to_string(t) + " out of range");
  }
}

}  // namespace

template <typename Scalar>
Var<Scalar> mask_class_dependent(const Var<Scalar>& digit_caps, std::span<const Index> targets) {
  check_targets(digit_caps, targets);
  const Index b = digit_caps.dim(0), k = digit_caps.dim(1), d = digit_caps.dim(2);
  std::vector<Index> keep(targets.begin(), targets.end());
  Tensor<Scalar> out({b, k * d});
  for (Index n = 0; n < b; ++n) {
    const Index at = (n * k + keep[std::size_t(n)]) * d;
    out.vec().segment(at, d) = digit_caps.value().vec().segment(at, d);
  }
  return record<Scalar>(std::move(out), {digit_caps}, [keep, k, d](Node<Scalar>& self) {
    auto& gx = self.inputs[0]->grad_buffer();
    for (std::size_t n = 0; n < keep.size(); ++n) {
      const Index at = (Index(n) * k + keep[n]) * d;
      gx.vec().segment(at, d) += self.grad.vec().segment(at, d);
    }
  });
}

template <typename Scalar>
Var<Scalar> mask_class_dependent(const Var<Scalar>& digit_caps, LargestActivity) {
  const auto targets = classify(digit_caps.value());
  return mask_class_dependent(digit_caps, std::span<const Index>(targets));
}

template <typename Scalar>
Var<Scalar> mask_class_independent(const Var<Scalar>& digit_caps, std::span<const Index> targets) {
  check_targets(digit_caps, targets);
  const Index b = digit_caps.dim(0), k = digit_caps.dim(1), d = digit_caps.dim(2);
  std::vector<Index> keep(targets.begin(), targets.end());
  Tensor<Scalar> out({b, d});
  for (Index n = 0; n < b; ++n) {
    out.vec().segment(n * d, d) = digit_caps.value().vec().segment((n * k + keep[std::size_t(n)]) * d, d);
  }
  return record<Scalar>(std::move(out), {digit_caps}, [keep, k, d](Node<Scalar>& self) {
    auto& gx = self.inputs[0]->grad_buffer();
    for (std::size_t n = 0; n < keep.size(); ++n) {
      gx.vec().segment((Index(n) * k + keep[n]) * d, d) += self.grad.vec().segment(Index(n) * d, d);
    }
  });
}

template <typename Scalar>
Var<Scalar> mask_class_independent(const Var<Scalar>& digit_caps, LargestActivity) {
  const auto targets = classify(digit_caps.value());
  return mask_class_independent(digit_caps, std::span<const Index>(targets));
}

template <typename Scalar>
Model<Scalar>::Model(ModelConfig config, BuildOptions options) : config_(std::move(config)) {
  config_.validate();
  const ImageShape& in = config_.input;
  const Index k = config_.num_classes, pd = config_.primary_dim, dd = config_.digit_dim;

  // Registration order fixes the initialization sequence.
  add("conv1.weight", {kConv1Channels, in.channels, kConv1Kernel, kConv1Kernel});
  add("conv1.bias", {kConv1Channels});
  if (config_.variant == Variant::baseline) {
    add("primary.weight", {pd * config_.pc_types, kConv1Channels, kPrimaryKernel, kPrimaryKernel});
    add("primary.bias", {pd * config_.pc_types});
  } else {
    const Index features = kConv1Channels * (in.height - kConv1Kernel + 1) * (in.width - kConv1Kernel + 1);
    add("primary.weight", {features, pd * config_.pc_count});
    add("primary.bias", {pd * config_.pc_count});
  }
  add("digit.transforms", {config_.num_primary_capsules(), k, pd, dd});

  if (config_.decoder == DecoderKind::fc) {
    add("decoder.fc1.weight", {k * dd, 512});
    add("decoder.fc1.bias", {512});
    add("decoder.fc2.weight", {512, 1024});
    add("decoder.fc2.bias", {1024});
    add("decoder.fc3.weight", {1024, in.pixels()});
    add("decoder.fc3.bias", {in.pixels()});
  } else {
    const DeconvPlan plan = deconv_plan(in);
    const Index seed = plan.seed_channels * plan.seed_size * plan.seed_size;
    add("decoder.seed.weight", {dd, seed});
    add("decoder.seed.bias", {seed});
    Index channels = plan.seed_channels;
    for (std::size_t s = 0; s < plan.stages.size(); ++s) {
      const std::string prefix = "decoder.deconv" + std::to_string(s + 1);
      add(prefix + ".weight", {channels, plan.stages[s].channels, plan.stages[s].kernel, plan.stages[s].kernel});
      add(prefix + ".bias", {plan.stages[s].channels});
      channels = plan.stages[s].channels;
    }
    add("decoder.out.weight", {in.channels, channels, plan.out_kernel, plan.out_kernel});
    add("decoder.out.bias", {in.channels});
  }

  if (!options.initialize) return;
  std::mt19937_64 rng(options.seed);
  for (const auto& name : init_order_) {
    Tensor<Scalar>& t = params_.at(name).mutable_value();
    const Shape& s = t.shape();
    if (name == "digit.transforms") {
      std::normal_distribution<double> gauss(0.0, config_.transform_init_stddev);
      for (Index i = 0; i < t.size(); ++i) t[i] = Scalar(gauss(rng));
    } else if (s.size() > 1) {
      // Glorot uniform. Dense [in, out]; conv [out, in, k, k]; deconv [in, out, k, k].
      double fan_in = double(s[0]), fan_out = double(s[1]);
      if (s.size() == 4) {
        const double area = double(s[2] * s[3]);
        const bool transposed = name.find("deconv") != std::string::npos;
        fan_in = double(transposed ? s[0] : s[1]) * area;
        fan_out = double(transposed ? s[1] : s[0]) * area;
      }
      const double limit = std::sqrt(6.0 / (fan_in + fan_out));
      std::uniform_real_distribution<double> uniform(-limit, limit);
      for (Index i = 0; i < t.size(); ++i) t[i] = Scalar(uniform(rng));
    }
  }
}

template <typename Scalar>
void Model<Scalar>::add(const std::string& name, Shape shape) {
  params_.emplace(name, Var<Scalar>::parameter(Tensor<Scalar>(std::move(shape))));
  init_order_.push_back(name);
}

template <typename Scalar>
Var<Scalar>& Model<Scalar>::parameter(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ContractError("no parameter named '" + name + "'");
  return it->second;
}

template <typename Scalar>
std::vector<Var<Scalar>> Model<Scalar>::parameter_list() const {
  std::vector<Var<Scalar>> out;
  for (const auto& [name, param] : params_) out.push_back(param);
  return out;
}

template <typename Scalar>
Var<Scalar> Model<Scalar>::encode(const Tensor<Scalar>& images) const {
  const ImageShape& in = config_.input;
  if (images.rank() != 4 || images.dim(1) != in.channels || images.dim(2) != in.height || images.dim(3) != in.width) {
    throw ConfigError("model expects images [b," + std::to_string(in.channels) + "," + std::to_string(in.height) + "," +
                      std::to_string(in.width) + "], got " + to_string(images.shape()));
  }
  auto features = relu(conv2d(Var<Scalar>::constant(images), p("conv1.weight"), p("conv1.bias"), 1));
  Var<Scalar> primary = config_.variant == Variant::baseline
                            ? conv_primary_caps(features, p("primary.weight"), p("primary.bias"), config_.pc_types)
                            : fc_primary_caps(features, p("primary.weight"), p("primary.bias"), config_.pc_count);
  return dynamic_routing(predict(primary, p("digit.transforms")), config_.routing_iterations);
}

template <typename Scalar>
Var<Scalar> Model<Scalar>::decode(const Var<Scalar>& masked) const {
  const ImageShape& in = config_.input;
  const Index b = masked.dim(0);
  if (config_.decoder == DecoderKind::fc) {
    auto h = relu(fully_connected(masked, p("decoder.fc1.weight"), p("decoder.fc1.bias")));
    h = relu(fully_connected(h, p("decoder.fc2.weight"), p("decoder.fc2.bias")));
    h = sigmoid(fully_connected(h, p("decoder.fc3.weight"), p("decoder.fc3.bias")));
    return reshape(h, {b, in.channels, in.height, in.width});
  }
  const DeconvPlan plan = deconv_plan(in);
  auto h = relu(fully_connected(masked, p("decoder.seed.weight"), p("decoder.seed.bias")));
  h = reshape(h, {b, plan.seed_channels, plan.seed_size, plan.seed_size});
  for (std::size_t s = 0; s < plan.stages.size(); ++s) {
    const std::string prefix = "decoder.deconv" + std::to_string(s + 1);
    h = relu(deconv2d(h, p(prefix + ".weight"), p(prefix + ".bias"), 2));
  }
  return sigmoid(conv2d(h, p("decoder.out.weight"), p("decoder.out.bias"), 1));
}

template <typename Scalar>
ModelOutput<Scalar> Model<Scalar>::forward(const Tensor<Scalar>& images,
                                           std::optional<std::span<const Index>> targets) const {
  ModelOutput<Scalar> out;
  out.digit_caps = encode(images);
  out.lengths = reduce(Reduction::l2_norm, out.digit_caps, 2);
  if (targets) {
    out.mask_targets.assign(targets->begin(), targets->end());
  } else {
    out.mask_targets = classify(out.digit_caps.value());
  }
  const std::span<const Index> keep(out.mask_targets);
  out.reconstruction = decode(config_.decoder == DecoderKind::fc ? mask_class_dependent(out.digit_caps, keep)
                                                                 : mask_class_independent(out.digit_caps, keep));
  return out;
}

template <typename Scalar>
Var<Scalar> total_loss(const ModelOutput<Scalar>& output, std::span<const Index> labels, const Tensor<Scalar>& images,
                       const ModelConfig& config, const MarginLossParams& params) {
  auto margin = margin_loss(output.lengths, one_hot<Scalar>(labels, config.num_classes), params);
  auto recon = reconstruction_loss(output.reconstruction, images, Scalar(config.recon_weight));
  return add(margin, recon);
}

#define CAPSBENCH_INSTANTIATE_NETWORK(S)                                                                   \
  template std::vector<Index> classify<S>(const Tensor<S>&);                                               \
  template Var<S> mask_class_dependent<S>(const Var<S>&, std::span<const Index>);                          \
  template Var<S> mask_class_dependent<S>(const Var<S>&, LargestActivity);                                 \
  template Var<S> mask_class_independent<S>(const Var<S>&, std::span<const Index>);                        \
  template Var<S> mask_class_independent<S>(const Var<S>&, LargestActivity);                               \
  template class Model<S>;                                                                                 \
  template Var<S> total_loss<S>(const ModelOutput<S>&, std::span<const Index>, const Tensor<S>&,           \
                                const ModelConfig&, const MarginLossParams&);

CAPSBENCH_INSTANTIATE_NETWORK(float)
CAPSBENCH_INSTANTIATE_NETWORK(double)

}  // namespace capsbench
