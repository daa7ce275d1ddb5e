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
#include <string>
#include <string_view>

#include "capsbench/data.hpp"
#include "capsbench/network.hpp"

namespace capsbench {

/// One run of the command-line tool. Text form is flat `key = value` lines
/// with `#` comments; see format_run_config for the full key list.
struct RunConfig {
  std::string run_id;  // empty: derived from variant, dataset and seed

  Variant variant = Variant::qcn;
  Index pc_count = 6;
  Index pc_types = 32;
  int routing_iterations = 3;
  double recon_weight = 0.0005;
  Index num_classes = 10;

  std::string dataset = "mnist";  // mnist | cifar10
  std::filesystem::path data_dir = "data/mnist-desk";
  Index train_limit = 50000;
  std::optional<Index> subset_size;
  std::optional<Index> test_subset;
  bool pad_to_40 = false;

  Index epochs = 50;
  Index batch_size = 128;
  double learning_rate = 0.001;
  std::uint64_t seed = 1;

  Index bench_batches = 20;
  Index bench_warmup = 3;
  Index repeat = 1;

  AffineSpec affine;

  std::filesystem::path out_dir = "runs";

  ImageShape dataset_shape() const;
  /// Geometry the model sees: the dataset shape, or 1x40x40 when padded.
  ImageShape input_shape() const;
  ModelConfig model_config() const;
  std::string id() const;

  /// Throws ConfigError. Does not touch the file system.
  void validate() const;
};

/// Unknown keys and malformed values raise ConfigError naming the line.
RunConfig parse_run_config(std::string_view text, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});

/// Every key, one per line; parse_run_config(format_run_config(c)) == c.
std::string format_run_config(const RunConfig& config);

}  // namespace capsbench
