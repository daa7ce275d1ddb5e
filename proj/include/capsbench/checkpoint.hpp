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

#include <filesystem>
#include <map>
#include <string>

#include "capsbench/network.hpp"

namespace capsbench {

// Layout, all integers little-endian uint32:
//   "QCN1"
//   per parameter, in registry (name) order:
//     name length, name bytes, rank, extents..., float32 values
using ParameterMap = std::map<std::string, Tensor<float>>;

void write_checkpoint(const std::filesystem::path& path, const ParameterMap& params);
ParameterMap read_checkpoint(const std::filesystem::path& path);

void save_checkpoint(const std::filesystem::path& path, const Model<float>& model);

/// Copies checkpoint values into `model`. Every registry entry must be present
/// with the same shape, and the checkpoint may hold nothing else.
void load_checkpoint(const std::filesystem::path& path, Model<float>& model);

}  // namespace capsbench
