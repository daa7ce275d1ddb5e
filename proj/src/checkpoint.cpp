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

#include "capsbench/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

namespace capsbench {
namespace {

constexpr std::array<char, 4> kMagic{'Q', 'C', 'N', '1'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xffu));
}

class Reader {
 public:
  explicit Reader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}

  bool done() const { return pos_ == bytes_.size(); }

  const char* take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) throw LengthError(std::string("checkpoint truncated while reading ") + what);
    const char* at = bytes_.data() + pos_;
    pos_ += n;
    return at;
  }

  std::uint32_t u32(const char* what) {
    const auto* p = reinterpret_cast<const unsigned char*>(take(4, what));
    return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
  }

 private:
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const ParameterMap& params) {
  std::string out(kMagic.begin(), kMagic.end());
  for (const auto& [name, tensor] : params) {
    put_u32(out, std::uint32_t(name.size()));
    out += name;
    put_u32(out, std::uint32_t(tensor.rank()));
    for (Index e : tensor.shape()) put_u32(out, std::uint32_t(e));
    for (float v : tensor.span()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("cannot open " + path.string() + " for writing");
  file.write(out.data(), std::streamsize(out.size()));
  if (!file) throw IoError("failed writing " + path.string());
}

ParameterMap read_checkpoint(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot open checkpoint " + path.string());
  Reader in(std::vector<char>(std::istreambuf_iterator<char>(file), {}));
  if (std::memcmp(in.take(4, "magic"), kMagic.data(), 4) != 0) {
    throw FormatError(path.string() + " is not a QCN1 checkpoint");
  }
  ParameterMap params;
  while (!in.done()) {
    const std::uint32_t name_len = in.u32("name length");
    std::string name(in.take(name_len, "name"), name_len);
    const std::uint32_t rank = in.u32("rank");
    Shape shape;
    for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(Index(in.u32("extent")));
    Tensor<float> t(shape);
    for (Index i = 0; i < t.size(); ++i) t[i] = std::bit_cast<float>(in.u32("values"));
    if (!params.emplace(std::move(name), std::move(t)).second) throw FormatError("duplicate parameter in checkpoint");
  }
  return params;
}

void save_checkpoint(const std::filesystem::path& path, const Model<float>& model) {
  ParameterMap params;
  for (const auto& [name, var] : model.parameters()) params.emplace(name, var.value());
  write_checkpoint(path, params);
}

void load_checkpoint(const std::filesystem::path& path, Model<float>& model) {
  ParameterMap params = read_checkpoint(path);
  if (params.size() != model.parameters().size()) {
    throw ConfigError("checkpoint holds " + std::to_string(params.size()) + " parameters, model expects " +
                      std::to_string(model.parameters().size()));
  }
  for (const auto& [name, var] : model.parameters()) {
    auto it = params.find(name);
    if (it == params.end()) throw ConfigError("checkpoint lacks parameter " + name);
    if (it->second.shape() != var.shape()) {
      throw ConfigError("checkpoint parameter " + name + " has shape " + to_string(it->second.shape()) +
                        ", model expects " + to_string(var.shape()));
    }
  }
  for (auto& [name, tensor] : params) model.parameter(name).mutable_value() = std::move(tensor);
}

}  // namespace capsbench
