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

#include "capsbench/run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include "capsbench/errors.hpp"

namespace capsbench {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  return s.substr(first, s.find_last_not_of(" \t\r") - first + 1);
}

template <typename T>
T parse_number(std::string_view text, const std::string& key) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end) throw ConfigError("bad value for " + key + ": '" + std::string(text) + "'");
  return value;
}

bool parse_bool(std::string_view text, const std::string& key) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError("bad value for " + key + ": '" + std::string(text) + "'");
}

std::string format_double(double v) {
  std::ostringstream s;
  s << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return s.str();
}

using Setter = std::function<void(RunConfig&, std::string_view, const std::string&)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = [] {
    std::map<std::string, Setter, std::less<>> t;
    auto index = [](Index RunConfig::*field) {
      return [field](RunConfig& c, std::string_view v, const std::string& k) { c.*field = parse_number<Index>(v, k); };
    };
    auto real = [](double RunConfig::*field) {
      return [field](RunConfig& c, std::string_view v, const std::string& k) { c.*field = parse_number<double>(v, k); };
    };
    auto affine = [](double AffineSpec::*field) {
      return [field](RunConfig& c, std::string_view v, const std::string& k) { c.affine.*field = parse_number<double>(v, k); };
    };
    auto optional_index = [](std::optional<Index> RunConfig::*field) {
      return [field](RunConfig& c, std::string_view v, const std::string& k) {
        if (v.empty() || v == "none") {
          c.*field = std::nullopt;
        } else {
          c.*field = parse_number<Index>(v, k);
        }
      };
    };
    t["run_id"] = [](RunConfig& c, std::string_view v, const std::string&) { c.run_id = v; };
    t["variant"] = [](RunConfig& c, std::string_view v, const std::string&) { c.variant = parse_variant(std::string(v)); };
    t["pc_count"] = index(&RunConfig::pc_count);
    t["pc_types"] = index(&RunConfig::pc_types);
    t["routing_iterations"] = [](RunConfig& c, std::string_view v, const std::string& k) {
      c.routing_iterations = parse_number<int>(v, k);
    };
    t["recon_weight"] = real(&RunConfig::recon_weight);
    t["num_classes"] = index(&RunConfig::num_classes);
    t["dataset"] = [](RunConfig& c, std::string_view v, const std::string&) { c.dataset = v; };
    t["data_dir"] = [](RunConfig& c, std::string_view v, const std::string&) { c.data_dir = std::string(v); };
    t["train_limit"] = index(&RunConfig::train_limit);
    t["subset_size"] = optional_index(&RunConfig::subset_size);
    t["test_subset"] = optional_index(&RunConfig::test_subset);
    t["pad_to_40"] = [](RunConfig& c, std::string_view v, const std::string& k) { c.pad_to_40 = parse_bool(v, k); };
    t["epochs"] = index(&RunConfig::epochs);
    t["batch_size"] = index(&RunConfig::batch_size);
    t["learning_rate"] = real(&RunConfig::learning_rate);
    t["seed"] = [](RunConfig& c, std::string_view v, const std::string& k) { c.seed = parse_number<std::uint64_t>(v, k); };
    t["bench_batches"] = index(&RunConfig::bench_batches);
    t["bench_warmup"] = index(&RunConfig::bench_warmup);
    t["repeat"] = index(&RunConfig::repeat);
    t["affine_rotation_deg"] = affine(&AffineSpec::max_rotation_deg);
    t["affine_scale_min"] = affine(&AffineSpec::min_scale);
    t["affine_scale_max"] = affine(&AffineSpec::max_scale);
    t["affine_shear_rad"] = affine(&AffineSpec::max_shear_rad);
    t["affine_translation"] = affine(&AffineSpec::max_translation);
    t["affine_seed"] = [](RunConfig& c, std::string_view v, const std::string& k) {
      c.affine.seed = parse_number<std::uint64_t>(v, k);
    };
    t["out_dir"] = [](RunConfig& c, std::string_view v, const std::string&) { c.out_dir = std::string(v); };
    return t;
  }();
  return table;
}

}  // namespace

ImageShape RunConfig::dataset_shape() const {
  if (dataset == "mnist") return kMnistShape;
  if (dataset == "cifar10") return kCifarShape;
  throw ConfigError("unknown dataset '" + dataset + "' (expected mnist or cifar10)");
}

ImageShape RunConfig::input_shape() const {
  ImageShape shape = dataset_shape();
  if (pad_to_40) {
    shape.height = kAffineSide;
    shape.width = kAffineSide;
  }
  return shape;
}

ModelConfig RunConfig::model_config() const {
  ModelConfig config;
  switch (variant) {
    case Variant::baseline: config = ModelConfig::baseline(input_shape(), pc_types); break;
    case Variant::qcn: config = ModelConfig::qcn(input_shape(), pc_count); break;
    case Variant::qcn_plus: config = ModelConfig::qcn_plus(input_shape(), pc_count); break;
  }
  config.routing_iterations = routing_iterations;
  config.recon_weight = recon_weight;
  config.num_classes = num_classes;
  return config;
}

std::string RunConfig::id() const {
  if (!run_id.empty()) return run_id;
  std::string name = to_string(variant);
  name += variant == Variant::baseline ? "-t" + std::to_string(pc_types) : "-pc" + std::to_string(pc_count);
  return name + "-" + dataset + (pad_to_40 ? "40" : "") + "-s" + std::to_string(seed);
}

void RunConfig::validate() const {
  (void)dataset_shape();
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (train_limit < 1) throw ConfigError("train_limit must be positive");
  if (subset_size && *subset_size < 1) throw ConfigError("subset_size must be positive");
  if (test_subset && *test_subset < 1) throw ConfigError("test_subset must be positive");
  if (bench_batches < 1) throw ConfigError("bench_batches must be at least 1");
  if (bench_warmup < 1) throw ConfigError("bench_warmup must be at least 1");
  if (repeat < 1) throw ConfigError("repeat must be at least 1");
  if (pad_to_40 && dataset != "mnist") throw ConfigError("pad_to_40 needs an MNIST-format dataset");
  affine.validate();
  model_config().validate();
}

RunConfig parse_run_config(std::string_view text, RunConfig base) {
  int line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    it->second(base, trim(line.substr(eq + 1)), key);
  }
  return base;
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return parse_run_config(text.str(), std::move(base));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string format_run_config(const RunConfig& c) {
  auto opt = [](const std::optional<Index>& v) { return v ? std::to_string(*v) : std::string("none"); };
  std::ostringstream s;
  s << "run_id = " << c.run_id << "\n"
    << "variant = " << to_string(c.variant) << "\n"
    << "pc_count = " << c.pc_count << "\n"
    << "pc_types = " << c.pc_types << "\n"
    << "routing_iterations = " << c.routing_iterations << "\n"
    << "recon_weight = " << format_double(c.recon_weight) << "\n"
    << "num_classes = " << c.num_classes << "\n"
    << "dataset = " << c.dataset << "\n"
    << "data_dir = " << c.data_dir.string() << "\n"
    << "train_limit = " << c.train_limit << "\n"
    << "subset_size = " << opt(c.subset_size) << "\n"
    << "test_subset = " << opt(c.test_subset) << "\n"
    << "pad_to_40 = " << (c.pad_to_40 ? "true" : "false") << "\n"
    << "epochs = " << c.epochs << "\n"
    << "batch_size = " << c.batch_size << "\n"
    << "learning_rate = " << format_double(c.learning_rate) << "\n"
    << "seed = " << c.seed << "\n"
    << "bench_batches = " << c.bench_batches << "\n"
    << "bench_warmup = " << c.bench_warmup << "\n"
    << "repeat = " << c.repeat << "\n"
    << "affine_rotation_deg = " << format_double(c.affine.max_rotation_deg) << "\n"
    << "affine_scale_min = " << format_double(c.affine.min_scale) << "\n"
    << "affine_scale_max = " << format_double(c.affine.max_scale) << "\n"
    << "affine_shear_rad = " << format_double(c.affine.max_shear_rad) << "\n"
    << "affine_translation = " << format_double(c.affine.max_translation) << "\n"
    << "affine_seed = " << c.affine.seed << "\n"
    << "out_dir = " << c.out_dir.string() << "\n";
  return s.str();
}

}  // namespace capsbench
