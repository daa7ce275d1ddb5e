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
#include <iomanip>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "capsbench/commands.hpp"
#include "capsbench/errors.hpp"

using namespace capsbench;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

struct CommonFlags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<Index> subset;
  std::string checkpoint;
  Index repeat = 0;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config, "key = value run configuration");
  cmd->add_option("--out", flags.out, "output directory for metrics, metadata and checkpoints");
  cmd->add_option("--seed", flags.seed, "random seed");
  cmd->add_option("--subset", flags.subset, "stratified training subset size");
  cmd->add_option("--checkpoint", flags.checkpoint, "checkpoint path");
  cmd->add_option("--repeat", flags.repeat, "repeat the run with consecutive seeds");
}

RunConfig resolve(const CommonFlags& flags, RunConfig base = {}) {
  RunConfig config = flags.config.empty() ? base : load_run_config(flags.config, base);
  if (!flags.out.empty()) config.out_dir = flags.out;
  if (flags.seed) config.seed = *flags.seed;
  if (flags.subset) config.subset_size = *flags.subset;
  if (flags.repeat > 0) config.repeat = flags.repeat;
  config.validate();
  return config;
}

void print_record(const MetricsRecord& r) {
  std::cout << std::left << std::setw(34) << r.run_id << " " << std::setw(5) << r.phase << " epoch " << std::setw(3)
            << r.epoch << std::fixed << std::setprecision(4) << " loss " << r.loss << " acc " << r.accuracy << " time "
            << std::setprecision(2) << r.wall_time_s << "s\n";
}

int run_train(const CommonFlags& flags) {
  const RunConfig base = resolve(flags);
  std::vector<double> accuracies;
  for (Index rep = 0; rep < base.repeat; ++rep) {
    RunConfig config = base;
    config.seed = base.seed + std::uint64_t(rep);
    if (base.repeat > 1) config.run_id = base.id() + "-r" + std::to_string(rep);
    std::optional<std::filesystem::path> checkpoint;
    if (!flags.checkpoint.empty() && base.repeat == 1) checkpoint = flags.checkpoint;
    const TrainResult result = cmd_train(config, checkpoint);
    for (const auto& r : result.records) print_record(r);
    std::cout << "checkpoint " << result.checkpoint.string() << "\n";
    accuracies.push_back(result.final_test.accuracy);
  }
  if (accuracies.size() > 1) {
    const double n = double(accuracies.size());
    const double mean = std::accumulate(accuracies.begin(), accuracies.end(), 0.0) / n;
    double var = 0.0;
    for (double a : accuracies) var += (a - mean) * (a - mean);
    const auto [lo, hi] = std::minmax_element(accuracies.begin(), accuracies.end());
    std::cout << std::fixed << std::setprecision(4) << "test accuracy over " << accuracies.size() << " runs: mean "
              << mean << " sd " << std::sqrt(var / (n - 1)) << " range [" << *lo << ", " << *hi << "]\n";
  }
  return 0;
}

int run_eval(const CommonFlags& flags) {
  if (flags.checkpoint.empty()) throw ConfigError("eval needs --checkpoint");
  std::optional<RunConfig> data_config;
  if (!flags.config.empty() || !flags.out.empty() || flags.subset) {
    RunConfig base = load_run_config(sidecar_path(flags.checkpoint));
    data_config = resolve(flags, base);
  }
  print_record(cmd_eval(flags.checkpoint, data_config));
  return 0;
}

int run_bench(const CommonFlags& flags, bool sweep, std::optional<Index> batches, std::optional<Index> batch_size) {
  RunConfig base = resolve(flags);
  std::vector<RunConfig> configs;
  if (sweep) {
    for (Index types : {1, 4, 8, 16, 32}) {
      RunConfig c = base;
      c.dataset = "cifar10";
      c.variant = Variant::baseline;
      c.pc_types = types;
      c.batch_size = batch_size.value_or(64);
      configs.push_back(c);
    }
  } else if (!flags.config.empty()) {
    configs.push_back(base);
    if (batch_size) configs.back().batch_size = *batch_size;
  } else {
    for (Variant v : {Variant::baseline, Variant::qcn}) {
      RunConfig c = base;
      c.variant = v;
      c.pc_count = 6;
      c.batch_size = batch_size.value_or(128);
      configs.push_back(c);
    }
  }
  MetricsWriter writer(base.out_dir);
  const auto results = cmd_bench(configs, batches.value_or(base.bench_batches), base.bench_warmup, &writer);
  std::cout << std::left << std::setw(30) << "run" << std::right << std::setw(12) << "params" << std::setw(8) << "batch"
            << std::setw(14) << "train s/step" << std::setw(14) << "infer s/step" << "\n";
  for (const auto& r : results) {
    std::cout << std::left << std::setw(30) << r.run_id << std::right << std::setw(12) << r.param_count << std::setw(8)
              << r.batch_size << std::fixed << std::setprecision(4) << std::setw(14) << r.train_median << std::setw(14)
              << r.infer_median << "\n";
  }
  if (!sweep && results.size() == 2) {
    std::cout << std::setprecision(2) << "speedup train " << results[0].train_median / results[1].train_median
              << "x, infer " << results[0].infer_median / results[1].infer_median << "x\n";
  }
  return 0;
}

int run_params(const CommonFlags& flags) {
  std::vector<ParamQuery> queries;
  std::filesystem::path out = flags.out.empty() ? std::filesystem::path("runs") : std::filesystem::path(flags.out);
  if (flags.config.empty()) {
    queries = published_param_queries();
  } else {
    const RunConfig config = resolve(flags);
    queries.push_back({config.id(), config.model_config(), std::nullopt, std::nullopt, std::nullopt, ""});
    out = config.out_dir;
  }
  const auto rows = cmd_params(queries);
  std::cout << format_param_table(rows);
  write_param_csv(out / "params.csv", rows);
  return 0;
}

int run_affine(const CommonFlags& flags, bool with_baseline) {
  const RunConfig config = resolve(flags);
  std::vector<RunConfig> configs;
  if (with_baseline) {
    RunConfig baseline = config;
    baseline.variant = Variant::baseline;
    baseline.run_id.clear();
    configs.push_back(baseline);
  }
  configs.push_back(config);
  const auto results = cmd_affine(configs);
  for (const auto& r : results)
    for (const auto& rec : r.records) print_record(rec);
  if (results.size() == 2) {
    std::cout << std::fixed << std::setprecision(2) << "baseline/" << results[1].run_id << " time ratio: train "
              << results[0].train_time_s / results[1].train_time_s << "x, test "
              << results[0].test_time_s / results[1].test_time_s << "x\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Capsule network training and benchmarking"};
  app.require_subcommand(1);
  CommonFlags flags;

  auto* train = app.add_subcommand("train", "train a model and write a checkpoint");
  auto* eval = app.add_subcommand("eval", "score a checkpoint on a test split");
  auto* bench = app.add_subcommand("bench", "time training and inference steps");
  auto* params = app.add_subcommand("params", "parameter counts against the published tables");
  auto* affine = app.add_subcommand("affine", "40x40 padded training, clean and affine test accuracy");
  for (auto* cmd : {train, eval, bench, params, affine}) add_common(cmd, flags);

  bool sweep = false;
  std::optional<Index> batches;
  std::optional<Index> batch_size;
  bench->add_flag("--sweep", sweep, "baseline primary-capsule type sweep on cifar10 geometry");
  bench->add_option("--batches", batches, "timed batches per phase");
  bench->add_option("--batch-size", batch_size, "images per step");
  bool with_baseline = false;
  affine->add_flag("--with-baseline", with_baseline, "also run the baseline and report time ratios");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*train) return run_train(flags);
    if (*eval) return run_eval(flags);
    if (*bench) return run_bench(flags, sweep, batches, batch_size);
    if (*params) return run_params(flags);
    if (*affine) return run_affine(flags, with_baseline);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
