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
#include <optional>
#include <string>
#include <vector>

#include "capsbench/data.hpp"
#include "capsbench/metrics.hpp"
#include "capsbench/network.hpp"
#include "capsbench/run_config.hpp"

namespace capsbench {

struct DatasetPair {
  Dataset train;
  Dataset test;
  std::map<std::string, std::string> checksums;  // file name -> FNV-1a
};

/// Loads both splits named by the config, then applies train_limit,
/// subset_size / test_subset (stratified) and pad_to_40.
DatasetPair load_datasets(const RunConfig& config);

/// Value of CAPSBENCH_THREADS, default 1. Throws ConfigError when malformed.
int eval_threads();

struct EvalResult {
  double accuracy = 0.0;
  double loss = 0.0;
  double wall_time_s = 0.0;
};

/// Forward-only pass with longest-capsule masking. Batches may be spread over
/// `threads` workers; the result does not depend on the thread count.
EvalResult evaluate(const Model<float>& model, const Dataset& data, Index batch_size, int threads = 1);

struct TrainResult {
  std::string run_id;
  std::vector<MetricsRecord> records;
  std::vector<double> epoch_losses;
  EvalResult final_test;
  Index param_count = 0;
  std::filesystem::path checkpoint;
};

/// Adam on total_loss, one train and one test record per epoch. Writes the
/// checkpoint (default <out_dir>/<run id>.qcn), its `.cfg` sidecar, the
/// metrics files and <run id>.meta.json.
TrainResult cmd_train(const RunConfig& config, std::optional<std::filesystem::path> checkpoint = std::nullopt);

/// Same loop without any file output; `model` is trained in place.
TrainResult train_model(Model<float>& model, const DatasetPair& data, const RunConfig& config);

std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint);

/// Rebuilds the model from the checkpoint sidecar and scores the test split
/// of `data_config` (the sidecar itself when absent).
MetricsRecord cmd_eval(const std::filesystem::path& checkpoint, const std::optional<RunConfig>& data_config = std::nullopt);

struct BenchResult {
  std::string run_id;
  Index param_count = 0;
  Index batch_size = 0;
  std::vector<double> train_samples;  // seconds per training step
  std::vector<double> infer_samples;  // seconds per inference step
  double train_median = 0.0;
  double infer_median = 0.0;
};

double median(std::vector<double> samples);

/// Times training steps (forward, backward, update) and inference steps on
/// seeded synthetic batches of the config geometry. `warmup` untimed steps of
/// each kind run first. cmd_bench keeps every model alive and takes the timed
/// steps round-robin across the configs.
BenchResult bench_one(const RunConfig& config, Index batches, Index warmup);
std::vector<BenchResult> cmd_bench(const std::vector<RunConfig>& configs, Index batches, Index warmup,
                                   MetricsWriter* writer = nullptr);

struct ParamQuery {
  std::string label;
  ModelConfig config;
  std::optional<Index> published_exact;      // exact published figure
  std::optional<double> published_millions;  // figure published rounded to 0.01M
  std::optional<Index> decoder_budget;   // qcn_plus: implied decoder size
  std::string note;
};

struct ParamRow {
  ParamQuery query;
  Index count = 0;
  Index decoder_count = 0;
  std::string status;  // MATCH | MISMATCH | BUDGET-OK | BUDGET-OUT | -
};

/// The configurations behind the two published parameter tables.
std::vector<ParamQuery> published_param_queries();
std::vector<ParamRow> cmd_params(const std::vector<ParamQuery>& queries);
std::string format_param_table(const std::vector<ParamRow>& rows);
void write_param_csv(const std::filesystem::path& path, const std::vector<ParamRow>& rows);

struct AffineResult {
  std::string run_id;
  Index param_count = 0;
  double clean_accuracy = 0.0;
  double affine_accuracy = 0.0;
  double train_time_s = 0.0;
  double test_time_s = 0.0;
  std::vector<MetricsRecord> records;
};

/// Trains each config on 40x40-padded images, then scores the padded clean
/// test split and its seeded affine variant (persisted as IDX in out_dir).
std::vector<AffineResult> cmd_affine(const std::vector<RunConfig>& configs);

}  // namespace capsbench
