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

#include "capsbench/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "capsbench/checkpoint.hpp"
#include "capsbench/errors.hpp"
#include "capsbench/optim.hpp"

namespace capsbench {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) { return std::chrono::duration<double>(Clock::now() - start).count(); }

std::filesystem::path require_file(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) throw ConfigError("dataset file not found: " + path.string());
  return path;
}

Dataset load_mnist_split(const RunConfig& config, const std::string& prefix, std::optional<Index> limit,
                         std::map<std::string, std::string>& checksums) {
  const auto images = require_file(config.data_dir / (prefix + "-images-idx3-ubyte"));
  const auto labels = require_file(config.data_dir / (prefix + "-labels-idx1-ubyte"));
  checksums[images.filename().string()] = file_checksum(images);
  checksums[labels.filename().string()] = file_checksum(labels);
  return load_idx(images, labels, limit);
}

Dataset load_cifar_split(const RunConfig& config, std::vector<std::string> names,
                         std::map<std::string, std::string>& checksums) {
  std::vector<std::filesystem::path> files;
  for (const auto& name : names) {
    files.push_back(require_file(config.data_dir / name));
    checksums[name] = file_checksum(files.back());
  }
  return load_cifar10(files);
}

Index count_correct(const Tensor<float>& digit_caps, std::span<const Index> labels) {
  const auto predicted = classify(digit_caps);
  Index correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += predicted[i] == labels[i];
  return correct;
}

nlohmann::ordered_json config_json(const RunConfig& config) {
  nlohmann::ordered_json out = nlohmann::ordered_json::object();
  std::istringstream lines(format_run_config(config));
  std::string line;
  while (std::getline(lines, line)) {
    const auto eq = line.find(" = ");
    out[line.substr(0, eq)] = eq == std::string::npos ? "" : line.substr(eq + 3);
  }
  return out;
}

void write_metadata(const RunConfig& config, const std::string& command, Index param_count,
                    const std::map<std::string, std::string>& checksums) {
  nlohmann::ordered_json meta;
  meta["run_id"] = config.id();
  meta["command"] = command;
  meta["timestamp"] = utc_timestamp();
  meta["seed"] = config.seed;
  meta["shuffle_seed_base"] = config.seed;
  meta["affine_seed"] = config.affine.seed;
  meta["param_count"] = param_count;
  meta["dataset_checksums"] = checksums;
  meta["config"] = config_json(config);
  std::filesystem::create_directories(config.out_dir);
  const auto path = config.out_dir / (config.id() + ".meta.json");
  std::ofstream out(path);
  out << meta.dump(2) << "\n";
  if (!out) throw IoError("cannot write " + path.string());
}

std::uint64_t epoch_shuffle_seed(std::uint64_t seed, Index epoch) {
  return seed * 0x9E3779B97F4A7C15ull + std::uint64_t(epoch);
}

Tensor<float> synthetic_images(const ImageShape& shape, Index batch, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  Tensor<float> images({batch, shape.channels, shape.height, shape.width});
  for (Index i = 0; i < images.size(); ++i) images[i] = u(rng);
  return images;
}

}  // namespace

DatasetPair load_datasets(const RunConfig& config) {
  DatasetPair out;
  if (config.dataset == "mnist") {
    out.train = load_mnist_split(config, "train", config.train_limit, out.checksums);
    out.test = load_mnist_split(config, "t10k", std::nullopt, out.checksums);
  } else if (config.dataset == "cifar10") {
    out.train = load_cifar_split(
        config, {"data_batch_1.bin", "data_batch_2.bin", "data_batch_3.bin", "data_batch_4.bin", "data_batch_5.bin"},
        out.checksums);
    if (out.train.size() > config.train_limit) {
      std::vector<Index> first(static_cast<std::size_t>(config.train_limit));
      std::iota(first.begin(), first.end(), Index{0});
      out.train = out.train.select(first);
    }
    out.test = load_cifar_split(config, {"test_batch.bin"}, out.checksums);
  } else {
    throw ConfigError("unknown dataset '" + config.dataset + "'");
  }
  out.train.name = config.dataset + "-train";
  out.test.name = config.dataset + "-test";
  if (out.train.shape() != config.dataset_shape() || out.test.shape() != config.dataset_shape()) {
    throw ConfigError("dataset geometry does not match '" + config.dataset + "'");
  }
  if (config.subset_size) out.train = stratified_subset(out.train, *config.subset_size);
  if (config.test_subset) out.test = stratified_subset(out.test, *config.test_subset);
  if (config.pad_to_40) {
    out.train = pad_center(out.train, kAffineSide, kAffineSide);
    out.test = pad_center(out.test, kAffineSide, kAffineSide);
  }
  return out;
}

int eval_threads() {
  const char* env = std::getenv("CAPSBENCH_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 1) throw ConfigError(std::string("CAPSBENCH_THREADS must be a positive integer, got '") + env + "'");
  return int(std::min<long>(n, 256));
}

EvalResult evaluate(const Model<float>& model, const Dataset& data, Index batch_size, int threads) {
  const auto start = Clock::now();
  Batches batches(data, batch_size);
  const Index count = batches.size();
  std::vector<Index> correct(static_cast<std::size_t>(count));
  std::vector<double> losses(static_cast<std::size_t>(count));

  auto work = [&](Index first, Index stride) {
    NoGradGuard no_grad;
    for (Index i = first; i < count; i += stride) {
      const Batch batch = batches[i];
      const auto out = model.forward(batch.images);
      correct[std::size_t(i)] = count_correct(out.digit_caps.value(), batch.labels);
      losses[std::size_t(i)] =
          double(total_loss(out, batch.labels, batch.images, model.config()).value().item()) * double(batch.labels.size());
    }
  };
  const Index workers = std::clamp<Index>(threads, 1, std::max<Index>(count, 1));
  if (workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (Index t = 0; t < workers; ++t) pool.emplace_back(work, t, workers);
  }

  EvalResult result;
  Index hits = 0;
  double loss = 0.0;
  for (Index i = 0; i < count; ++i) {
    hits += correct[std::size_t(i)];
    loss += losses[std::size_t(i)];
  }
  if (data.size() > 0) {
    result.accuracy = double(hits) / double(data.size());
    result.loss = loss / double(data.size());
  }
  result.wall_time_s = seconds_since(start);
  return result;
}

TrainResult train_model(Model<float>& model, const DatasetPair& data, const RunConfig& config) {
  if (data.train.shape() != model.config().input || data.test.shape() != model.config().input) {
    throw ConfigError("dataset geometry does not match the model input");
  }
  TrainResult result;
  result.run_id = config.id();
  result.param_count = count_parameters(model);
  Adam<float> optimizer(model.parameter_list(), {.learning_rate = config.learning_rate});
  const int threads = eval_threads();

  for (Index epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = Clock::now();
    Batches batches(data.train, config.batch_size, epoch_shuffle_seed(config.seed, epoch));
    double loss_sum = 0.0;
    Index hits = 0;
    for (Index i = 0; i < batches.size(); ++i) {
      const Batch batch = batches[i];
      optimizer.zero_grad();
      const auto out = model.forward(batch.images, std::span<const Index>(batch.labels));
      auto loss = total_loss(out, batch.labels, batch.images, model.config());
      backward(loss);
      optimizer.step();
      loss_sum += double(loss.value().item()) * double(batch.labels.size());
      hits += count_correct(out.digit_caps.value(), batch.labels);
    }
    const double n = double(std::max<Index>(data.train.size(), 1));
    const double train_time = seconds_since(start);
    result.epoch_losses.push_back(loss_sum / n);
    result.records.push_back({result.run_id, "train", epoch, loss_sum / n, double(hits) / n, train_time,
                              result.param_count, utc_timestamp()});

    result.final_test = evaluate(model, data.test, config.batch_size, threads);
    result.records.push_back({result.run_id, "test", epoch, result.final_test.loss, result.final_test.accuracy,
                              result.final_test.wall_time_s, result.param_count, utc_timestamp()});
  }
  return result;
}

std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint) {
  auto path = checkpoint;
  path += ".cfg";
  return path;
}

TrainResult cmd_train(const RunConfig& config, std::optional<std::filesystem::path> checkpoint) {
  config.validate();
  const DatasetPair data = load_datasets(config);
  auto model = build<float>(config.model_config(), {.seed = config.seed});
  MetricsWriter writer(config.out_dir);
  write_metadata(config, "train", count_parameters(model), data.checksums);

  TrainResult result = train_model(model, data, config);
  writer.write(result.records);
  result.checkpoint = checkpoint.value_or(config.out_dir / (config.id() + ".qcn"));
  if (result.checkpoint.has_parent_path()) std::filesystem::create_directories(result.checkpoint.parent_path());
  save_checkpoint(result.checkpoint, model);
  std::ofstream sidecar(sidecar_path(result.checkpoint));
  sidecar << format_run_config(config);
  if (!sidecar) throw IoError("cannot write " + sidecar_path(result.checkpoint).string());
  return result;
}

MetricsRecord cmd_eval(const std::filesystem::path& checkpoint, const std::optional<RunConfig>& data_config) {
  if (!std::filesystem::is_regular_file(checkpoint)) throw ConfigError("checkpoint not found: " + checkpoint.string());
  const auto sidecar = sidecar_path(checkpoint);
  if (!std::filesystem::is_regular_file(sidecar)) throw ConfigError("checkpoint has no sidecar config " + sidecar.string());
  const RunConfig trained = load_run_config(sidecar);
  const RunConfig config = data_config.value_or(trained);
  config.validate();
  if (config.input_shape() != trained.input_shape()) {
    throw ConfigError("checkpoint was trained on " + trained.dataset + " geometry, data config is " + config.dataset);
  }

  auto model = build<float>(trained.model_config(), {.initialize = false});
  load_checkpoint(checkpoint, model);
  const DatasetPair data = load_datasets(config);
  const EvalResult eval = evaluate(model, data.test, config.batch_size, eval_threads());
  const MetricsRecord record{trained.id(), "test", 0, eval.loss, eval.accuracy, eval.wall_time_s,
                             count_parameters(model), utc_timestamp()};
  MetricsWriter(config.out_dir).write(record);
  return record;
}

double median(std::vector<double> samples) {
  if (samples.empty()) return 0.0;
  const auto mid = samples.begin() + std::ptrdiff_t(samples.size() / 2);
  std::nth_element(samples.begin(), mid, samples.end());
  if (samples.size() % 2 == 1) return *mid;
  return (*mid + *std::max_element(samples.begin(), mid)) / 2.0;
}

namespace {

class BenchSession {
 public:
  explicit BenchSession(const RunConfig& config)
      : config_(config.model_config()),
        model_(build<float>(config_, {.seed = config.seed})),
        optimizer_(model_.parameter_list(), {.learning_rate = config.learning_rate}),
        images_(synthetic_images(config_.input, config.batch_size, config.seed)),
        labels_(std::size_t(config.batch_size)) {
    for (std::size_t i = 0; i < labels_.size(); ++i) labels_[i] = Index(i) % config_.num_classes;
  }

  const Model<float>& model() const { return model_; }

  double train_step() {
    const auto start = Clock::now();
    optimizer_.zero_grad();
    const auto out = model_.forward(images_, std::span<const Index>(labels_));
    backward(total_loss(out, labels_, images_, config_));
    optimizer_.step();
    return seconds_since(start);
  }

  double infer_step() {
    const auto start = Clock::now();
    NoGradGuard no_grad;
    const auto out = model_.forward(images_);
    classify(out.digit_caps.value());
    return seconds_since(start);
  }

 private:
  ModelConfig config_;
  Model<float> model_;
  Adam<float> optimizer_;
  Tensor<float> images_;
  std::vector<Index> labels_;
};

}  // namespace

BenchResult bench_one(const RunConfig& config, Index batches, Index warmup) {
  return cmd_bench({config}, batches, warmup).front();
}

std::vector<BenchResult> cmd_bench(const std::vector<RunConfig>& configs, Index batches, Index warmup,
                                   MetricsWriter* writer) {
  if (batches < 1 || warmup < 1) throw ConfigError("bench needs at least one warm-up and one timed batch");
  std::vector<std::unique_ptr<BenchSession>> sessions;
  std::vector<BenchResult> results;
  for (const auto& config : configs) {
    config.validate();
    sessions.push_back(std::make_unique<BenchSession>(config));
    results.push_back({config.id(), count_parameters(sessions.back()->model()), config.batch_size, {}, {}, 0.0, 0.0});
  }

  for (auto& s : sessions)
    for (Index i = 0; i < warmup; ++i) s->train_step();
  for (Index i = 0; i < batches; ++i)
    for (std::size_t k = 0; k < sessions.size(); ++k) results[k].train_samples.push_back(sessions[k]->train_step());
  for (auto& s : sessions)
    for (Index i = 0; i < warmup; ++i) s->infer_step();
  for (Index i = 0; i < batches; ++i)
    for (std::size_t k = 0; k < sessions.size(); ++k) results[k].infer_samples.push_back(sessions[k]->infer_step());

  for (auto& r : results) {
    r.train_median = median(r.train_samples);
    r.infer_median = median(r.infer_samples);
    if (writer != nullptr) {
      writer->write({{r.run_id + "/train-step", "bench", 0, 0.0, 0.0, r.train_median, r.param_count, utc_timestamp()},
                     {r.run_id + "/infer-step", "bench", 0, 0.0, 0.0, r.infer_median, r.param_count, utc_timestamp()}});
    }
  }
  return results;
}

std::vector<ParamQuery> published_param_queries() {
  std::vector<ParamQuery> q;
  const std::pair<Index, Index> sweep[] = {{1, 4'066'824}, {4, 4'810'272}, {8, 5'801'536}, {16, 7'784'064}, {32, 11'749'120}};
  for (auto [types, count] : sweep) {
    const auto config = ModelConfig::baseline(kCifarShape, types);
    q.push_back({"sweep cifar10 types=" + std::to_string(types) + ": " + std::to_string(config.num_primary_capsules()) +
                     " PCs (" + std::to_string(36 * types) + ")",
                 config, count, std::nullopt, std::nullopt, ""});
  }
  q.push_back({"baseline mnist", ModelConfig::baseline(kMnistShape), 8'215'568, std::nullopt, std::nullopt, ""});
  q.push_back({"baseline cifar10", ModelConfig::baseline(kCifarShape), 11'749'120, std::nullopt, std::nullopt, ""});
  q.push_back({"qcn mnist pc=4", ModelConfig::qcn(kMnistShape, 4), 4'714'288, std::nullopt, std::nullopt, ""});
  q.push_back({"qcn mnist pc=6", ModelConfig::qcn(kMnistShape, 6), 6'355'264, std::nullopt, std::nullopt, ""});
  q.push_back({"qcn mnist pc=8", ModelConfig::qcn(kMnistShape, 8), 7'996'240, std::nullopt, std::nullopt, ""});
  q.push_back({"qcn cifar10 pc=4", ModelConfig::qcn(kCifarShape, 4), 8'542'752, std::nullopt, std::nullopt, ""});
  const char* swapped = "published 6/8 PC cifar10 figures appear swapped";
  q.push_back({"qcn cifar10 pc=6", ModelConfig::qcn(kCifarShape, 6), std::nullopt, 13.26, std::nullopt, swapped});
  q.push_back({"qcn cifar10 pc=8", ModelConfig::qcn(kCifarShape, 8), std::nullopt, 10.90, std::nullopt, swapped});
  const std::tuple<Index, double, double> plus[] = {{4, 3.59, 5.09}, {6, 5.23, 7.45}, {8, 6.87, 9.81}};
  for (auto [pc, mnist, cifar] : plus) {
    q.push_back({"qcn_plus mnist pc=" + std::to_string(pc), ModelConfig::qcn_plus(kMnistShape, pc), std::nullopt, mnist,
                 287'056, "decoder budget 287056 +-15%"});
    q.push_back({"qcn_plus cifar10 pc=" + std::to_string(pc), ModelConfig::qcn_plus(kCifarShape, pc), std::nullopt, cifar,
                 303'792, "decoder budget 303792 +-15%"});
  }
  return q;
}

std::vector<ParamRow> cmd_params(const std::vector<ParamQuery>& queries) {
  std::vector<ParamRow> rows;
  for (const auto& query : queries) {
    const auto model = build<float>(query.config, {.initialize = false});
    ParamRow row{query, count_parameters(model), 0, "-"};
    for (const auto& [name, p] : model.parameters())
      if (name.starts_with("decoder.")) row.decoder_count += p.value().size();
    if (query.decoder_budget) {
      const double budget = double(*query.decoder_budget);
      row.status = std::abs(double(row.decoder_count) - budget) <= 0.15 * budget ? "BUDGET-OK" : "BUDGET-OUT";
    } else if (query.published_exact) {
      row.status = row.count == *query.published_exact ? "MATCH" : "MISMATCH";
    } else if (query.published_millions) {
      row.status = std::lround(double(row.count) / 1e4) == std::lround(*query.published_millions * 100) ? "MATCH" : "MISMATCH";
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

std::string published_text(const ParamQuery& q) {
  if (q.published_exact) return std::to_string(*q.published_exact);
  if (q.published_millions) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << *q.published_millions << "M";
    return s.str();
  }
  return "-";
}

}  // namespace

std::string format_param_table(const std::vector<ParamRow>& rows) {
  std::size_t width = 6;
  for (const auto& r : rows) width = std::max(width, r.query.label.size());
  std::ostringstream s;
  s << std::left << std::setw(int(width)) << "config" << "  " << std::right << std::setw(11) << "derived" << "  "
    << std::setw(11) << "published" << "  " << std::left << std::setw(10) << "status" << "  note\n";
  for (const auto& r : rows) {
    std::string note = r.query.note;
    if (r.query.decoder_budget) note += " (decoder " + std::to_string(r.decoder_count) + ")";
    s << std::left << std::setw(int(width)) << r.query.label << "  " << std::right << std::setw(11) << r.count << "  "
      << std::setw(11) << published_text(r.query) << "  " << std::left << std::setw(10) << r.status << "  " << note << "\n";
  }
  return s.str();
}

void write_param_csv(const std::filesystem::path& path, const std::vector<ParamRow>& rows) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  out << "config,derived,decoder,published,status,note\n";
  for (const auto& r : rows) {
    out << '"' << r.query.label << "\"," << r.count << ',' << r.decoder_count << ',' << published_text(r.query) << ','
        << r.status << ",\"" << r.query.note << "\"\n";
  }
  if (!out) throw IoError("cannot write " + path.string());
}

std::vector<AffineResult> cmd_affine(const std::vector<RunConfig>& configs) {
  std::vector<AffineResult> results;
  for (RunConfig config : configs) {
    config.pad_to_40 = true;
    config.validate();
    const DatasetPair data = load_datasets(config);
    const Dataset affine_test = affine_transform(data.test, config.affine);
    std::filesystem::create_directories(config.out_dir);
    save_idx(config.out_dir / "affine-test-images-idx3-ubyte", config.out_dir / "affine-test-labels-idx1-ubyte",
             affine_test);

    auto model = build<float>(config.model_config(), {.seed = config.seed});
    write_metadata(config, "affine", count_parameters(model), data.checksums);
    const TrainResult trained = train_model(model, data, config);
    const EvalResult affine = evaluate(model, affine_test, config.batch_size, eval_threads());

    AffineResult r;
    r.run_id = config.id();
    r.param_count = trained.param_count;
    r.clean_accuracy = trained.final_test.accuracy;
    r.affine_accuracy = affine.accuracy;
    for (const auto& rec : trained.records)
      if (rec.phase == "train") r.train_time_s += rec.wall_time_s;
    r.test_time_s = trained.final_test.wall_time_s;
    const Index last = config.epochs;
    r.records = {
        {r.run_id + ":clean", "test", last, trained.final_test.loss, r.clean_accuracy, r.test_time_s, r.param_count,
         utc_timestamp()},
        {r.run_id + ":affine", "test", last, affine.loss, r.affine_accuracy, affine.wall_time_s, r.param_count,
         utc_timestamp()},
        {r.run_id + ":train-time", "bench", last, 0.0, 0.0, r.train_time_s, r.param_count, utc_timestamp()},
        {r.run_id + ":test-time", "bench", last, 0.0, 0.0, r.test_time_s, r.param_count, utc_timestamp()},
    };
    MetricsWriter(config.out_dir).write(r.records);
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace capsbench
