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
#include <mutex>
#include <string>
#include <vector>

#include "capsbench/tensor.hpp"

namespace capsbench {

struct MetricsRecord {
  std::string run_id;
  std::string phase;  // train | test | bench
  Index epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
  double wall_time_s = 0.0;
  Index param_count = 0;
  std::string timestamp;  // UTC, ISO 8601

  bool operator==(const MetricsRecord&) const = default;
};

inline constexpr const char* kMetricsHeader = "run_id,phase,epoch,loss,accuracy,wall_time_s,param_count,timestamp";

std::string utc_timestamp();

std::string to_csv_row(const MetricsRecord& record);
MetricsRecord parse_csv_row(const std::string& row);
std::string to_json_line(const MetricsRecord& record);
MetricsRecord parse_json_line(const std::string& line);

/// Appends to <dir>/metrics.csv and <dir>/metrics.jsonl. Each record is
/// written with a single write per file under a lock shared by every writer
/// in the process, and the CSV header is added only to an empty file.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::filesystem::path& dir);

  void write(const MetricsRecord& record);
  void write(const std::vector<MetricsRecord>& records);

  const std::filesystem::path& csv_path() const { return csv_; }
  const std::filesystem::path& jsonl_path() const { return jsonl_; }

 private:
  std::filesystem::path csv_;
  std::filesystem::path jsonl_;
};

std::vector<MetricsRecord> read_metrics_csv(const std::filesystem::path& path);

}  // namespace capsbench
