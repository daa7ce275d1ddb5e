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

#include "capsbench/metrics.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "capsbench/errors.hpp"

namespace capsbench {
namespace {

std::mutex& write_mutex() {
  static std::mutex m;
  return m;
}

std::string quote_csv(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

std::vector<std::string> split_csv(const std::string& row) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < row.size(); ++i) {
    const char ch = row[i];
    if (quoted) {
      if (ch == '"' && i + 1 < row.size() && row[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        fields.back() += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.emplace_back();
    } else {
      fields.back() += ch;
    }
  }
  return fields;
}

std::string number(double v) {
  std::ostringstream s;
  s << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return s.str();
}

void append(const std::filesystem::path& path, const std::string& text) {
  std::FILE* f = std::fopen(path.c_str(), "ab");
  if (!f) throw IoError("cannot append to " + path.string());
  const bool ok = std::fwrite(text.data(), 1, text.size(), f) == text.size();
  if (std::fclose(f) != 0 || !ok) throw IoError("failed writing " + path.string());
}

}  // namespace

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

std::string to_csv_row(const MetricsRecord& r) {
  return quote_csv(r.run_id) + "," + quote_csv(r.phase) + "," + std::to_string(r.epoch) + "," + number(r.loss) + "," +
         number(r.accuracy) + "," + number(r.wall_time_s) + "," + std::to_string(r.param_count) + "," +
         quote_csv(r.timestamp);
}

MetricsRecord parse_csv_row(const std::string& row) {
  const auto f = split_csv(row);
  if (f.size() != 8) throw FormatError("metrics row has " + std::to_string(f.size()) + " fields: " + row);
  try {
    return {f[0], f[1], std::stoll(f[2]), std::stod(f[3]), std::stod(f[4]), std::stod(f[5]), std::stoll(f[6]), f[7]};
  } catch (const std::logic_error&) {
    throw FormatError("malformed metrics row: " + row);
  }
}

std::string to_json_line(const MetricsRecord& r) {
  const nlohmann::ordered_json j = {{"run_id", r.run_id},           {"phase", r.phase},
                                    {"epoch", r.epoch},             {"loss", r.loss},
                                    {"accuracy", r.accuracy},       {"wall_time_s", r.wall_time_s},
                                    {"param_count", r.param_count}, {"timestamp", r.timestamp}};
  return j.dump();
}

MetricsRecord parse_json_line(const std::string& line) {
  try {
    const auto j = nlohmann::json::parse(line);
    return {j.at("run_id"),   j.at("phase"),       j.at("epoch"),       j.at("loss"),
            j.at("accuracy"), j.at("wall_time_s"), j.at("param_count"), j.at("timestamp")};
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed metrics line: ") + e.what());
  }
}

MetricsWriter::MetricsWriter(const std::filesystem::path& dir) : csv_(dir / "metrics.csv"), jsonl_(dir / "metrics.jsonl") {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

void MetricsWriter::write(const MetricsRecord& record) { write(std::vector<MetricsRecord>{record}); }

void MetricsWriter::write(const std::vector<MetricsRecord>& records) {
  std::string csv, jsonl;
  for (const auto& r : records) {
    csv += to_csv_row(r) + "\n";
    jsonl += to_json_line(r) + "\n";
  }
  std::lock_guard lock(write_mutex());
  std::error_code ec;
  if (!std::filesystem::exists(csv_, ec) || std::filesystem::file_size(csv_, ec) == 0) {
    csv = std::string(kMetricsHeader) + "\n" + csv;
  }
  append(csv_, csv);
  append(jsonl_, jsonl);
}

std::vector<MetricsRecord> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) throw FormatError(path.string() + ": missing metrics header");
  std::vector<MetricsRecord> out;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(parse_csv_row(line));
  }
  return out;
}

}  // namespace capsbench
