/* Copyright 2026 The fsadv Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/


#include <filesystem>
#include <sstream>

#include "fsadv/digest.hpp"
#include "fsadv/errors.hpp"
#include "fsadv/harness.hpp"
#include "file_util.hpp"
#include "json.hpp"

namespace fsadv {

namespace {

constexpr char kModule[] = "harness";
using nlohmann::json;

constexpr char kThresholdHeader[] =
    "schema_version,model_id,head,detector,tau,tpr_target,clean_tpr,n_clean";
constexpr char kTransferHeader[] =
    "schema_version,source,target,whitebox,acc_or_tsuc,fnr_or_fpr,auroc,n";

std::string num(double v) { return detail::format_double(v); }

std::vector<std::string> cells_of(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

[[noreturn]] void malformed(const std::string& file, const std::string& what) {
  throw Error(ErrorKind::kIo, kModule, file + ": " + what);
}

void check_version(const std::string& file, const std::string& found) {
  if (found != std::to_string(kReportSchemaVersion)) {
    throw Error(ErrorKind::kMigration, kModule,
                file + " has schema_version " + found + ", this build reads " +
                    std::to_string(kReportSchemaVersion));
  }
}

// Table rows after a fixed header, version-checked.
std::vector<std::vector<std::string>> read_table(const std::string& path, const char* header,
                                                 std::size_t width) {
  std::istringstream in(detail::read_file(path, kModule));
  std::string line;
  if (!std::getline(in, line) || line != header) {
    throw Error(ErrorKind::kMigration, kModule,
                path + " header does not match schema_version " +
                    std::to_string(kReportSchemaVersion));
  }
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = cells_of(line);
    if (cells.size() != width) malformed(path, "row with " + std::to_string(cells.size()) + " cells");
    check_version(path, cells[0]);
    rows.push_back(std::move(cells));
  }
  return rows;
}

double to_double(const std::string& file, const std::string& s) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos == s.size()) return v;
  } catch (const std::logic_error&) {
  }
  malformed(file, "bad number '" + s + "'");
}

std::size_t to_size(const std::string& file, const std::string& s) {
  try {
    return std::stoull(s);
  } catch (const std::logic_error&) {
    malformed(file, "bad count '" + s + "'");
  }
}

json record_json(const ScoreRecord& r) {
  json j;
  j["schema_version"] = kReportSchemaVersion;
  j["sample_id"] = r.sample_id;
  j["provenance"] = to_string(r.provenance);
  j["model_id"] = r.model_id;
  j["head"] = r.head;
  j["ood_score"] = r.ood_score;
  j["predicted_class"] = r.predicted_class;
  j["true_or_target_class"] = r.true_or_target_class;
  j["attack_config_digest"] =
      r.attack_config_digest ? json(*r.attack_config_digest) : json(nullptr);
  j["source"] = r.source;
  j["head_fingerprint"] = r.head_fingerprint;
  return j;
}

ScoreRecord record_from(const json& j) {
  ScoreRecord r;
  r.sample_id = j.at("sample_id").get<std::string>();
  r.provenance = parse_provenance(j.at("provenance").get<std::string>());
  r.model_id = j.at("model_id").get<std::string>();
  r.head = j.at("head").get<std::string>();
  r.ood_score = j.at("ood_score").get<double>();
  r.predicted_class = j.at("predicted_class").get<int>();
  r.true_or_target_class = j.at("true_or_target_class").get<int>();
  if (!j.at("attack_config_digest").is_null()) {
    r.attack_config_digest = j.at("attack_config_digest").get<std::string>();
  }
  r.source = j.at("source").get<std::string>();
  r.head_fingerprint = j.at("head_fingerprint").get<std::string>();
  return r;
}

}  // namespace

void write_report(const ReportBundle& report, const std::string& dir) {
  if (report.schema_version != kReportSchemaVersion) {
    throw Error(ErrorKind::kMigration, kModule,
                "cannot write schema_version " + std::to_string(report.schema_version));
  }
  std::filesystem::create_directories(dir);

  std::string records;
  for (const auto& r : report.records) records += record_json(r).dump() + "\n";
  detail::write_file(dir + "/records.ndjson", records, kModule);

  std::ostringstream metrics;
  write_metrics_csv(metrics, report.metrics);
  detail::write_file(dir + "/metrics.csv", metrics.str(), kModule);

  std::ostringstream th;
  th << kThresholdHeader << "\n";
  for (const auto& t : report.thresholds) {
    th << kReportSchemaVersion << ',' << t.model_id << ',' << t.head << ',' << t.detector << ','
       << num(t.tau) << ',' << num(t.tpr_target) << ',' << num(t.clean_tpr) << ',' << t.n_clean
       << "\n";
  }
  detail::write_file(dir + "/thresholds.csv", th.str(), kModule);

  std::ostringstream tm;
  tm << kTransferHeader << "\n";
  for (const auto& c : report.transfer) {
    tm << kReportSchemaVersion << ',' << c.source << ',' << c.target << ','
       << (c.whitebox ? 1 : 0) << ',' << num(c.accuracy_or_tsuc) << ',' << num(c.fnr_or_fpr)
       << ',' << num(c.auroc) << ',' << c.n << "\n";
  }
  detail::write_file(dir + "/transfer_matrix.csv", tm.str(), kModule);

  detail::write_file(dir + "/config.snapshot", report.config_snapshot, kModule);

  json meta;
  meta["schema_version"] = report.schema_version;
  meta["mode"] = report.mode;
  meta["config_digest"] = report.config_digest;
  meta["attack_digest"] = report.attack_digest;
  meta["head"] = report.head;
  meta["detector"] = report.detector;
  meta["tpr_target"] = report.tpr_target;
  meta["models"] = report.models;
  meta["sources"] = report.sources;
  meta["failures"] = json::array();
  for (const auto& f : report.failures) {
    meta["failures"].push_back({{"model_id", f.model_id}, {"error", f.error}});
  }
  meta["warnings"] = report.warnings;
  detail::write_file(dir + "/report.json", meta.dump(2) + "\n", kModule);
}

ReportBundle read_report(const std::string& dir) {
  ReportBundle r;
  const std::string meta_path = dir + "/report.json";
  json meta;
  try {
    meta = json::parse(detail::read_file(meta_path, kModule));
  } catch (const json::exception& e) {
    malformed(meta_path, e.what());
  }
  try {
    const int version = meta.at("schema_version").get<int>();
    check_version(meta_path, std::to_string(version));
    r.schema_version = version;
    r.mode = meta.at("mode").get<std::string>();
    r.config_digest = meta.at("config_digest").get<std::string>();
    r.attack_digest = meta.at("attack_digest").get<std::string>();
    r.head = meta.at("head").get<std::string>();
    r.detector = meta.at("detector").get<std::string>();
    r.tpr_target = meta.at("tpr_target").get<double>();
    r.models = meta.at("models").get<std::vector<std::string>>();
    r.sources = meta.at("sources").get<std::vector<std::string>>();
    for (const auto& f : meta.at("failures")) {
      r.failures.push_back({f.at("model_id").get<std::string>(), f.at("error").get<std::string>()});
    }
    r.warnings = meta.at("warnings").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    malformed(meta_path, e.what());
  }

  r.config_snapshot = detail::read_file(dir + "/config.snapshot", kModule);
  if (sha256_hex(r.config_snapshot) != r.config_digest) {
    throw Error(ErrorKind::kIntegrity, kModule,
                dir + "/config.snapshot does not match the recorded config digest");
  }

  const std::string records_path = dir + "/records.ndjson";
  std::istringstream records(detail::read_file(records_path, kModule));
  std::string line;
  while (std::getline(records, line)) {
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      check_version(records_path, std::to_string(j.at("schema_version").get<int>()));
      r.records.push_back(record_from(j));
    } catch (const json::exception& e) {
      malformed(records_path, e.what());
    }
  }

  std::istringstream metrics(detail::read_file(dir + "/metrics.csv", kModule));
  r.metrics = read_metrics_csv(metrics);

  const std::string th_path = dir + "/thresholds.csv";
  for (const auto& c : read_table(th_path, kThresholdHeader, 8)) {
    r.thresholds.push_back({c[1], c[2], c[3], to_double(th_path, c[4]), to_double(th_path, c[5]),
                            to_double(th_path, c[6]), to_size(th_path, c[7])});
  }
  const std::string tm_path = dir + "/transfer_matrix.csv";
  for (const auto& c : read_table(tm_path, kTransferHeader, 8)) {
    r.transfer.push_back({c[1], c[2], c[3] == "1", to_double(tm_path, c[4]),
                          to_double(tm_path, c[5]), to_double(tm_path, c[6]),
                          to_size(tm_path, c[7])});
  }
  return r;
}

void write_sweep(const SweepReport& sweep, const std::string& dir) {
  std::ostringstream csv;
  csv << "schema_version,point,epsilon,epsilon_value,model_id,scope,whitebox,metric,value\n";
  for (std::size_t i = 0; i < sweep.points.size(); ++i) {
    const auto& p = sweep.points[i];
    for (const auto& row : p.report.metrics) {
      csv << kReportSchemaVersion << ',' << i << ',' << p.epsilon.text << ','
          << num(p.epsilon.value) << ',' << row.model_id << ',' << row.scope << ','
          << row.whitebox << ',' << to_string(row.metric) << ',' << num(row.value) << "\n";
    }
    write_report(p.report, dir + "/points/" + std::to_string(i));
  }
  detail::write_file(dir + "/sweep.csv", csv.str(), kModule);
}

}  // namespace fsadv
