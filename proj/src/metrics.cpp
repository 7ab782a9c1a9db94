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


#include "fsadv/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "fsadv/errors.hpp"
#include "file_util.hpp"

namespace fsadv {

namespace {

constexpr char kModule[] = "metrics";
constexpr char kHeader[] =
    "schema_version,metric,value,n_pos,n_neg,threshold,model_id,head,detector,"
    "attack_config_digest,scope,whitebox";

void require_nonempty(std::span<const double> v, const char* what) {
  if (v.empty()) throw Error(ErrorKind::kValidation, kModule, std::string(what) + " is empty");
}

double fraction_equal(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::kValidation, kModule,
                "length mismatch: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  if (a.empty()) throw Error(ErrorKind::kValidation, kModule, "empty prediction list");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < a.size(); ++i) hits += a[i] == b[i];
  return static_cast<double>(hits) / static_cast<double>(a.size());
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

void check_cell(const std::string& text, const char* column) {
  if (text.find_first_of(",\n\r") != std::string::npos) {
    throw Error(ErrorKind::kValidation, kModule,
                std::string(column) + " contains a separator: '" + text + "'");
  }
}

}  // namespace

const char* to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::kAcc: return "acc";
    case MetricKind::kAuroc: return "auroc";
    case MetricKind::kFnr95: return "fnr95";
    case MetricKind::kFpr95: return "fpr95";
    case MetricKind::kTsuc: return "tsuc";
  }
  return "?";
}

MetricKind parse_metric(std::string_view text) {
  for (MetricKind k : {MetricKind::kAcc, MetricKind::kAuroc, MetricKind::kFnr95,
                       MetricKind::kFpr95, MetricKind::kTsuc}) {
    if (text == to_string(k)) return k;
  }
  throw Error(ErrorKind::kValidation, kModule, "unknown metric '" + std::string(text) + "'");
}

double auroc(std::span<const double> pos_scores, std::span<const double> neg_scores) {
  require_nonempty(pos_scores, "positive score list");
  require_nonempty(neg_scores, "negative score list");
  struct Item {
    double score;
    bool pos;
  };
  std::vector<Item> all;
  all.reserve(pos_scores.size() + neg_scores.size());
  for (double s : pos_scores) all.push_back({s, true});
  for (double s : neg_scores) all.push_back({s, false});
  std::sort(all.begin(), all.end(), [](const Item& a, const Item& b) { return a.score < b.score; });
  // Sum of positive ranks with mid-ranks for tied groups; ranks kept doubled
  // so that every quantity is an integer until the final division.
  long double doubled_rank_sum = 0.0L;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    std::size_t pos_in_group = 0;
    while (j < all.size() && all[j].score == all[i].score) {
      pos_in_group += all[j].pos;
      ++j;
    }
    // ranks i+1 .. j, doubled mid-rank = i + 1 + j
    doubled_rank_sum += static_cast<long double>(pos_in_group) * static_cast<long double>(i + 1 + j);
    i = j;
  }
  const auto n = static_cast<long double>(pos_scores.size());
  const auto m = static_cast<long double>(neg_scores.size());
  const long double u = doubled_rank_sum / 2.0L - n * (n + 1.0L) / 2.0L;
  return static_cast<double>(u / (n * m));
}

double fnr_at_threshold(std::span<const double> scores, double tau) {
  require_nonempty(scores, "score list");
  const auto below = std::count_if(scores.begin(), scores.end(), [tau](double s) { return s < tau; });
  return static_cast<double>(below) / static_cast<double>(scores.size());
}

double fpr_at_threshold(std::span<const double> scores, double tau) {
  require_nonempty(scores, "score list");
  const auto above = std::count_if(scores.begin(), scores.end(), [tau](double s) { return s >= tau; });
  return static_cast<double>(above) / static_cast<double>(scores.size());
}

double accuracy(std::span<const int> predictions, std::span<const int> labels) {
  return fraction_equal(predictions, labels);
}

double targeted_success(std::span<const int> predictions, std::span<const int> targets) {
  return fraction_equal(predictions, targets);
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricRow>& rows) {
  out << kHeader << "\n";
  for (const auto& r : rows) {
    check_cell(r.model_id, "model_id");
    check_cell(r.head, "head");
    check_cell(r.detector, "detector");
    check_cell(r.scope, "scope");
    check_cell(r.whitebox, "whitebox");
    out << kMetricsSchemaVersion << ',' << to_string(r.metric) << ','
        << detail::format_double(r.value) << ',' << r.n_pos << ',' << r.n_neg << ','
        << (r.threshold ? detail::format_double(*r.threshold) : "") << ',' << r.model_id << ','
        << r.head << ',' << r.detector << ',' << r.attack_config_digest << ',' << r.scope << ','
        << r.whitebox << "\n";
  }
}

std::vector<MetricRow> read_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::kIo, kModule, "metrics CSV is empty");
  if (line != kHeader) {
    throw Error(ErrorKind::kMigration, kModule,
                "metrics CSV header does not match schema_version " +
                    std::to_string(kMetricsSchemaVersion));
  }
  std::vector<MetricRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 12) {
      throw Error(ErrorKind::kIo, kModule, "metrics CSV row has " +
                                               std::to_string(cells.size()) + " cells");
    }
    if (cells[0] != std::to_string(kMetricsSchemaVersion)) {
      throw Error(ErrorKind::kMigration, kModule,
                  "metrics row schema_version " + cells[0] + ", expected " +
                      std::to_string(kMetricsSchemaVersion));
    }
    MetricRow r;
    try {
      r.metric = parse_metric(cells[1]);
      r.value = std::stod(cells[2]);
      r.n_pos = std::stoull(cells[3]);
      r.n_neg = std::stoull(cells[4]);
      if (!cells[5].empty()) r.threshold = std::stod(cells[5]);
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::kIo, kModule, "malformed metrics row: " + line);
    }
    r.model_id = cells[6];
    r.head = cells[7];
    r.detector = cells[8];
    r.attack_config_digest = cells[9];
    r.scope = cells[10];
    r.whitebox = cells[11];
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace fsadv
