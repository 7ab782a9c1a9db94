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


#ifndef FSADV_METRICS_HPP_
#define FSADV_METRICS_HPP_

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fsadv {

enum class MetricKind { kAcc, kAuroc, kFnr95, kFpr95, kTsuc };

const char* to_string(MetricKind kind);
MetricKind parse_metric(std::string_view text);

// Mann-Whitney statistic; ties between a positive and a negative score count
// one half. Rank based, O((n + m) log(n + m)).
double auroc(std::span<const double> pos_scores, std::span<const double> neg_scores);

// Fraction of scores strictly below tau.
double fnr_at_threshold(std::span<const double> scores, double tau);
// Fraction of scores at or above tau.
double fpr_at_threshold(std::span<const double> scores, double tau);

double accuracy(std::span<const int> predictions, std::span<const int> labels);
double targeted_success(std::span<const int> predictions, std::span<const int> targets);

struct MetricRow {
  MetricKind metric = MetricKind::kAcc;
  double value = 0.0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
  std::optional<double> threshold;
  std::string model_id;
  std::string head;
  std::string detector;
  std::string attack_config_digest;
  // clean, whitebox, blackbox, blackbox_avg or noise
  std::string scope;
  // Members that generated the perturbations, joined with '+'.
  std::string whitebox;

  friend bool operator==(const MetricRow&, const MetricRow&) = default;
};

inline constexpr int kMetricsSchemaVersion = 1;

// CSV with a header row; doubles use round-trip precision.
void write_metrics_csv(std::ostream& out, const std::vector<MetricRow>& rows);
// Throws kMigration when the schema_version column disagrees.
std::vector<MetricRow> read_metrics_csv(std::istream& in);

}  // namespace fsadv

#endif  // FSADV_METRICS_HPP_
