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


#include "fsadv/ood.hpp"

#include <algorithm>
#include <cmath>

#include "fsadv/errors.hpp"
#include "file_util.hpp"

namespace fsadv {

namespace {

constexpr char kModule[] = "ood-detect";

void check_scores(std::span<const double> values, const char* what) {
  if (values.empty()) throw Error(ErrorKind::kValidation, kModule, std::string(what) + " is empty");
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw Error(ErrorKind::kValidation, kModule, std::string(what) + " has a nonfinite entry");
    }
  }
}

}  // namespace

const char* to_string(DetectorKind kind) { return kind == DetectorKind::kMcm ? "mcm" : "msp"; }

DetectorKind parse_detector(std::string_view text) {
  if (text == "mcm" || text == "MCM") return DetectorKind::kMcm;
  if (text == "msp" || text == "MSP") return DetectorKind::kMsp;
  throw Error(ErrorKind::kConfig, kModule,
              "detector.kind: unknown detector '" + std::string(text) + "' (expected mcm or msp)");
}

void DetectorConfig::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw Error(ErrorKind::kConfig, kModule, "detector.temperature: must be positive");
  }
}

std::string DetectorConfig::label() const {
  if (kind == DetectorKind::kMsp) return "msp";
  return "mcm@T=" + detail::format_double(temperature);
}

void ThresholdPolicy::validate() const {
  if (!(tpr_target > 0.0 && tpr_target < 1.0)) {
    throw Error(ErrorKind::kConfig, kModule, "detector.tpr_target: must lie in (0,1)");
  }
}

double mcm_score(std::span<const double> sims, double temperature) {
  check_scores(sims, "similarity vector");
  if (!(temperature > 0.0)) {
    throw Error(ErrorKind::kValidation, kModule, "temperature must be positive");
  }
  const double mx = *std::max_element(sims.begin(), sims.end());
  double z = 0.0;
  for (double s : sims) z += std::exp((s - mx) / temperature);
  return 1.0 / z;
}

double msp_score(std::span<const double> probs) {
  check_scores(probs, "probability vector");
  double sum = 0.0;
  for (double p : probs) {
    if (p < 0.0) throw Error(ErrorKind::kValidation, kModule, "negative probability");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw Error(ErrorKind::kValidation, kModule,
                "probabilities sum to " + detail::format_double(sum) + ", not 1");
  }
  return *std::max_element(probs.begin(), probs.end());
}

double ood_score(const DetectorConfig& detector, std::span<const double> head_scores) {
  return detector.kind == DetectorKind::kMcm ? mcm_score(head_scores, detector.temperature)
                                             : msp_score(head_scores);
}

double tpr95_threshold(std::span<const double> clean_scores, const ThresholdPolicy& policy,
                       std::vector<std::string>* warnings) {
  check_scores(clean_scores, "clean score list");
  policy.validate();
  std::vector<double> s(clean_scores.begin(), clean_scores.end());
  std::sort(s.begin(), s.end());
  const std::size_t n = s.size();
  if (n < 20 && warnings) {
    warnings->push_back("threshold from " + std::to_string(n) +
                        " clean scores; the low quantile is poorly determined");
  }
  const double h = (1.0 - policy.tpr_target) * static_cast<double>(n - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, n - 1);
  const double q = s[lo] + (h - static_cast<double>(lo)) * (s[hi] - s[lo]);
  // Interpolation can land above the order statistic that the target
  // requires, e.g. for n = 204.
  const auto keep = static_cast<std::size_t>(
      std::ceil(policy.tpr_target * static_cast<double>(n) - 1e-9));
  return std::min(q, s[n - std::max<std::size_t>(keep, 1)]);
}

double true_positive_rate(std::span<const double> scores, double tau) {
  check_scores(scores, "score list");
  const auto hits = std::count_if(scores.begin(), scores.end(), [tau](double v) { return v >= tau; });
  return static_cast<double>(hits) / static_cast<double>(scores.size());
}

}  // namespace fsadv
