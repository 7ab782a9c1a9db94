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


#ifndef FSADV_OOD_HPP_
#define FSADV_OOD_HPP_

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fsadv {

enum class DetectorKind { kMcm, kMsp };

const char* to_string(DetectorKind kind);
DetectorKind parse_detector(std::string_view text);

struct DetectorConfig {
  DetectorKind kind = DetectorKind::kMcm;
  double temperature = 1.0;  // MCM only

  void validate() const;
  std::string label() const;  // "mcm@T=1" or "msp"
};

// Scores at or above the threshold count as in-distribution.
struct ThresholdPolicy {
  double tpr_target = 0.95;

  void validate() const;
};

// max_k softmax(sims / temperature)_k
double mcm_score(std::span<const double> sims, double temperature = 1.0);

// Largest entry of a probability vector. Throws kValidation when the entries
// are negative or do not sum to 1 within 1e-6.
double msp_score(std::span<const double> probs);

// Dispatches on the detector kind; head_scores are cosine similarities for
// MCM and probabilities for MSP.
double ood_score(const DetectorConfig& detector, std::span<const double> head_scores);

// Linearly interpolated (1 - tpr_target) quantile of the clean scores,
// lowered when needed so that at least ceil(tpr_target * n) scores lie at or
// above it. Fewer than 20 scores appends a warning.
double tpr95_threshold(std::span<const double> clean_scores,
                       const ThresholdPolicy& policy = {},
                       std::vector<std::string>* warnings = nullptr);

// Fraction of scores >= tau.
double true_positive_rate(std::span<const double> scores, double tau);

}  // namespace fsadv

#endif  // FSADV_OOD_HPP_
