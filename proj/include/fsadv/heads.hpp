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

#ifndef FSADV_HEADS_HPP_
#define FSADV_HEADS_HPP_

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fsadv/model_zoo.hpp"

namespace fsadv {

enum class HeadScheme { kZeroShot, kProbe, kKnn };

const char* to_string(HeadScheme scheme);
HeadScheme parse_head_scheme(std::string_view text);

using Matrix = std::vector<std::vector<double>>;

struct Prediction {
  int class_index = 0;
  // Cosine similarities for zero-shot heads, a probability simplex otherwise.
  std::vector<double> scores;
};

// Index of the largest entry; the lowest index wins ties.
int argmax(std::span<const double> values);

// Common interface the harness scores through. Heads are immutable once
// built and safe to share between threads.
class Head {
 public:
  virtual ~Head() = default;
  virtual HeadScheme scheme() const = 0;
  virtual int num_classes() const = 0;
  virtual Prediction predict(const Encoding& enc) const = 0;
  // Digest of the parameters and the data they came from.
  virtual std::string fingerprint() const = 0;
};

using HeadPtr = std::shared_ptr<const Head>;

class ZeroShotHead final : public Head {
 public:
  // Rows must be unit norm within 1e-6.
  ZeroShotHead(Matrix prototypes, std::vector<std::string> class_names,
               double temperature = 1.0);
  // Prototypes are the bundle's text embeddings of the formatted prompts.
  static ZeroShotHead from_bundle(const EncoderBundle& bundle,
                                  const std::vector<std::string>& class_names,
                                  double temperature = 1.0);

  HeadScheme scheme() const override { return HeadScheme::kZeroShot; }
  int num_classes() const override { return static_cast<int>(prototypes_.size()); }
  Prediction predict(const Encoding& enc) const override;
  std::string fingerprint() const override;

  // Cosine against each prototype. The input need not be normalized; a zero
  // vector scores 0 everywhere.
  Prediction predict_projected(std::span<const double> projected) const;

  const Matrix& prototypes() const { return prototypes_; }
  const std::vector<std::string>& class_names() const { return class_names_; }
  double temperature() const { return temperature_; }

 private:
  Matrix prototypes_;
  std::vector<std::string> class_names_;
  double temperature_;
};

struct ProbeOptions {
  // Penalty on the weight matrix; unset means 1/N.
  std::optional<double> l2_strength;
  int max_iter = 1000;
  double tolerance = 1e-6;
};

class LinearProbeHead final : public Head {
 public:
  LinearProbeHead(Matrix weights, std::vector<double> bias, double l2_strength,
                  std::string trained_on);

  HeadScheme scheme() const override { return HeadScheme::kProbe; }
  int num_classes() const override { return static_cast<int>(weights_.size()); }
  Prediction predict(const Encoding& enc) const override;
  std::string fingerprint() const override;

  // softmax(W f + b)
  std::vector<double> predict_proba(std::span<const double> features) const;

  const Matrix& weights() const { return weights_; }
  const std::vector<double>& bias() const { return bias_; }
  double l2_strength() const { return l2_strength_; }
  const std::string& trained_on() const { return trained_on_; }

  // Fit diagnostics, not part of the parameters.
  int iterations = 0;
  double gradient_norm = 0.0;
  bool converged = false;
  std::vector<std::string> warnings;

 private:
  Matrix weights_;
  std::vector<double> bias_;
  double l2_strength_;
  std::string trained_on_;
};

// Multinomial logistic regression minimizing mean cross-entropy plus
// (l2/2)|W|^2 with damped Newton steps. The bias is unpenalized; its
// softmax gauge is fixed by keeping it zero-mean.
LinearProbeHead fit_linear_probe(const Matrix& features,
                                 const std::vector<int>& labels, int num_classes,
                                 const ProbeOptions& options = {});

// Objective and its gradient (W row-major, then b) at given parameters.
struct ProbeObjective {
  double value = 0.0;
  std::vector<double> gradient;
};
ProbeObjective probe_objective(const LinearProbeHead& head, const Matrix& features,
                               const std::vector<int>& labels);

enum class KnnMetric { kCosine, kEuclidean };
const char* to_string(KnnMetric metric);
KnnMetric parse_knn_metric(std::string_view text);

// Which encoder output a kNN head indexes.
enum class FeatureSpace { kFeatures, kProjected };

class KnnHead final : public Head {
 public:
  KnnHead(Matrix bank, std::vector<int> labels, int num_classes, int k = 5,
          KnnMetric metric = KnnMetric::kEuclidean,
          FeatureSpace space = FeatureSpace::kFeatures);

  HeadScheme scheme() const override { return HeadScheme::kKnn; }
  int num_classes() const override { return num_classes_; }
  Prediction predict(const Encoding& enc) const override;
  std::string fingerprint() const override;

  // Neighbor vote fractions; bank ties resolve toward the lower row index.
  std::vector<double> predict_proba(std::span<const double> query) const;
  // Bank indices of the k nearest rows, nearest first.
  std::vector<int> neighbors(std::span<const double> query) const;
  // 1 - cosine, or squared euclidean distance.
  double distance(std::span<const double> a, std::span<const double> b) const;

  int k() const { return k_; }
  KnnMetric metric() const { return metric_; }
  FeatureSpace space() const { return space_; }
  const Matrix& bank() const { return bank_; }
  const std::vector<int>& labels() const { return labels_; }

 private:
  Matrix bank_;
  std::vector<int> labels_;
  int num_classes_;
  int k_;
  KnnMetric metric_;
  FeatureSpace space_;
};

// Manifest (head.json) plus a little-endian float64 blob (params.bin).
void write_head(const Head& head, const std::string& dir);
HeadPtr read_head(const std::string& dir);

}  // namespace fsadv

#endif  // FSADV_HEADS_HPP_
