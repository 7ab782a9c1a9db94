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


#include "fsadv/heads.hpp"

#include <Eigen/Dense>
#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "fsadv/digest.hpp"
#include "fsadv/errors.hpp"
#include "file_util.hpp"

namespace fsadv {

namespace {

constexpr char kModule[] = "heads";
constexpr char kHeadFormat[] = "fsadv-head-v1";

[[noreturn]] void invalid(const std::string& what) {
  throw Error(ErrorKind::kValidation, kModule, what);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void softmax_inplace(std::vector<double>& z) {
  const double mx = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : z) v /= sum;
}

std::size_t check_matrix(const Matrix& m, const std::string& name) {
  if (m.empty()) invalid(name + " is empty");
  const std::size_t cols = m.front().size();
  if (cols == 0) invalid(name + " has zero columns");
  for (const auto& row : m) {
    if (row.size() != cols) invalid(name + " rows have different lengths");
    for (double v : row) {
      if (!std::isfinite(v)) invalid(name + " has a nonfinite entry");
    }
  }
  return cols;
}

std::vector<double> flatten(const Matrix& m) {
  std::vector<double> out;
  for (const auto& row : m) out.insert(out.end(), row.begin(), row.end());
  return out;
}

Matrix unflatten(std::span<const double> flat, std::size_t rows, std::size_t cols) {
  Matrix m(rows, std::vector<double>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(flat.begin() + r * cols, cols, m[r].begin());
  }
  return m;
}

std::string digest_of(std::string_view kind, const std::vector<double>& params,
                      const std::string& extra) {
  return sha256_hex(std::string(kind) + "|" + sha256_hex(params) + "|" + extra);
}

}  // namespace

const char* to_string(HeadScheme scheme) {
  switch (scheme) {
    case HeadScheme::kZeroShot: return "zeroshot";
    case HeadScheme::kProbe: return "probe";
    case HeadScheme::kKnn: return "knn";
  }
  return "?";
}

HeadScheme parse_head_scheme(std::string_view text) {
  if (text == "zeroshot") return HeadScheme::kZeroShot;
  if (text == "probe") return HeadScheme::kProbe;
  if (text == "knn") return HeadScheme::kKnn;
  throw Error(ErrorKind::kConfig, kModule,
              "head.scheme: unknown head '" + std::string(text) +
                  "' (expected zeroshot, probe or knn)");
}

int argmax(std::span<const double> values) {
  int best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = static_cast<int>(i);
  }
  return best;
}

// ---------------------------------------------------------------------------

ZeroShotHead::ZeroShotHead(Matrix prototypes, std::vector<std::string> class_names,
                           double temperature)
    : prototypes_(std::move(prototypes)),
      class_names_(std::move(class_names)),
      temperature_(temperature) {
  check_matrix(prototypes_, "prototypes");
  if (class_names_.size() != prototypes_.size()) {
    invalid("need one class name per prototype");
  }
  if (!(temperature_ > 0.0)) invalid("temperature must be positive");
  for (const auto& row : prototypes_) {
    if (std::abs(std::sqrt(dot(row, row)) - 1.0) > 1e-6) {
      invalid("prototype rows must be unit norm");
    }
  }
}

ZeroShotHead ZeroShotHead::from_bundle(const EncoderBundle& bundle,
                                       const std::vector<std::string>& class_names,
                                       double temperature) {
  Matrix protos;
  for (const auto& name : class_names) {
    protos.push_back(encode_text(bundle, format_prompt(name)));
  }
  return ZeroShotHead(std::move(protos), class_names, temperature);
}

Prediction ZeroShotHead::predict(const Encoding& enc) const {
  return predict_projected(enc.projected);
}

Prediction ZeroShotHead::predict_projected(std::span<const double> projected) const {
  if (projected.size() != prototypes_.front().size()) {
    invalid("embedding size " + std::to_string(projected.size()) +
            " does not match prototypes of size " +
            std::to_string(prototypes_.front().size()));
  }
  const double norm = std::sqrt(dot(projected, projected));
  Prediction p;
  p.scores.reserve(prototypes_.size());
  for (const auto& row : prototypes_) {
    p.scores.push_back(norm > 0.0 ? dot(row, projected) / norm : 0.0);
  }
  p.class_index = argmax(p.scores);
  return p;
}

std::string ZeroShotHead::fingerprint() const {
  std::string names;
  for (const auto& n : class_names_) names += n + ",";
  return digest_of("zeroshot", flatten(prototypes_),
                   names + detail::format_double(temperature_));
}

// ---------------------------------------------------------------------------

LinearProbeHead::LinearProbeHead(Matrix weights, std::vector<double> bias,
                                 double l2_strength, std::string trained_on)
    : weights_(std::move(weights)),
      bias_(std::move(bias)),
      l2_strength_(l2_strength),
      trained_on_(std::move(trained_on)) {
  check_matrix(weights_, "weights");
  if (bias_.size() != weights_.size()) invalid("bias length must equal class count");
  for (double b : bias_) {
    if (!std::isfinite(b)) invalid("bias has a nonfinite entry");
  }
  if (!(l2_strength_ >= 0.0)) invalid("l2_strength must be nonnegative");
}

std::vector<double> LinearProbeHead::predict_proba(std::span<const double> features) const {
  if (features.size() != weights_.front().size()) {
    invalid("feature size " + std::to_string(features.size()) + " does not match probe input " +
            std::to_string(weights_.front().size()));
  }
  std::vector<double> z(weights_.size());
  for (std::size_t k = 0; k < z.size(); ++k) z[k] = dot(weights_[k], features) + bias_[k];
  softmax_inplace(z);
  return z;
}

Prediction LinearProbeHead::predict(const Encoding& enc) const {
  Prediction p;
  p.scores = predict_proba(enc.features);
  p.class_index = argmax(p.scores);
  return p;
}

std::string LinearProbeHead::fingerprint() const {
  std::vector<double> params = flatten(weights_);
  params.insert(params.end(), bias_.begin(), bias_.end());
  return digest_of("probe", params, detail::format_double(l2_strength_) + "|" + trained_on_);
}

namespace {

struct ProbeProblem {
  const Matrix& x;
  const std::vector<int>& y;
  int k;
  int d;
  double l2;

  // theta layout: class-major blocks of (d weights, 1 bias).
  int block() const { return d + 1; }
  int size() const { return k * block(); }

  double logits(const Eigen::VectorXd& theta, std::size_t i, Eigen::VectorXd& p) const {
    for (int c = 0; c < k; ++c) {
      double z = theta[c * block() + d];
      for (int j = 0; j < d; ++j) z += theta[c * block() + j] * x[i][j];
      p[c] = z;
    }
    const double mx = p.maxCoeff();
    double sum = 0.0;
    for (int c = 0; c < k; ++c) sum += std::exp(p[c] - mx);
    const double lse = mx + std::log(sum);
    const double zy = p[y[i]];
    for (int c = 0; c < k; ++c) p[c] = std::exp(p[c] - lse);
    return lse - zy;  // cross-entropy of sample i
  }

  double penalty(const Eigen::VectorXd& theta) const {
    double s = 0.0;
    for (int c = 0; c < k; ++c) {
      for (int j = 0; j < d; ++j) s += theta[c * block() + j] * theta[c * block() + j];
    }
    return 0.5 * l2 * s;
  }

  double value(const Eigen::VectorXd& theta) const {
    Eigen::VectorXd p(k);
    double ce = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) ce += logits(theta, i, p);
    return ce / static_cast<double>(x.size()) + penalty(theta);
  }

  // Gradient, and the Hessian when requested.
  void derivatives(const Eigen::VectorXd& theta, Eigen::VectorXd& g,
                   Eigen::MatrixXd* h) const {
    const double inv_n = 1.0 / static_cast<double>(x.size());
    const int b = block();
    g.setZero(size());
    if (h) h->setZero(size(), size());
    Eigen::VectorXd p(k);
    Eigen::VectorXd xt(b);
    for (std::size_t i = 0; i < x.size(); ++i) {
      logits(theta, i, p);
      for (int j = 0; j < d; ++j) xt[j] = x[i][j];
      xt[d] = 1.0;
      for (int c = 0; c < k; ++c) {
        const double r = p[c] - (c == y[i] ? 1.0 : 0.0);
        g.segment(c * b, b).noalias() += (r * inv_n) * xt;
      }
      if (h) {
        const Eigen::MatrixXd outer = xt * xt.transpose() * inv_n;
        for (int c = 0; c < k; ++c) {
          for (int e = c; e < k; ++e) {
            const double s = (c == e ? p[c] : 0.0) - p[c] * p[e];
            h->block(c * b, e * b, b, b).noalias() += s * outer;
          }
        }
      }
    }
    for (int c = 0; c < k; ++c) {
      for (int j = 0; j < d; ++j) g[c * b + j] += l2 * theta[c * b + j];
    }
    if (h) {
      for (int c = 0; c < k; ++c) {
        for (int e = c + 1; e < k; ++e) {
          h->block(e * b, c * b, b, b) = h->block(c * b, e * b, b, b).transpose();
        }
        for (int j = 0; j < d; ++j) (*h)(c * b + j, c * b + j) += l2;
      }
    }
  }

  void center_bias(Eigen::VectorXd& theta) const {
    double mean = 0.0;
    for (int c = 0; c < k; ++c) mean += theta[c * block() + d];
    mean /= k;
    for (int c = 0; c < k; ++c) theta[c * block() + d] -= mean;
  }
};

}  // namespace

LinearProbeHead fit_linear_probe(const Matrix& features, const std::vector<int>& labels,
                                 int num_classes, const ProbeOptions& options) {
  const std::size_t d = check_matrix(features, "features");
  if (labels.size() != features.size()) invalid("need one label per feature row");
  if (num_classes < 2) invalid("a probe needs at least 2 classes");
  std::set<int> present;
  for (int y : labels) {
    if (y < 0 || y >= num_classes) invalid("label " + std::to_string(y) + " out of range");
    present.insert(y);
  }
  if (present.size() < 2) invalid("training labels contain a single class");
  if (features.size() < static_cast<std::size_t>(num_classes)) {
    invalid("fewer samples than classes");
  }
  const double l2 = options.l2_strength.value_or(1.0 / static_cast<double>(features.size()));
  if (!(l2 >= 0.0) || !std::isfinite(l2)) invalid("l2_strength must be nonnegative");
  if (options.max_iter < 1) invalid("max_iter must be positive");

  const ProbeProblem prob{features, labels, num_classes, static_cast<int>(d), l2};
  const int b = prob.block();
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(prob.size());
  // Pins the all-ones bias direction, along which the loss is flat.
  Eigen::VectorXd gauge = Eigen::VectorXd::Zero(prob.size());
  for (int c = 0; c < num_classes; ++c) gauge[c * b + prob.d] = 1.0;

  Eigen::VectorXd g;
  Eigen::MatrixXd h;
  double f = prob.value(theta);
  std::vector<std::string> warnings;
  int it = 0;
  bool converged = false;
  for (; it < options.max_iter; ++it) {
    prob.derivatives(theta, g, &h);
    if (g.norm() < options.tolerance) {
      converged = true;
      break;
    }
    h.noalias() += gauge * gauge.transpose();
    Eigen::VectorXd step = h.ldlt().solve(-g);
    double slope = g.dot(step);
    if (!step.allFinite() || slope >= 0.0) {
      step = -g;  // fall back to steepest descent
      slope = -g.squaredNorm();
    }
    double t = 1.0;
    Eigen::VectorXd next;
    double f_next = f;
    bool accepted = false;
    for (int halving = 0; halving < 60; ++halving, t *= 0.5) {
      next = theta + t * step;
      f_next = prob.value(next);
      if (std::isfinite(f_next) && f_next <= f + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      warnings.push_back("line search failed at iteration " + std::to_string(it));
      break;
    }
    theta = std::move(next);
    prob.center_bias(theta);
    f = f_next;
  }
  if (!converged) {
    prob.derivatives(theta, g, nullptr);
    if (g.norm() < options.tolerance) {
      converged = true;
    } else {
      warnings.push_back("probe did not converge: gradient norm " +
                         detail::format_double(g.norm()) + " after " +
                         std::to_string(it) + " iterations");
    }
  }

  Matrix w(num_classes, std::vector<double>(d));
  std::vector<double> bias(num_classes);
  for (int c = 0; c < num_classes; ++c) {
    for (std::size_t j = 0; j < d; ++j) w[c][j] = theta[c * b + j];
    bias[c] = theta[c * b + prob.d];
  }
  std::vector<double> fingerprint_data = flatten(features);
  for (int y : labels) fingerprint_data.push_back(y);
  LinearProbeHead head(std::move(w), std::move(bias), l2, sha256_hex(fingerprint_data));
  head.iterations = it;
  head.gradient_norm = g.norm();
  head.converged = converged;
  head.warnings = std::move(warnings);
  return head;
}

ProbeObjective probe_objective(const LinearProbeHead& head, const Matrix& features,
                               const std::vector<int>& labels) {
  const std::size_t d = check_matrix(features, "features");
  const int k = head.num_classes();
  if (d != head.weights().front().size()) invalid("feature size does not match the probe");
  if (labels.size() != features.size()) invalid("need one label per feature row");
  for (int y : labels) {
    if (y < 0 || y >= k) invalid("label " + std::to_string(y) + " out of range");
  }
  const ProbeProblem prob{features, labels, k, static_cast<int>(d), head.l2_strength()};
  const int b = prob.block();
  Eigen::VectorXd theta(prob.size());
  for (int c = 0; c < k; ++c) {
    for (std::size_t j = 0; j < d; ++j) theta[c * b + j] = head.weights()[c][j];
    theta[c * b + prob.d] = head.bias()[c];
  }
  Eigen::VectorXd g;
  prob.derivatives(theta, g, nullptr);
  ProbeObjective out;
  out.value = prob.value(theta);
  for (int c = 0; c < k; ++c) {
    for (std::size_t j = 0; j < d; ++j) out.gradient.push_back(g[c * b + j]);
  }
  for (int c = 0; c < k; ++c) out.gradient.push_back(g[c * b + prob.d]);
  return out;
}

// ---------------------------------------------------------------------------

const char* to_string(KnnMetric metric) {
  return metric == KnnMetric::kCosine ? "cosine" : "euclidean";
}

KnnMetric parse_knn_metric(std::string_view text) {
  if (text == "cosine") return KnnMetric::kCosine;
  if (text == "euclidean") return KnnMetric::kEuclidean;
  throw Error(ErrorKind::kConfig, kModule,
              "head.metric: unknown metric '" + std::string(text) + "'");
}

KnnHead::KnnHead(Matrix bank, std::vector<int> labels, int num_classes, int k,
                 KnnMetric metric, FeatureSpace space)
    : bank_(std::move(bank)),
      labels_(std::move(labels)),
      num_classes_(num_classes),
      k_(k),
      metric_(metric),
      space_(space) {
  if (bank_.empty()) invalid("kNN bank is empty");
  check_matrix(bank_, "bank");
  if (labels_.size() != bank_.size()) invalid("need one label per bank row");
  if (num_classes_ < 1) invalid("num_classes must be positive");
  for (int y : labels_) {
    if (y < 0 || y >= num_classes_) invalid("label " + std::to_string(y) + " out of range");
  }
  if (k_ < 1 || static_cast<std::size_t>(k_) > bank_.size()) {
    invalid("k must lie in [1, bank size]");
  }
}

double KnnHead::distance(std::span<const double> a, std::span<const double> b) const {
  if (metric_ == KnnMetric::kEuclidean) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
  }
  const double na = std::sqrt(dot(a, a));
  const double nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) return 1.0;
  return 1.0 - dot(a, b) / (na * nb);
}

std::vector<int> KnnHead::neighbors(std::span<const double> query) const {
  if (query.size() != bank_.front().size()) {
    invalid("query size " + std::to_string(query.size()) + " does not match bank rows of size " +
            std::to_string(bank_.front().size()));
  }
  std::vector<std::pair<double, int>> dist(bank_.size());
  for (std::size_t i = 0; i < bank_.size(); ++i) {
    dist[i] = {distance(query, bank_[i]), static_cast<int>(i)};
  }
  std::partial_sort(dist.begin(), dist.begin() + k_, dist.end());
  std::vector<int> out(k_);
  for (int i = 0; i < k_; ++i) out[i] = dist[i].second;
  return out;
}

std::vector<double> KnnHead::predict_proba(std::span<const double> query) const {
  std::vector<double> votes(num_classes_, 0.0);
  for (int idx : neighbors(query)) votes[labels_[idx]] += 1.0;
  for (double& v : votes) v /= k_;
  return votes;
}

Prediction KnnHead::predict(const Encoding& enc) const {
  Prediction p;
  p.scores = predict_proba(space_ == FeatureSpace::kProjected ? enc.projected : enc.features);
  p.class_index = argmax(p.scores);
  return p;
}

std::string KnnHead::fingerprint() const {
  std::vector<double> params = flatten(bank_);
  for (int y : labels_) params.push_back(y);
  return digest_of("knn", params,
                   std::to_string(k_) + "|" + to_string(metric_) + "|" +
                       (space_ == FeatureSpace::kProjected ? "projected" : "features"));
}

// ---------------------------------------------------------------------------

void write_head(const Head& head, const std::string& dir) {
  nlohmann::json m;
  m["format"] = kHeadFormat;
  m["kind"] = to_string(head.scheme());
  m["num_classes"] = head.num_classes();
  m["fingerprint"] = head.fingerprint();
  std::vector<double> blob;
  std::size_t rows = 0;
  std::size_t cols = 0;
  if (const auto* z = dynamic_cast<const ZeroShotHead*>(&head)) {
    blob = flatten(z->prototypes());
    rows = z->prototypes().size();
    cols = z->prototypes().front().size();
    m["temperature"] = z->temperature();
    m["class_names"] = z->class_names();
  } else if (const auto* p = dynamic_cast<const LinearProbeHead*>(&head)) {
    blob = flatten(p->weights());
    blob.insert(blob.end(), p->bias().begin(), p->bias().end());
    rows = p->weights().size();
    cols = p->weights().front().size();
    m["l2_strength"] = p->l2_strength();
    m["trained_on"] = p->trained_on();
  } else if (const auto* n = dynamic_cast<const KnnHead*>(&head)) {
    blob = flatten(n->bank());
    for (int y : n->labels()) blob.push_back(y);
    rows = n->bank().size();
    cols = n->bank().front().size();
    m["k"] = n->k();
    m["metric"] = to_string(n->metric());
    m["space"] = n->space() == FeatureSpace::kProjected ? "projected" : "features";
  } else {
    invalid("unknown head type");
  }
  m["rows"] = rows;
  m["cols"] = cols;
  m["blob"] = "params.bin";
  const std::string bytes = detail::doubles_to_bytes(blob);
  m["blob_sha256"] = sha256_hex(bytes);
  std::filesystem::create_directories(dir);
  detail::write_file(dir + "/params.bin", bytes, kModule);
  detail::write_file(dir + "/head.json", m.dump(2) + "\n", kModule);
}

HeadPtr read_head(const std::string& dir) {
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(detail::read_file(dir + "/head.json", kModule));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kIo, kModule, dir + "/head.json: " + e.what());
  }
  try {
    if (m.at("format") != kHeadFormat) {
      throw Error(ErrorKind::kMigration, kModule,
                  "head format '" + m.at("format").get<std::string>() + "', expected '" +
                      kHeadFormat + "'");
    }
    const std::string bytes = detail::read_file(dir + "/" + m.at("blob").get<std::string>(),
                                                kModule);
    if (sha256_hex(bytes) != m.at("blob_sha256").get<std::string>()) {
      throw Error(ErrorKind::kIntegrity, kModule, dir + ": parameter blob digest mismatch");
    }
    const std::vector<double> blob = detail::bytes_to_doubles(bytes, kModule);
    const auto rows = m.at("rows").get<std::size_t>();
    const auto cols = m.at("cols").get<std::size_t>();
    const std::string kind = m.at("kind");
    const auto need = [&](std::size_t n) {
      if (blob.size() != n) {
        throw Error(ErrorKind::kIntegrity, kModule, dir + ": parameter blob has wrong length");
      }
    };
    HeadPtr head;
    const std::span<const double> flat(blob);
    if (kind == "zeroshot") {
      need(rows * cols);
      head = std::make_shared<ZeroShotHead>(unflatten(flat, rows, cols),
                                            m.at("class_names").get<std::vector<std::string>>(),
                                            m.at("temperature").get<double>());
    } else if (kind == "probe") {
      need(rows * cols + rows);
      head = std::make_shared<LinearProbeHead>(
          unflatten(flat, rows, cols),
          std::vector<double>(blob.begin() + rows * cols, blob.end()),
          m.at("l2_strength").get<double>(), m.at("trained_on").get<std::string>());
    } else if (kind == "knn") {
      need(rows * cols + rows);
      std::vector<int> labels;
      for (std::size_t i = rows * cols; i < blob.size(); ++i) {
        labels.push_back(static_cast<int>(blob[i]));
      }
      head = std::make_shared<KnnHead>(
          unflatten(flat, rows, cols), std::move(labels), m.at("num_classes").get<int>(),
          m.at("k").get<int>(), parse_knn_metric(m.at("metric").get<std::string>()),
          m.at("space") == "projected" ? FeatureSpace::kProjected : FeatureSpace::kFeatures);
    } else {
      throw Error(ErrorKind::kIo, kModule, dir + ": unknown head kind '" + kind + "'");
    }
    if (head->fingerprint() != m.at("fingerprint").get<std::string>()) {
      throw Error(ErrorKind::kIntegrity, kModule, dir + ": head fingerprint mismatch");
    }
    return head;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kIo, kModule, dir + "/head.json: " + e.what());
  }
}

}  // namespace fsadv
