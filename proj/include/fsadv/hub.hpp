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


#ifndef FSADV_HUB_HPP_
#define FSADV_HUB_HPP_

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "fsadv/model_zoo.hpp"

namespace fsadv {

// Parameters of a small dense encoder stored in the "fsadv-mlp-v1" format:
//   features  = W2 tanh(W1 x + b1) + b2
//   projected = normalize(P features)
// Class prototypes, when present, form the text tower as a lookup table.
struct MlpWeights {
  Shape input_shape;
  int hidden = 0;
  int feature_dim = 0;
  int embed_dim = 0;
  std::vector<double> w1, b1, w2, b2, proj;  // row-major
  std::vector<std::string> class_names;
  std::vector<double> prototypes;  // class_names.size() x embed_dim

  // Seeded Gaussian weights for tests and fixtures.
  static MlpWeights random(Shape input, int hidden, int feature_dim, int embed_dim,
                           std::vector<std::string> class_names, std::uint64_t seed);
  void validate() const;
};

std::string serialize_mlp(const MlpWeights& weights);
MlpWeights deserialize_mlp(std::string_view bytes);

class MlpBundle final : public EncoderBundle {
 public:
  MlpBundle(MlpWeights weights, std::string id);

  const BundleInfo& info() const override { return info_; }
  Encoding forward(const ImageTensor& x) const override;
  GradTensor backward(const ImageTensor& x, const Encoding& enc,
                      std::span<const double> d_features,
                      std::span<const double> d_projected) const override;
  std::vector<double> text_embedding(std::string_view prompt) const override;
  std::vector<std::string> class_names() const override { return weights_.class_names; }

 private:
  std::vector<double> hidden_pre(const ImageTensor& x) const;

  MlpWeights weights_;
  BundleInfo info_;
};

// Manifest served at <url>/models/<id>/manifest.json and stored next to the
// cached weights.
struct HubManifest {
  std::string model_id;
  std::string format = "fsadv-mlp-v1";
  std::string digest;  // SHA-256 of the weights file
  std::string weights_file = "weights.bin";

  std::string to_json() const;
  static HubManifest from_json(const std::string& text);
};

// Downloads into cache_dir/<model_id>/<digest>/{weights.bin,manifest.json}.
// Downloads of one model id are serialized within the process.
class HubClient {
 public:
  HubClient(std::string base_url, std::string cache_dir);

  // Reads FSADV_HUB_URL and FSADV_CACHE_DIR; explicit arguments win when
  // nonempty.
  static HubClient from_env(const std::string& base_url = "",
                            const std::string& cache_dir = "");

  // Directory holding a verified copy of the model. A warm cache makes no
  // network calls. Throws kNotFound, kIntegrity (after evicting the entry) or
  // kNetwork.
  std::string fetch(const std::string& model_id) const;
  // Cached directory if present and verified, else empty. Never networks.
  std::string cached(const std::string& model_id) const;

  const std::string& base_url() const { return base_url_; }
  const std::string& cache_dir() const { return cache_dir_; }
  // Number of HTTP requests issued by this client.
  int requests() const;

 private:
  std::string base_url_;
  std::string cache_dir_;
  std::shared_ptr<std::atomic<int>> requests_;
};

// Fetches through the hub and wraps the weights; the bundle id is
// "<model_id>@<first 12 digest hex digits>".
BundlePtr load_external_bundle(const std::string& model_id, const HubClient& hub);

}  // namespace fsadv

#endif  // FSADV_HUB_HPP_
