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


#include "fsadv/hub.hpp"

#include "httplib.h"
#include "json.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <map>
#include <mutex>

#include "fsadv/digest.hpp"
#include "fsadv/errors.hpp"
#include "fsadv/rng.hpp"
#include "file_util.hpp"

namespace fsadv {

namespace {

constexpr char kModule[] = "model-zoo";
constexpr char kMagic[8] = {'F', 'S', 'A', 'D', 'V', 'M', 'L', 'P'};
constexpr std::uint32_t kMlpVersion = 1;

namespace fs = std::filesystem;

class Writer {
 public:
  void u32(std::uint32_t v) { bytes_.append(reinterpret_cast<const char*>(&v), sizeof(v)); }
  void doubles(const std::vector<double>& v) {
    u32(static_cast<std::uint32_t>(v.size()));
    bytes_ += detail::doubles_to_bytes(v);
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes_ += s;
  }
  void raw(const char* p, std::size_t n) { bytes_.append(p, n); }
  std::string take() { return std::move(bytes_); }

 private:
  std::string bytes_;
};

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw Error(ErrorKind::kIntegrity, kModule, "truncated weights file");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v;
    std::memcpy(&v, bytes_.data() + pos_, 4);
    pos_ += 4;
    return v;
  }
  std::vector<double> doubles() {
    const std::size_t n = u32();
    need(n * sizeof(double));
    auto v = detail::bytes_to_doubles(bytes_.substr(pos_, n * sizeof(double)), kModule);
    pos_ += n * sizeof(double);
    return v;
  }
  std::string str() {
    const std::size_t n = u32();
    need(n);
    std::string s(bytes_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::string_view raw(std::size_t n) {
    need(n);
    auto v = bytes_.substr(pos_, n);
    pos_ += n;
    return v;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

void matvec(const std::vector<double>& m, int rows, int cols, std::span<const double> x,
            std::vector<double>& out) {
  out.assign(rows, 0.0);
  for (int r = 0; r < rows; ++r) {
    double s = 0.0;
    const double* row = m.data() + static_cast<std::size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) s += row[c] * x[c];
    out[r] = s;
  }
}

void matvec_t(const std::vector<double>& m, int rows, int cols, std::span<const double> y,
              std::vector<double>& out) {
  out.assign(cols, 0.0);
  for (int r = 0; r < rows; ++r) {
    const double* row = m.data() + static_cast<std::size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) out[c] += row[c] * y[r];
  }
}

std::mutex& model_lock(const std::string& model_id) {
  static std::mutex registry_mutex;
  static std::map<std::string, std::unique_ptr<std::mutex>> locks;
  std::lock_guard<std::mutex> guard(registry_mutex);
  auto& slot = locks[model_id];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

void check_model_id(const std::string& id) {
  if (id.empty()) throw Error(ErrorKind::kConfig, kModule, "models.pool: empty model id");
  const fs::path p(id);
  if (p.is_absolute()) throw Error(ErrorKind::kConfig, kModule, "model id '" + id + "' is a path");
  for (const auto& part : p) {
    if (part == ".." || part == ".") {
      throw Error(ErrorKind::kConfig, kModule, "model id '" + id + "' has relative components");
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------

MlpWeights MlpWeights::random(Shape input, int hidden, int feature_dim, int embed_dim,
                              std::vector<std::string> class_names, std::uint64_t seed) {
  MlpWeights w;
  w.input_shape = input;
  w.hidden = hidden;
  w.feature_dim = feature_dim;
  w.embed_dim = embed_dim;
  RandomStream rng(seed);
  const auto fill = [&rng](std::vector<double>& v, std::size_t n, double scale) {
    v.resize(n);
    for (double& x : v) x = scale * rng.normal();
  };
  const auto in = static_cast<double>(input.size());
  fill(w.w1, static_cast<std::size_t>(hidden) * input.size(), 4.0 / std::sqrt(in));
  fill(w.b1, hidden, 0.1);
  fill(w.w2, static_cast<std::size_t>(feature_dim) * hidden, 1.0 / std::sqrt(hidden));
  fill(w.b2, feature_dim, 0.1);
  fill(w.proj, static_cast<std::size_t>(embed_dim) * feature_dim, 1.0 / std::sqrt(feature_dim));
  w.class_names = std::move(class_names);
  for (std::size_t k = 0; k < w.class_names.size(); ++k) {
    std::vector<double> row;
    fill(row, embed_dim, 1.0);
    double n = 0.0;
    for (double x : row) n += x * x;
    for (double& x : row) x /= std::sqrt(n);
    w.prototypes.insert(w.prototypes.end(), row.begin(), row.end());
  }
  return w;
}

void MlpWeights::validate() const {
  const auto bad = [](const std::string& what) {
    throw Error(ErrorKind::kIntegrity, kModule, "mlp weights: " + what);
  };
  if (!input_shape.valid() || hidden <= 0 || feature_dim <= 0 || embed_dim <= 0) {
    bad("nonpositive dimension");
  }
  if (w1.size() != static_cast<std::size_t>(hidden) * input_shape.size() ||
      b1.size() != static_cast<std::size_t>(hidden) ||
      w2.size() != static_cast<std::size_t>(feature_dim) * hidden ||
      b2.size() != static_cast<std::size_t>(feature_dim) ||
      proj.size() != static_cast<std::size_t>(embed_dim) * feature_dim ||
      prototypes.size() != class_names.size() * embed_dim) {
    bad("array sizes do not match the declared dimensions");
  }
  for (const auto* v : {&w1, &b1, &w2, &b2, &proj, &prototypes}) {
    for (double x : *v) {
      if (!std::isfinite(x)) bad("nonfinite parameter");
    }
  }
}

std::string serialize_mlp(const MlpWeights& w) {
  w.validate();
  Writer out;
  out.raw(kMagic, sizeof(kMagic));
  out.u32(kMlpVersion);
  for (int v : {w.input_shape.channels, w.input_shape.height, w.input_shape.width, w.hidden,
                w.feature_dim, w.embed_dim}) {
    out.u32(static_cast<std::uint32_t>(v));
  }
  out.doubles(w.w1);
  out.doubles(w.b1);
  out.doubles(w.w2);
  out.doubles(w.b2);
  out.doubles(w.proj);
  out.u32(static_cast<std::uint32_t>(w.class_names.size()));
  for (const auto& n : w.class_names) out.str(n);
  out.doubles(w.prototypes);
  return out.take();
}

MlpWeights deserialize_mlp(std::string_view bytes) {
  Reader in(bytes);
  if (in.raw(sizeof(kMagic)) != std::string_view(kMagic, sizeof(kMagic))) {
    throw Error(ErrorKind::kIntegrity, kModule, "not an fsadv-mlp-v1 weights file");
  }
  const std::uint32_t version = in.u32();
  if (version != kMlpVersion) {
    throw Error(ErrorKind::kMigration, kModule,
                "weights format version " + std::to_string(version) + ", expected " +
                    std::to_string(kMlpVersion));
  }
  MlpWeights w;
  w.input_shape.channels = static_cast<int>(in.u32());
  w.input_shape.height = static_cast<int>(in.u32());
  w.input_shape.width = static_cast<int>(in.u32());
  w.hidden = static_cast<int>(in.u32());
  w.feature_dim = static_cast<int>(in.u32());
  w.embed_dim = static_cast<int>(in.u32());
  w.w1 = in.doubles();
  w.b1 = in.doubles();
  w.w2 = in.doubles();
  w.b2 = in.doubles();
  w.proj = in.doubles();
  const std::uint32_t k = in.u32();
  for (std::uint32_t i = 0; i < k; ++i) w.class_names.push_back(in.str());
  w.prototypes = in.doubles();
  if (!in.done()) throw Error(ErrorKind::kIntegrity, kModule, "trailing bytes in weights file");
  w.validate();
  return w;
}

MlpBundle::MlpBundle(MlpWeights weights, std::string id) : weights_(std::move(weights)) {
  weights_.validate();
  info_.id = std::move(id);
  info_.input_shape = weights_.input_shape;
  info_.feature_dim = weights_.feature_dim;
  info_.embed_dim = weights_.embed_dim;
  info_.has_text_tower = !weights_.class_names.empty();
  info_.differentiable = true;
}

std::vector<double> MlpBundle::hidden_pre(const ImageTensor& x) const {
  std::vector<double> a;
  matvec(weights_.w1, weights_.hidden, static_cast<int>(weights_.input_shape.size()), x.data(), a);
  for (int i = 0; i < weights_.hidden; ++i) a[i] += weights_.b1[i];
  return a;
}

Encoding MlpBundle::forward(const ImageTensor& x) const {
  std::vector<double> h = hidden_pre(x);
  for (double& v : h) v = std::tanh(v);
  Encoding enc;
  matvec(weights_.w2, weights_.feature_dim, weights_.hidden, h, enc.features);
  for (int i = 0; i < weights_.feature_dim; ++i) enc.features[i] += weights_.b2[i];
  matvec(weights_.proj, weights_.embed_dim, weights_.feature_dim, enc.features, enc.unnormalized);
  double n = 0.0;
  for (double v : enc.unnormalized) n += v * v;
  n = std::max(std::sqrt(n), 1e-12);
  enc.projected = enc.unnormalized;
  for (double& v : enc.projected) v /= n;
  return enc;
}

GradTensor MlpBundle::backward(const ImageTensor& x, const Encoding& enc,
                               std::span<const double> d_features,
                               std::span<const double> d_projected) const {
  std::vector<double> df(weights_.feature_dim, 0.0);
  if (!d_features.empty()) std::copy(d_features.begin(), d_features.end(), df.begin());
  if (!d_projected.empty()) {
    double n = 0.0;
    for (double v : enc.unnormalized) n += v * v;
    n = std::max(std::sqrt(n), 1e-12);
    double pd = 0.0;
    for (int i = 0; i < weights_.embed_dim; ++i) pd += enc.projected[i] * d_projected[i];
    std::vector<double> du(weights_.embed_dim);
    for (int i = 0; i < weights_.embed_dim; ++i) {
      du[i] = (d_projected[i] - enc.projected[i] * pd) / n;
    }
    std::vector<double> back;
    matvec_t(weights_.proj, weights_.embed_dim, weights_.feature_dim, du, back);
    for (int i = 0; i < weights_.feature_dim; ++i) df[i] += back[i];
  }
  std::vector<double> dh;
  matvec_t(weights_.w2, weights_.feature_dim, weights_.hidden, df, dh);
  const std::vector<double> a = hidden_pre(x);
  for (int i = 0; i < weights_.hidden; ++i) {
    const double t = std::tanh(a[i]);
    dh[i] *= 1.0 - t * t;
  }
  std::vector<double> dx;
  matvec_t(weights_.w1, weights_.hidden, static_cast<int>(weights_.input_shape.size()), dh, dx);
  return GradTensor(weights_.input_shape, std::move(dx));
}

std::vector<double> MlpBundle::text_embedding(std::string_view prompt) const {
  if (!info_.has_text_tower) return EncoderBundle::text_embedding(prompt);
  for (std::size_t k = 0; k < weights_.class_names.size(); ++k) {
    if (format_prompt(weights_.class_names[k]) == prompt) {
      const auto first = weights_.prototypes.begin() + static_cast<std::ptrdiff_t>(k) * weights_.embed_dim;
      return std::vector<double>(first, first + weights_.embed_dim);
    }
  }
  throw Error(ErrorKind::kLookup, kModule,
              info_.id + ": no prototype for prompt '" + std::string(prompt) + "'");
}

// ---------------------------------------------------------------------------

std::string HubManifest::to_json() const {
  nlohmann::json j;
  j["model_id"] = model_id;
  j["format"] = format;
  j["digest"] = digest;
  j["weights"] = weights_file;
  return j.dump(2) + "\n";
}

HubManifest HubManifest::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    HubManifest m;
    m.model_id = j.at("model_id").get<std::string>();
    m.format = j.at("format").get<std::string>();
    m.digest = j.at("digest").get<std::string>();
    m.weights_file = j.at("weights").get<std::string>();
    if (m.weights_file.find('/') != std::string::npos || m.weights_file.empty() ||
        m.weights_file == "..") {
      throw Error(ErrorKind::kIntegrity, kModule, "manifest names an invalid weights file");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kIntegrity, kModule, std::string("malformed manifest: ") + e.what());
  }
}

HubClient::HubClient(std::string base_url, std::string cache_dir)
    : base_url_(std::move(base_url)),
      cache_dir_(std::move(cache_dir)),
      requests_(std::make_shared<std::atomic<int>>(0)) {
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
}

HubClient HubClient::from_env(const std::string& base_url, const std::string& cache_dir) {
  const char* env_url = std::getenv("FSADV_HUB_URL");
  const char* env_cache = std::getenv("FSADV_CACHE_DIR");
  std::string url = !base_url.empty() ? base_url : (env_url ? env_url : "");
  std::string cache = !cache_dir.empty() ? cache_dir : (env_cache ? env_cache : "");
  if (cache.empty()) {
    const char* home = std::getenv("HOME");
    cache = std::string(home ? home : ".") + "/.cache/fsadv";
  }
  return HubClient(std::move(url), std::move(cache));
}

int HubClient::requests() const { return requests_->load(); }

std::string HubClient::cached(const std::string& model_id) const {
  check_model_id(model_id);
  const fs::path root = fs::path(cache_dir_) / model_id;
  std::error_code ec;
  if (!fs::is_directory(root, ec)) return {};
  std::vector<fs::path> entries;
  for (const auto& e : fs::directory_iterator(root, ec)) {
    if (e.is_directory() && fs::exists(e.path() / "manifest.json")) entries.push_back(e.path());
  }
  std::sort(entries.begin(), entries.end());
  for (const auto& dir : entries) {
    HubManifest m;
    std::string weights_digest;
    try {
      m = HubManifest::from_json(detail::read_file((dir / "manifest.json").string(), kModule));
      weights_digest = sha256_file((dir / m.weights_file).string());
    } catch (const Error&) {
      weights_digest.clear();
    }
    if (weights_digest.empty() || weights_digest != m.digest ||
        dir.filename().string() != m.digest) {
      fs::remove_all(dir, ec);
      throw Error(ErrorKind::kIntegrity, kModule,
                  "cached copy of '" + model_id + "' failed verification; entry evicted");
    }
    return dir.string();
  }
  return {};
}

std::string HubClient::fetch(const std::string& model_id) const {
  check_model_id(model_id);
  std::lock_guard<std::mutex> guard(model_lock(model_id));
  if (std::string dir = cached(model_id); !dir.empty()) return dir;
  if (base_url_.empty()) {
    throw Error(ErrorKind::kNetwork, kModule,
                "'" + model_id + "' is not cached and no hub URL is configured (FSADV_HUB_URL)");
  }
  httplib::Client client(base_url_);
  client.set_connection_timeout(5);
  client.set_read_timeout(60);
  const auto get = [&](const std::string& path) {
    ++*requests_;
    auto res = client.Get(path);
    if (!res) {
      throw Error(ErrorKind::kNetwork, kModule,
                  "GET " + base_url_ + path + " failed: " + httplib::to_string(res.error()));
    }
    if (res->status == 404) {
      throw Error(ErrorKind::kNotFound, kModule, "hub has no model '" + model_id + "'");
    }
    if (res->status != 200) {
      throw Error(ErrorKind::kNetwork, kModule,
                  "GET " + base_url_ + path + " returned HTTP " + std::to_string(res->status));
    }
    return res->body;
  };
  const std::string prefix = "/models/" + model_id + "/";
  const HubManifest manifest = HubManifest::from_json(get(prefix + "manifest.json"));
  if (manifest.model_id != model_id) {
    throw Error(ErrorKind::kIntegrity, kModule,
                "hub manifest names '" + manifest.model_id + "', expected '" + model_id + "'");
  }
  const std::string weights = get(prefix + manifest.weights_file);
  const std::string actual = sha256_hex(weights);
  if (actual != manifest.digest) {
    throw Error(ErrorKind::kIntegrity, kModule,
                "download of '" + model_id + "' has digest " + actual + ", manifest says " +
                    manifest.digest);
  }
  const fs::path final_dir = fs::path(cache_dir_) / model_id / manifest.digest;
  const fs::path staging = fs::path(cache_dir_) / model_id / (".staging-" + manifest.digest);
  std::error_code ec;
  fs::remove_all(staging, ec);
  detail::write_file((staging / manifest.weights_file).string(), weights, kModule);
  detail::write_file((staging / "manifest.json").string(), manifest.to_json(), kModule);
  fs::remove_all(final_dir, ec);
  fs::rename(staging, final_dir, ec);
  if (ec) throw Error(ErrorKind::kIo, kModule, "cannot populate cache entry " + final_dir.string());
  return final_dir.string();
}

BundlePtr load_external_bundle(const std::string& model_id, const HubClient& hub) {
  const std::string dir = hub.fetch(model_id);
  const HubManifest m = HubManifest::from_json(detail::read_file(dir + "/manifest.json", kModule));
  if (m.format != "fsadv-mlp-v1") {
    throw Error(ErrorKind::kUnsupported, kModule,
                "'" + model_id + "' uses format '" + m.format + "', which has no adapter");
  }
  MlpWeights w = deserialize_mlp(detail::read_file(dir + "/" + m.weights_file, kModule));
  return std::make_shared<MlpBundle>(std::move(w), model_id + "@" + m.digest.substr(0, 12));
}

}  // namespace fsadv
