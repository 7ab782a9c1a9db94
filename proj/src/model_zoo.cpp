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

#include "fsadv/model_zoo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "fsadv/errors.hpp"
#include "fsadv/image_io.hpp"
#include "fsadv/rng.hpp"

namespace fsadv {

namespace {

constexpr char kModule[] = "model-zoo";
constexpr std::string_view kPromptPrefix = "this is a photo of a ";
const std::vector<std::string> kShapes{"square",  "disk", "triangle", "cross",
                                       "diamond", "ring", "bar"};

double color_distance(const std::array<double, 3>& a,
                      const std::array<double, 3>& b) {
  double s = 0.0;
  for (int i = 0; i < 3; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
  const double c = v * s;
  const double hp = std::fmod(h, 360.0) / 60.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  std::array<double, 3> rgb{};
  const int sector = static_cast<int>(hp);
  switch (sector) {
    case 0: rgb = {c, x, 0}; break;
    case 1: rgb = {x, c, 0}; break;
    case 2: rgb = {0, c, x}; break;
    case 3: rgb = {0, x, c}; break;
    case 4: rgb = {x, 0, c}; break;
    default: rgb = {c, 0, x}; break;
  }
  const double m = v - c;
  for (double& ch : rgb) ch += m;
  return rgb;
}

bool inside_shape(const std::string& shape, double dy, double dx, double r) {
  const double ady = std::abs(dy);
  const double adx = std::abs(dx);
  if (shape == "square") return ady <= r && adx <= r;
  if (shape == "disk") return dy * dy + dx * dx <= 1.27 * r * r;
  if (shape == "triangle") {
    const double top = -1.41 * r;
    const double bottom = 1.41 * r;
    if (dy < top || dy > bottom) return false;
    const double half_width = 1.41 * r * (dy - top) / (bottom - top);
    return adx <= half_width;
  }
  if (shape == "cross") {
    return (ady <= 1.25 * r && adx <= 0.5 * r) || (adx <= 1.25 * r && ady <= 0.5 * r);
  }
  if (shape == "diamond") return ady + adx <= 1.414 * r;
  if (shape == "ring") {
    const double d2 = dy * dy + dx * dx;
    return d2 <= 1.38 * 1.38 * r * r && d2 >= 0.8 * 0.8 * r * r;
  }
  if (shape == "bar") return ady <= 0.45 * r && adx <= 1.5 * r;
  throw Error(ErrorKind::kConfig, kModule, "unknown toy shape '" + shape + "'");
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

void fill_background(ImageTensor& img, double amplitude, RandomStream& rng) {
  for (std::size_t i = 0; i < img.size(); ++i) {
    img[i] = clamp01(0.5 + amplitude * (rng.uniform() - 0.5));
  }
}

void draw_shape(ImageTensor& img, const ToyClass& params, double contrast, double scale,
                RandomStream& rng) {
  const int s = img.shape().height;
  const int jitter = std::max(1, s / 10);
  const double cy = s / 2.0 + rng.uniform_int(-jitter, jitter);
  const double cx = s / 2.0 + rng.uniform_int(-jitter, jitter);
  const double r = s * scale * rng.uniform(0.9, 1.1);
  for (int y = 0; y < s; ++y) {
    for (int x = 0; x < s; ++x) {
      if (!inside_shape(params.shape, y + 0.5 - cy, x + 0.5 - cx, r)) continue;
      for (int c = 0; c < 3; ++c) {
        img.at(c, y, x) = clamp01(0.5 + contrast * (params.color[c] - 0.5) +
                                  0.06 * (rng.uniform() - 0.5));
      }
    }
  }
}

void draw_noise_texture(ImageTensor& img, RandomStream& rng) {
  const int s = img.shape().height;
  if (rng.uniform() < 0.5) {
    // Blocky color noise.
    const int block = std::max(2, s / 8);
    for (int by = 0; by < s; by += block) {
      for (int bx = 0; bx < s; bx += block) {
        std::array<double, 3> col{rng.uniform(), rng.uniform(), rng.uniform()};
        for (int y = by; y < std::min(s, by + block); ++y) {
          for (int x = bx; x < std::min(s, bx + block); ++x) {
            for (int c = 0; c < 3; ++c) img.at(c, y, x) = col[c];
          }
        }
      }
    }
    return;
  }
  // Colored sinusoidal stripes.
  const double theta = rng.uniform(0.0, std::numbers::pi);
  const double freq = rng.uniform(2.0, 6.0) * 2.0 * std::numbers::pi / s;
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  std::array<double, 3> lo{rng.uniform(), rng.uniform(), rng.uniform()};
  std::array<double, 3> hi{rng.uniform(), rng.uniform(), rng.uniform()};
  for (int y = 0; y < s; ++y) {
    for (int x = 0; x < s; ++x) {
      const double t =
          0.5 + 0.5 * std::sin(freq * (std::cos(theta) * x + std::sin(theta) * y) + phase);
      for (int c = 0; c < 3; ++c) {
        img.at(c, y, x) =
            clamp01(lo[c] + t * (hi[c] - lo[c]) + 0.1 * (rng.uniform() - 0.5));
      }
    }
  }
}

std::uint64_t split_tag(Split split) { return static_cast<std::uint64_t>(split) + 1; }

}  // namespace

// ---------------------------------------------------------------------------

std::vector<double> EncoderBundle::text_embedding(std::string_view) const {
  throw Error(ErrorKind::kUnsupported, kModule,
              "bundle '" + info().id + "' has no text tower");
}

std::string format_prompt(std::string_view class_name) {
  if (class_name.empty()) {
    throw Error(ErrorKind::kValidation, kModule, "empty class name");
  }
  std::string name(class_name);
  std::replace(name.begin(), name.end(), '_', ' ');
  return std::string(kPromptPrefix) + name;
}

Encoding encode_image(const EncoderBundle& bundle, const ImageTensor& x) {
  if (x.shape() != bundle.info().input_shape) {
    throw Error(ErrorKind::kConfig, kModule,
                "image shape " + x.shape().str() + " does not match input_shape " +
                    bundle.info().input_shape.str() + " of '" + bundle.info().id + "'");
  }
  return bundle.forward(x);
}

std::vector<double> encode_text(const EncoderBundle& bundle,
                                std::string_view prompt) {
  if (!bundle.info().has_text_tower) {
    throw Error(ErrorKind::kUnsupported, kModule,
                "bundle '" + bundle.info().id + "' has no text tower");
  }
  return bundle.text_embedding(prompt);
}

ValueAndGrad value_and_grad(const EncoderBundle& bundle,
                            const Objective& objective, const ImageTensor& x) {
  const BundleInfo& info = bundle.info();
  if (!info.differentiable) {
    throw Error(ErrorKind::kUnsupported, kModule,
                "bundle '" + info.id + "' is not differentiable");
  }
  if (x.shape() != info.input_shape) {
    throw Error(ErrorKind::kConfig, kModule,
                "image shape " + x.shape().str() + " does not match input_shape " +
                    info.input_shape.str());
  }
  const Encoding enc = bundle.forward(x);
  ObjectiveGrad og{std::vector<double>(enc.features.size(), 0.0),
                   std::vector<double>(enc.projected.size(), 0.0),
                   GradTensor(x.shape())};
  ValueAndGrad out;
  out.value = objective(x, enc, og);
  if (!std::isfinite(out.value)) {
    std::ostringstream msg;
    msg << "nonfinite objective value " << out.value << " on bundle '" << info.id
        << "' (input range [" << x.min() << ", " << x.max() << "])";
    throw Error(ErrorKind::kNumeric, kModule, msg.str());
  }
  out.grad = bundle.backward(x, enc, og.d_features, og.d_projected);
  out.grad += og.d_pixels;
  if (!out.grad.all_finite()) {
    throw Error(ErrorKind::kNumeric, kModule,
                "nonfinite input gradient on bundle '" + info.id + "'");
  }
  return out;
}

// ---------------------------------------------------------------------------

const char* to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
    case Split::kOod: return "ood";
  }
  return "?";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  if (name == "ood") return Split::kOod;
  throw Error(ErrorKind::kValidation, kModule, "unknown split '" + std::string(name) + "'");
}

ToyWorldSpec ToyWorldSpec::make_default(int num_id_classes, int image_size) {
  ToyWorldSpec spec;
  spec.num_id_classes = num_id_classes;
  spec.image_size = image_size;
  const std::vector<ToyClass> base{
      {"salmon_square", "square", {0.95, 0.45, 0.45}},
      {"mint_disk", "disk", {0.45, 0.95, 0.45}},
      {"sky_triangle", "triangle", {0.45, 0.45, 0.95}},
      {"maroon_cross", "cross", {0.70, 0.15, 0.15}},
      {"forest_diamond", "diamond", {0.15, 0.70, 0.15}},
      {"navy_ring", "ring", {0.15, 0.15, 0.70}},
  };
  spec.heldout_colors = {{0.95, 0.60, 0.10}, {0.55, 0.10, 0.75},
                         {0.55, 0.55, 0.10}, {0.10, 0.55, 0.55}};
  for (int k = 0; k < num_id_classes; ++k) {
    if (k < static_cast<int>(base.size())) {
      spec.id_classes.push_back(base[k]);
      continue;
    }
    // Extra classes: golden-angle hues at two lightness levels.
    const double hue = std::fmod(20.0 + 137.5 * k, 360.0);
    const double value = (k % 2 == 0) ? 0.9 : 0.6;
    const std::string shape = kShapes[k % kShapes.size()];
    spec.id_classes.push_back(
        {"hue" + std::to_string(static_cast<int>(hue)) + "_" + shape, shape,
         hsv_to_rgb(hue, 0.8, value)});
  }
  return spec;
}

void ToyWorldSpec::validate() const {
  if (num_id_classes < 2) {
    throw Error(ErrorKind::kConfig, kModule, "task.num_classes must be >= 2");
  }
  if (static_cast<int>(id_classes.size()) != num_id_classes) {
    throw Error(ErrorKind::kConfig, kModule,
                "task.num_classes does not match the palette size");
  }
  if (image_size < 8) {
    throw Error(ErrorKind::kConfig, kModule, "task.image_size must be >= 8");
  }
  if (samples_per_class < 1) {
    throw Error(ErrorKind::kConfig, kModule, "task.samples_per_class must be >= 1");
  }
  if (!(background_noise >= 0.0 && background_noise <= 1.0)) {
    throw Error(ErrorKind::kConfig, kModule, "task.background_noise must lie in [0,1]");
  }
  if (!(object_contrast > 0.0 && object_contrast <= 1.0)) {
    throw Error(ErrorKind::kConfig, kModule, "task.object_contrast must lie in (0,1]");
  }
  if (!(object_scale > 0.0 && object_scale <= 0.5)) {
    throw Error(ErrorKind::kConfig, kModule, "task.object_scale must lie in (0,0.5]");
  }
  for (std::size_t i = 0; i < id_classes.size(); ++i) {
    for (std::size_t j = i + 1; j < id_classes.size(); ++j) {
      if (id_classes[i].name == id_classes[j].name ||
          (id_classes[i].shape == id_classes[j].shape &&
           color_distance(id_classes[i].color, id_classes[j].color) < 1e-9)) {
        throw Error(ErrorKind::kConfig, kModule,
                    "ID classes " + id_classes[i].name + " and " +
                        id_classes[j].name + " share parameters");
      }
    }
    for (const auto& held : heldout_colors) {
      if (color_distance(held, id_classes[i].color) < 0.15) {
        throw Error(ErrorKind::kConfig, kModule,
                    "held-out color overlaps ID class " + id_classes[i].name);
      }
    }
  }
  for (const auto& kind : ood_kinds) {
    if (kind != "noise_texture" && kind != "heldout_pair") {
      throw Error(ErrorKind::kConfig, kModule,
                  "task.ood_kinds: unknown kind '" + kind + "'");
    }
  }
}

std::vector<std::string> ToyWorldSpec::class_names() const {
  std::vector<std::string> names;
  for (const auto& c : id_classes) names.push_back(c.name);
  return names;
}

std::vector<LabeledImage> generate_toy_dataset(const ToyWorldSpec& spec,
                                               Split split, std::uint64_t seed) {
  spec.validate();
  std::vector<LabeledImage> out;
  const Shape shape = spec.image_shape();
  if (split == Split::kOod) {
    const int kinds = static_cast<int>(spec.ood_kinds.size());
    const int total = kinds * spec.samples_per_class;
    for (int i = 0; i < total; ++i) {
      RandomStream rng(derive_seed(seed, {split_tag(split), static_cast<std::uint64_t>(i)}));
      LabeledImage sample{ImageTensor(shape), spec.ood_kinds[i % kinds], -1, std::nullopt};
      if (sample.label == "noise_texture") {
        draw_noise_texture(sample.image, rng);
      } else {
        fill_background(sample.image, spec.background_noise, rng);
        const auto& color = spec.heldout_colors[rng.uniform_int(
            0, static_cast<int>(spec.heldout_colors.size()) - 1)];
        const auto& shp = kShapes[rng.uniform_int(0, static_cast<int>(kShapes.size()) - 1)];
        ToyClass params{"heldout", shp, color};
        draw_shape(sample.image, params, spec.object_contrast, spec.object_scale, rng);
        sample.params = params;
      }
      out.push_back(std::move(sample));
    }
    return out;
  }
  const int k = spec.num_id_classes;
  const int total = k * spec.samples_per_class;
  for (int i = 0; i < total; ++i) {
    RandomStream rng(derive_seed(seed, {split_tag(split), static_cast<std::uint64_t>(i)}));
    const ToyClass& params = spec.id_classes[i % k];
    LabeledImage sample{ImageTensor(shape), params.name, i % k, params};
    fill_background(sample.image, spec.background_noise, rng);
    draw_shape(sample.image, params, spec.object_contrast, spec.object_scale, rng);
    out.push_back(std::move(sample));
  }
  return out;
}

void export_toy_dataset(const ToyWorldSpec& spec, std::uint64_t seed,
                        const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  {
    // Class order is not recoverable from directory names alone.
    std::ofstream classes(fs::path(dir) / "classes.txt", std::ios::trunc);
    for (const auto& name : spec.class_names()) classes << name << "\n";
    if (!classes) throw Error(ErrorKind::kIo, kModule, "cannot write classes.txt under " + dir);
  }
  for (Split split : {Split::kTrain, Split::kVal, Split::kTest, Split::kOod}) {
    const auto samples = generate_toy_dataset(spec, split, seed);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "%06zu.png", i);
      const fs::path path = fs::path(dir) / to_string(split) / samples[i].label / name;
      fs::create_directories(path.parent_path());
      write_png(path.string(), samples[i].image);
    }
  }
}

// ---------------------------------------------------------------------------

bool is_toy_id(std::string_view id) {
  return id.starts_with("toy-") || id.starts_with("toy:") || id == "toy";
}

ToyEncoderConfig toy_preset(std::string_view id) {
  ToyEncoderConfig cfg;
  cfg.id = std::string(id);
  if (id == "toy-a") {
    cfg.seed = 101;
    return cfg;
  }
  if (id == "toy-b") {
    cfg.grid = 2; cfg.embed_dim = 48; cfg.seed = 202; cfg.var_gain = 0.3; cfg.grid_gain = 0.3;
    return cfg;
  }
  if (id == "toy-c") {
    cfg.grid = 8; cfg.seed = 303; cfg.var_gain = 0.8; cfg.grid_gain = 0.04;
    return cfg;
  }
  if (!id.starts_with("toy:")) {
    throw Error(ErrorKind::kNotFound, kModule, "unknown toy bundle '" + cfg.id + "'");
  }
  std::string rest(id.substr(4));
  std::stringstream ss(rest);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::kConfig, kModule, "malformed toy parameter '" + item + "'");
    }
    const std::string key = item.substr(0, eq);
    const std::string value = item.substr(eq + 1);
    try {
      if (key == "grid") cfg.grid = std::stoi(value);
      else if (key == "seed") cfg.seed = std::stoull(value);
      else if (key == "embed") cfg.embed_dim = std::stoi(value);
      else if (key == "mean_gain") cfg.mean_gain = std::stod(value);
      else if (key == "var_gain") cfg.var_gain = std::stod(value);
      else if (key == "grid_gain") cfg.grid_gain = std::stod(value);
      else if (key == "means") cfg.use_means = value != "0";
      else if (key == "vars") cfg.use_vars = value != "0";
      else if (key == "pool") cfg.use_grid = value != "0";
      else
        throw Error(ErrorKind::kConfig, kModule, "unknown toy parameter '" + key + "'");
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::kConfig, kModule, "bad value for toy parameter '" + key + "'");
    }
  }
  return cfg;
}

ToyBundle::ToyBundle(const ToyWorldSpec& world, const ToyEncoderConfig& config)
    : config_(config), class_names_(world.class_names()) {
  world.validate();
  const int size = world.image_size;
  if (config.use_grid && (config.grid < 1 || size % config.grid != 0)) {
    throw Error(ErrorKind::kConfig, kModule,
                "grid " + std::to_string(config.grid) + " must divide image size " +
                    std::to_string(size));
  }
  if (config.embed_dim < 1) {
    throw Error(ErrorKind::kConfig, kModule, "embed_dim must be positive");
  }
  const int feature_dim = (config.use_means ? 3 : 0) + (config.use_vars ? 3 : 0) +
                          (config.use_grid ? config.grid * config.grid : 0);
  if (feature_dim == 0) {
    throw Error(ErrorKind::kConfig, kModule, "toy bundle has no feature groups");
  }
  info_ = BundleInfo{config.id, world.image_shape(), feature_dim, config.embed_dim,
                     true, true, true};

  // Calibration render fixes centering, scale and class centroids.
  ToyWorldSpec calib_world = world;
  calib_world.samples_per_class = config.calibration_per_class;
  const auto calib =
      generate_toy_dataset(calib_world, Split::kTrain, derive_seed(config.seed, {0xCA11}));
  const int k = world.num_id_classes;
  std::vector<std::vector<double>> feats;
  feats.reserve(calib.size());
  for (const auto& s : calib) feats.push_back(raw_features(s.image));

  // Feature scales: group gain over the calibration spread of each feature.
  feature_scale_.assign(feature_dim, 0.0);
  {
    std::vector<double> mu(feature_dim, 0.0);
    for (const auto& f : feats)
      for (int j = 0; j < feature_dim; ++j) mu[j] += f[j];
    for (double& m : mu) m /= static_cast<double>(feats.size());
    for (const auto& f : feats)
      for (int j = 0; j < feature_dim; ++j)
        feature_scale_[j] += (f[j] - mu[j]) * (f[j] - mu[j]);
    int j = 0;
    auto assign = [&](int count, double gain) {
      for (int e = j + count; j < e; ++j) {
        const double sd = std::sqrt(feature_scale_[j] / static_cast<double>(feats.size()));
        feature_scale_[j] = gain / std::max(sd, 1e-6);
      }
    };
    if (config.use_means) assign(3, config.mean_gain);
    if (config.use_vars) assign(3, config.var_gain);
    if (config.use_grid) assign(config.grid * config.grid, config.grid_gain);
  }
  center_.assign(feature_dim, 0.0);
  for (const auto& f : feats)
    for (int j = 0; j < feature_dim; ++j) center_[j] += f[j];
  for (double& c : center_) c /= static_cast<double>(feats.size());
  for (auto& f : feats)
    for (int j = 0; j < feature_dim; ++j) f[j] = (f[j] - center_[j]) * feature_scale_[j];

  RandomStream rng(derive_seed(config.seed, {0xA11}));
  projection_.resize(static_cast<std::size_t>(config.embed_dim) * feature_dim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(feature_dim));
  for (double& w : projection_) w = rng.normal() * scale;

  std::vector<std::vector<double>> centroid(k, std::vector<double>(feature_dim, 0.0));
  std::vector<int> counts(k, 0);
  for (std::size_t i = 0; i < calib.size(); ++i) {
    const int label = calib[i].class_index;
    ++counts[label];
    for (int j = 0; j < feature_dim; ++j) centroid[label][j] += feats[i][j];
  }
  std::vector<std::vector<double>> prototypes;
  for (int c = 0; c < k; ++c) {
    for (double& v : centroid[c]) v /= counts[c];
    std::vector<double> p = project_raw(centroid[c]);
    double n = 0.0;
    for (double v : p) n += v * v;
    n = std::max(std::sqrt(n), 1e-12);
    for (double& v : p) v /= n;
    prompt_table_[format_prompt(class_names_[c])] = p;
    prototypes.push_back(std::move(p));
  }

  // Zero-shot accuracy gate on a held-out validation render.
  const auto val =
      generate_toy_dataset(world, Split::kVal, derive_seed(config.seed, {0x7A1}));
  int correct = 0;
  for (const auto& s : val) {
    const Encoding enc = forward(s.image);
    int best = 0;
    double best_sim = -2.0;
    for (int c = 0; c < k; ++c) {
      double sim = 0.0;
      for (int j = 0; j < config.embed_dim; ++j) sim += enc.projected[j] * prototypes[c][j];
      if (sim > best_sim) {
        best_sim = sim;
        best = c;
      }
    }
    correct += (best == s.class_index);
  }
  validation_accuracy_ = static_cast<double>(correct) / static_cast<double>(val.size());
  if (config.enforce_accuracy_gate && validation_accuracy_ <= 0.9) {
    throw Error(ErrorKind::kBuild, kModule,
                "toy bundle '" + config.id + "' zero-shot accuracy " +
                    std::to_string(validation_accuracy_) +
                    " is not above 0.90; classes not separable");
  }
}

std::vector<double> ToyBundle::features(const ImageTensor& x) const {
  std::vector<double> f = raw_features(x);
  if (!feature_scale_.empty())
    for (std::size_t j = 0; j < f.size(); ++j) f[j] = (f[j] - center_[j]) * feature_scale_[j];
  return f;
}

std::vector<double> ToyBundle::raw_features(const ImageTensor& x) const {
  const Shape& s = x.shape();
  const double n = static_cast<double>(s.plane());
  std::vector<double> f;
  f.reserve(info_.feature_dim);
  std::array<double, 3> mean{};
  std::array<double, 3> sq{};
  for (int c = 0; c < s.channels; ++c) {
    for (double v : x.channel(c)) {
      mean[c] += v;
      sq[c] += v * v;
    }
    mean[c] /= n;
    sq[c] /= n;
  }
  if (config_.use_means)
    for (int c = 0; c < 3; ++c) f.push_back(mean[c]);
  if (config_.use_vars)
    for (int c = 0; c < 3; ++c) f.push_back(sq[c] - mean[c] * mean[c]);
  if (config_.use_grid) {
    const int p = config_.grid;
    const int cell = s.height / p;
    const double denom = static_cast<double>(s.channels) * cell * cell;
    for (int i = 0; i < p; ++i) {
      for (int j = 0; j < p; ++j) {
        double acc = 0.0;
        for (int c = 0; c < s.channels; ++c)
          for (int y = i * cell; y < (i + 1) * cell; ++y)
            for (int xx = j * cell; xx < (j + 1) * cell; ++xx) acc += x.at(c, y, xx);
        f.push_back(acc / denom);
      }
    }
  }
  return f;
}

std::vector<double> ToyBundle::project_raw(std::span<const double> features) const {
  const int fd = info_.feature_dim;
  std::vector<double> u(info_.embed_dim, 0.0);
  for (int r = 0; r < info_.embed_dim; ++r)
    for (int j = 0; j < fd; ++j) u[r] += projection_[r * fd + j] * features[j];
  return u;
}

Encoding ToyBundle::forward(const ImageTensor& x) const {
  Encoding enc;
  enc.features = features(x);
  enc.unnormalized = project_raw(enc.features);
  double n = 0.0;
  for (double v : enc.unnormalized) n += v * v;
  n = std::max(std::sqrt(n), 1e-12);
  enc.projected = enc.unnormalized;
  for (double& v : enc.projected) v /= n;
  return enc;
}

GradTensor ToyBundle::backward(const ImageTensor& x, const Encoding& enc,
                               std::span<const double> d_features,
                               std::span<const double> d_projected) const {
  const int fd = info_.feature_dim;
  std::vector<double> df(fd, 0.0);
  if (!d_features.empty())
    for (int j = 0; j < fd; ++j) df[j] = d_features[j];
  if (!d_projected.empty()) {
    double n = 0.0;
    for (double v : enc.unnormalized) n += v * v;
    n = std::max(std::sqrt(n), 1e-12);
    double dot = 0.0;
    for (int r = 0; r < info_.embed_dim; ++r) dot += enc.projected[r] * d_projected[r];
    for (int r = 0; r < info_.embed_dim; ++r) {
      const double du = (d_projected[r] - enc.projected[r] * dot) / n;
      for (int j = 0; j < fd; ++j) df[j] += projection_[r * fd + j] * du;
    }
  }

  const Shape& s = x.shape();
  const double n = static_cast<double>(s.plane());
  GradTensor grad(s);
  int offset = 0;
  std::array<double, 3> mean{};
  for (int c = 0; c < s.channels; ++c) {
    for (double v : x.channel(c)) mean[c] += v;
    mean[c] /= n;
  }
  for (int j = 0; j < fd; ++j) df[j] *= feature_scale_[j];
  if (config_.use_means) {
    for (int c = 0; c < 3; ++c) {
      const double g = df[offset + c] / n;
      for (double& v : grad.channel(c)) v += g;
    }
    offset += 3;
  }
  if (config_.use_vars) {
    for (int c = 0; c < 3; ++c) {
      const double g = df[offset + c] * 2.0 / n;
      auto out = grad.channel(c);
      auto in = x.channel(c);
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += g * (in[i] - mean[c]);
    }
    offset += 3;
  }
  if (config_.use_grid) {
    const int p = config_.grid;
    const int cell = s.height / p;
    const double denom = static_cast<double>(s.channels) * cell * cell;
    for (int i = 0; i < p; ++i) {
      for (int j = 0; j < p; ++j) {
        const double g = df[offset + i * p + j] / denom;
        for (int c = 0; c < s.channels; ++c)
          for (int y = i * cell; y < (i + 1) * cell; ++y)
            for (int xx = j * cell; xx < (j + 1) * cell; ++xx) grad.at(c, y, xx) += g;
      }
    }
  }
  return grad;
}

std::vector<double> ToyBundle::text_embedding(std::string_view prompt) const {
  auto it = prompt_table_.find(prompt);
  if (it == prompt_table_.end()) {
    throw Error(ErrorKind::kLookup, kModule,
                "no toy class for prompt '" + std::string(prompt) + "'");
  }
  return it->second;
}

std::shared_ptr<const ToyBundle> build_toy_bundle(const ToyWorldSpec& spec,
                                                  std::uint64_t seed) {
  ToyEncoderConfig cfg;
  cfg.seed = seed;
  cfg.id = "toy:seed=" + std::to_string(seed);
  return build_toy_bundle(spec, cfg);
}

std::shared_ptr<const ToyBundle> build_toy_bundle(const ToyWorldSpec& spec,
                                                  const ToyEncoderConfig& config) {
  return std::make_shared<const ToyBundle>(spec, config);
}

}  // namespace fsadv
