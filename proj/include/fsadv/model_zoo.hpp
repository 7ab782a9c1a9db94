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

#ifndef FSADV_MODEL_ZOO_HPP_
#define FSADV_MODEL_ZOO_HPP_

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fsadv/tensor.hpp"

namespace fsadv {

struct BundleInfo {
  std::string id;
  Shape input_shape;
  int feature_dim = 0;
  int embed_dim = 0;
  bool has_text_tower = false;
  bool differentiable = false;
  // Whether forward/backward may be called concurrently on one instance.
  bool concurrent_safe = true;
};

struct Encoding {
  std::vector<double> features;      // f_v(x)
  std::vector<double> projected;     // p_v(f_v(x)), unit norm
  std::vector<double> unnormalized;  // projector output before normalization
};

// A frozen vision tower with an optional text tower sharing the projected
// space. Implementations are immutable after construction.
class EncoderBundle {
 public:
  virtual ~EncoderBundle() = default;

  virtual const BundleInfo& info() const = 0;

  // Raw evaluation without argument checks; see encode_image().
  virtual Encoding forward(const ImageTensor& x) const = 0;

  // Vector-Jacobian product: input gradient of a scalar whose gradients with
  // respect to the features and the projected embedding are given. Either
  // span may be empty, meaning zero.
  virtual GradTensor backward(const ImageTensor& x, const Encoding& enc,
                              std::span<const double> d_features,
                              std::span<const double> d_projected) const = 0;

  // Unit-norm p_t(f_t(prompt)). Throws kUnsupported without a text tower.
  virtual std::vector<double> text_embedding(std::string_view prompt) const;

  virtual std::vector<std::string> class_names() const { return {}; }
};

using BundlePtr = std::shared_ptr<const EncoderBundle>;

// "this is a photo of a <class>", underscores rendered as spaces.
std::string format_prompt(std::string_view class_name);

Encoding encode_image(const EncoderBundle& bundle, const ImageTensor& x);
std::vector<double> encode_text(const EncoderBundle& bundle,
                                std::string_view prompt);

// Gradients an objective reports with respect to what it consumed. The
// buffers arrive zero-filled and sized to the bundle.
struct ObjectiveGrad {
  std::vector<double> d_features;
  std::vector<double> d_projected;
  GradTensor d_pixels;
};

using Objective = std::function<double(const ImageTensor& x, const Encoding& enc,
                                       ObjectiveGrad& grad)>;

struct ValueAndGrad {
  double value = 0.0;
  GradTensor grad;
};

ValueAndGrad value_and_grad(const EncoderBundle& bundle,
                            const Objective& objective, const ImageTensor& x);

// ---------------------------------------------------------------------------
// Toy world

struct ToyClass {
  std::string name;
  std::string shape;  // square, disk, triangle, cross, diamond, ring, bar
  std::array<double, 3> color{};

  friend bool operator==(const ToyClass&, const ToyClass&) = default;
};

struct ToyWorldSpec {
  int num_id_classes = 6;
  int image_size = 32;
  std::vector<ToyClass> id_classes;
  // Colors reserved for held-out (OOD) shape/color pairs.
  std::vector<std::array<double, 3>> heldout_colors;
  std::vector<std::string> ood_kinds{"noise_texture", "heldout_pair"};
  int samples_per_class = 34;
  // Amplitude of the uniform background noise around mid-gray.
  double background_noise = 1.0;
  // Object colors are rendered as gray + contrast * (color - gray).
  double object_contrast = 1.0;
  // Object radius as a fraction of the image side.
  double object_scale = 0.14;

  static ToyWorldSpec make_default(int num_id_classes = 6, int image_size = 32);

  void validate() const;
  std::vector<std::string> class_names() const;
  Shape image_shape() const { return {3, image_size, image_size}; }
};

enum class Split { kTrain, kVal, kTest, kOod };

const char* to_string(Split split);
Split parse_split(std::string_view name);

struct LabeledImage {
  ImageTensor image;
  std::string label;       // class name, or OOD kind
  int class_index = -1;    // -1 for OOD samples
  std::optional<ToyClass> params;  // generator parameters when a shape is drawn
};

std::vector<LabeledImage> generate_toy_dataset(const ToyWorldSpec& spec,
                                               Split split, std::uint64_t seed);

// Writes <dir>/<split>/<label>/<index>.png for train, val, test and ood,
// plus classes.txt listing class names in index order.
void export_toy_dataset(const ToyWorldSpec& spec, std::uint64_t seed,
                        const std::string& dir);

struct ToyEncoderConfig {
  std::string id = "toy";
  int grid = 4;
  int embed_dim = 64;
  double mean_gain = 1.0;
  double var_gain = 0.55;
  double grid_gain = 0.08;
  bool use_means = true;
  bool use_vars = true;
  bool use_grid = true;
  std::uint64_t seed = 0;
  int calibration_per_class = 32;
  bool enforce_accuracy_gate = true;
};

// Named presets ("toy-a", "toy-b", "toy-c") or the parametric form
// "toy:grid=4,seed=7,embed=16,var_gain=2".
ToyEncoderConfig toy_preset(std::string_view id);
bool is_toy_id(std::string_view id);

// Analytic encoder. Raw statistics are per-channel means and variances plus
// a grid x grid average-pooled luminance map. Features are those statistics
// centered on a seeded calibration render and scaled by group gain over
// their calibration spread. The projector is a seeded Gaussian map followed
// by L2 normalization; text prototypes are projected class centroids.
class ToyBundle final : public EncoderBundle {
 public:
  ToyBundle(const ToyWorldSpec& world, const ToyEncoderConfig& config);

  const BundleInfo& info() const override { return info_; }
  Encoding forward(const ImageTensor& x) const override;
  GradTensor backward(const ImageTensor& x, const Encoding& enc,
                      std::span<const double> d_features,
                      std::span<const double> d_projected) const override;
  std::vector<double> text_embedding(std::string_view prompt) const override;
  std::vector<std::string> class_names() const override { return class_names_; }

  std::vector<double> features(const ImageTensor& x) const;
  const ToyEncoderConfig& config() const { return config_; }
  // Zero-shot top-1 accuracy on the validation split measured at build.
  double validation_accuracy() const { return validation_accuracy_; }

 private:
  std::vector<double> raw_features(const ImageTensor& x) const;
  std::vector<double> project_raw(std::span<const double> features) const;

  BundleInfo info_;
  ToyEncoderConfig config_;
  std::vector<std::string> class_names_;
  std::vector<double> feature_scale_;  // group gain / calibration std
  std::vector<double> center_;         // raw-statistic mean over calibration set
  std::vector<double> projection_;  // embed_dim x feature_dim, row-major
  std::map<std::string, std::vector<double>, std::less<>> prompt_table_;
  double validation_accuracy_ = 0.0;
};

std::shared_ptr<const ToyBundle> build_toy_bundle(const ToyWorldSpec& spec,
                                                  std::uint64_t seed);
std::shared_ptr<const ToyBundle> build_toy_bundle(const ToyWorldSpec& spec,
                                                  const ToyEncoderConfig& config);

}  // namespace fsadv

#endif  // FSADV_MODEL_ZOO_HPP_
