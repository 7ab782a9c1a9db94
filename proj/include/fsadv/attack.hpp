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

#ifndef FSADV_ATTACK_HPP_
#define FSADV_ATTACK_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "fsadv/model_zoo.hpp"
#include "fsadv/rng.hpp"
#include "fsadv/tensor.hpp"

namespace fsadv {

enum class ObjectiveKind { kId2OodAfs, kOod2IdTtafs };

const char* to_string(ObjectiveKind kind);
ObjectiveKind parse_objective(std::string_view text);

struct DiversePolicy {
  int min_size = 170;
  int max_size = 224;
  double transform_prob = 0.5;

  bool enabled() const { return transform_prob > 0.0; }
  void validate() const;
  // Same relative size range for a different input resolution.
  DiversePolicy scaled_to(int input_size) const;
  static DiversePolicy disabled() { return {1, 1, 0.0}; }

  friend bool operator==(const DiversePolicy&, const DiversePolicy&) = default;
};

enum class TiKernelKind { kGaussian, kUniform };

struct TiKernel {
  int size = 1;
  TiKernelKind kind = TiKernelKind::kGaussian;
  std::vector<double> weights;  // size x size, row-major

  // Truncated Gaussian with sigma = size / 3.
  static TiKernel gaussian(int size);
  static TiKernel uniform(int size);
  static TiKernel make(TiKernelKind kind, int size);
  void validate() const;
  double at(int row, int col) const { return weights[row * size + col]; }

  friend bool operator==(const TiKernel&, const TiKernel&) = default;
};

// Perturbation budgets may be given as n/255; the text form is kept so
// snapshots reproduce what the user wrote.
struct Budget {
  double value = 16.0 / 255.0;
  std::string text = "16/255";

  static Budget parse(std::string_view text);
  static Budget of(double value);
};

struct AttackSpec {
  ObjectiveKind objective = ObjectiveKind::kId2OodAfs;
  Budget epsilon;
  int steps = 20;
  // Defaults to epsilon / steps when unset.
  std::optional<double> step_size;
  double momentum_mu = 1.0;
  DiversePolicy di;
  std::optional<TiKernel> ti;
  double lambda_afs = 0.25;
  std::vector<std::string> ensemble;    // member ids, informational
  std::vector<double> ensemble_weights; // empty means uniform
  std::uint64_t seed = 0;
  // Start from a uniform draw inside the budget ball rather than at x0. The
  // away-from-start objective has zero gradient at x0 itself, so when unset
  // this is on for id2ood_afs and off for ood2id_ttafs.
  std::optional<bool> random_start;

  bool uses_random_start() const;

  double effective_step_size() const;
  std::vector<double> weights_for(std::size_t members) const;
  // Throws kConfig naming the offending key.
  void validate(std::size_t members) const;

  std::map<std::string, std::string> to_section() const;
  static AttackSpec from_section(const std::map<std::string, std::string>& kv);
};

struct PerturbationState {
  ImageTensor x0;
  ImageTensor x_adv;
  GradTensor momentum;
  int iteration = 0;

  static PerturbationState start(const ImageTensor& x0);
};

enum class Direction { kAscend, kDescend };

double cosine_similarity(std::span<const double> u, std::span<const double> v);

struct CosineGrad {
  double value = 0.0;
  std::vector<double> d_u;  // gradient with respect to u
};
// Norms below 1e-12 are clamped so the gradient stays finite.
CosineGrad cosine_with_grad(std::span<const double> u, std::span<const double> v);

// Objectives over a single bundle. Anchors are frozen constants.
Objective afs_objective(std::vector<double> anchor_features);
Objective ttafs_objective(std::vector<double> target_embedding,
                          std::vector<double> anchor_projected, double lambda_afs);
Objective target_cosine_objective(std::vector<double> target_embedding);

double afs_loss(const EncoderBundle& bundle, const ImageTensor& x0,
                const ImageTensor& x_adv);
double ttafs_loss(const EncoderBundle& bundle, const ImageTensor& x0,
                  const ImageTensor& x_adv,
                  std::span<const double> target_embedding, double lambda_afs);

ImageTensor make_distal_seed(Shape shape, std::uint64_t seed);

struct DiDraw {
  bool applied = false;
  int size = 0;
  int offset_y = 0;
  int offset_x = 0;
};

DiDraw draw_di(const DiversePolicy& policy, Shape input, RandomStream& rng);
ImageTensor apply_di(const ImageTensor& x, const DiDraw& draw);
// Adjoint of apply_di for the same draw.
GradTensor apply_di_adjoint(const GradTensor& grad, const DiDraw& draw);
ImageTensor di_transform(const ImageTensor& x, const DiversePolicy& policy,
                         RandomStream& rng);

GradTensor ti_smooth(const GradTensor& grad, const TiKernel& kernel);

struct MomentumResult {
  GradTensor accumulated;
  bool stalled = false;
};
MomentumResult momentum_update(const GradTensor& g_prev, const GradTensor& grad,
                               double mu);

PerturbationState pgd_step(const PerturbationState& state,
                           const GradTensor& smoothed_grad,
                           const AttackSpec& spec, Direction direction);

double ensemble_loss(std::span<const double> weights,
                     std::span<const double> per_model_losses);

struct TraceRow {
  int iteration = 0;
  double loss = 0.0;
  std::vector<double> member_losses;
};

struct AdvResult {
  ImageTensor x_adv;
  std::vector<TraceRow> trace;
  std::vector<std::string> warnings;
};

// target_embeddings holds one projected target per member (OOD2ID only).
AdvResult run_attack(std::span<const EncoderBundle* const> bundles,
                     const ImageTensor& x0, const AttackSpec& spec,
                     std::span<const std::vector<double>> target_embeddings = {});

void write_trace_csv(std::ostream& out, const AdvResult& result);

}  // namespace fsadv

#endif  // FSADV_ATTACK_HPP_
