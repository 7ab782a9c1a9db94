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

#include "fsadv/attack.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "fsadv/errors.hpp"

namespace fsadv {

namespace {

constexpr char kModule[] = "attack-core";

[[noreturn]] void config_error(const std::string& key, const std::string& what) {
  throw Error(ErrorKind::kConfig, kModule, key + ": " + what);
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& text) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(text, &pos);
    if (pos != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::logic_error&) {
    config_error(key, "expected a number, got '" + text + "'");
  }
}

long long parse_int(const std::string& key, const std::string& text) {
  const double v = parse_double(key, text);
  if (v != std::floor(v)) config_error(key, "expected an integer, got '" + text + "'");
  return static_cast<long long>(v);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Source coordinate and weights for bilinear resampling with half-pixel
// centers.
struct Tap {
  int i0 = 0;
  int i1 = 0;
  double w1 = 0.0;
};

std::vector<Tap> bilinear_taps(int src, int dst) {
  std::vector<Tap> taps(dst);
  const double scale = static_cast<double>(src) / dst;
  for (int d = 0; d < dst; ++d) {
    const double s = std::max(0.0, (d + 0.5) * scale - 0.5);
    Tap t;
    t.i0 = std::min(static_cast<int>(s), src - 1);
    t.i1 = std::min(t.i0 + 1, src - 1);
    t.w1 = s - t.i0;
    taps[d] = t;
  }
  return taps;
}

}  // namespace

const char* to_string(ObjectiveKind kind) {
  return kind == ObjectiveKind::kId2OodAfs ? "id2ood_afs" : "ood2id_ttafs";
}

ObjectiveKind parse_objective(std::string_view text) {
  if (text == "id2ood_afs" || text == "afs") return ObjectiveKind::kId2OodAfs;
  if (text == "ood2id_ttafs" || text == "ttafs") return ObjectiveKind::kOod2IdTtafs;
  config_error("attack.objective", "unknown objective '" + std::string(text) +
                                       "' (expected id2ood_afs or ood2id_ttafs)");
}

void DiversePolicy::validate() const {
  if (min_size <= 0 || min_size > max_size) {
    config_error("attack.di.min_size", "need 0 < min_size <= max_size");
  }
  if (!(transform_prob >= 0.0 && transform_prob <= 1.0)) {
    config_error("attack.di.prob", "transform probability must lie in [0,1]");
  }
}

DiversePolicy DiversePolicy::scaled_to(int input_size) const {
  DiversePolicy p = *this;
  p.min_size = std::max(1, static_cast<int>(std::lround(
                               static_cast<double>(min_size) * input_size / max_size)));
  p.max_size = input_size;
  return p;
}

TiKernel TiKernel::gaussian(int size) {
  TiKernel k;
  k.size = size;
  k.kind = TiKernelKind::kGaussian;
  if (size < 1 || size % 2 == 0) config_error("attack.ti.size", "kernel size must be odd");
  const double sigma = size / 3.0;
  const int c = size / 2;
  k.weights.resize(static_cast<std::size_t>(size) * size);
  double total = 0.0;
  for (int a = 0; a < size; ++a)
    for (int b = 0; b < size; ++b) {
      const double d2 = static_cast<double>((a - c) * (a - c) + (b - c) * (b - c));
      k.weights[a * size + b] = std::exp(-d2 / (2.0 * sigma * sigma));
      total += k.weights[a * size + b];
    }
  for (double& w : k.weights) w /= total;
  return k;
}

TiKernel TiKernel::uniform(int size) {
  if (size < 1 || size % 2 == 0) config_error("attack.ti.size", "kernel size must be odd");
  TiKernel k;
  k.size = size;
  k.kind = TiKernelKind::kUniform;
  k.weights.assign(static_cast<std::size_t>(size) * size, 1.0 / (size * size));
  return k;
}

TiKernel TiKernel::make(TiKernelKind kind, int size) {
  return kind == TiKernelKind::kGaussian ? gaussian(size) : uniform(size);
}

void TiKernel::validate() const {
  if (size < 1 || size % 2 == 0) config_error("attack.ti.size", "kernel size must be odd");
  if (weights.size() != static_cast<std::size_t>(size) * size) {
    config_error("attack.ti.size", "weight matrix does not match kernel size");
  }
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) config_error("attack.ti.size", "negative kernel weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) config_error("attack.ti.size", "kernel not normalized");
  for (int a = 0; a < size; ++a)
    for (int b = 0; b < size; ++b)
      if (std::abs(at(a, b) - at(size - 1 - a, size - 1 - b)) > 1e-12) {
        config_error("attack.ti.size", "kernel not symmetric under 180 degree rotation");
      }
}

Budget Budget::parse(std::string_view text) {
  std::string t(text);
  t.erase(0, t.find_first_not_of(" \t\""));
  t.erase(t.find_last_not_of(" \t\"") + 1);
  Budget b;
  b.text = t;
  const auto slash = t.find('/');
  if (slash == std::string::npos) {
    b.value = parse_double("attack.epsilon", t);
  } else {
    const double num = parse_double("attack.epsilon", t.substr(0, slash));
    const double den = parse_double("attack.epsilon", t.substr(slash + 1));
    if (den == 0.0) config_error("attack.epsilon", "zero denominator in '" + t + "'");
    b.value = num / den;
  }
  if (!std::isfinite(b.value)) config_error("attack.epsilon", "nonfinite budget '" + t + "'");
  return b;
}

Budget Budget::of(double value) { return Budget{value, fmt_double(value)}; }

double AttackSpec::effective_step_size() const {
  if (step_size) return *step_size;
  return epsilon.value / std::max(steps, 1);
}

std::vector<double> AttackSpec::weights_for(std::size_t members) const {
  if (!ensemble_weights.empty()) return ensemble_weights;
  return std::vector<double>(members, 1.0 / static_cast<double>(members));
}

void AttackSpec::validate(std::size_t members) const {
  if (members == 0) config_error("attack.ensemble", "empty ensemble");
  if (!(epsilon.value > 0.0 && epsilon.value <= 1.0)) {
    config_error("attack.epsilon", "budget must lie in (0,1], got " + epsilon.text);
  }
  if (steps < 0) config_error("attack.steps", "steps must be nonnegative");
  if (step_size && !(*step_size > 0.0)) config_error("attack.step_size", "must be positive");
  if (!(momentum_mu >= 0.0)) config_error("attack.momentum_mu", "must be nonnegative");
  if (!(lambda_afs >= 0.0)) config_error("attack.lambda", "must be nonnegative");
  di.validate();
  if (ti) ti->validate();
  if (!ensemble_weights.empty()) {
    if (ensemble_weights.size() != members) {
      config_error("attack.ensemble_weights", "expected " + std::to_string(members) +
                                                  " weights, got " +
                                                  std::to_string(ensemble_weights.size()));
    }
    double total = 0.0;
    for (double w : ensemble_weights) {
      if (!(w >= 0.0)) config_error("attack.ensemble_weights", "weights must be nonnegative");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) {
      config_error("attack.ensemble_weights", "weights must sum to 1");
    }
  }
}

std::map<std::string, std::string> AttackSpec::to_section() const {
  std::map<std::string, std::string> kv;
  kv["objective"] = to_string(objective);
  kv["epsilon"] = epsilon.text;
  kv["steps"] = std::to_string(steps);
  if (step_size) kv["step_size"] = fmt_double(*step_size);
  kv["momentum_mu"] = fmt_double(momentum_mu);
  kv["di.min_size"] = std::to_string(di.min_size);
  kv["di.max_size"] = std::to_string(di.max_size);
  kv["di.prob"] = fmt_double(di.transform_prob);
  kv["ti.size"] = std::to_string(ti ? ti->size : 0);
  kv["ti.kind"] = (ti && ti->kind == TiKernelKind::kUniform) ? "uniform" : "gaussian";
  kv["lambda"] = fmt_double(lambda_afs);
  kv["seed"] = std::to_string(seed);
  if (random_start) kv["random_start"] = *random_start ? "true" : "false";
  std::string members;
  for (const auto& m : ensemble) members += (members.empty() ? "" : ",") + m;
  kv["ensemble"] = members;
  std::string weights;
  for (double w : ensemble_weights) weights += (weights.empty() ? "" : ",") + fmt_double(w);
  kv["ensemble_weights"] = weights;
  return kv;
}

AttackSpec AttackSpec::from_section(const std::map<std::string, std::string>& kv) {
  AttackSpec spec;
  int ti_size = 0;
  TiKernelKind ti_kind = TiKernelKind::kGaussian;
  for (const auto& [key, value] : kv) {
    const std::string full = "attack." + key;
    if (key == "objective") spec.objective = parse_objective(value);
    else if (key == "epsilon") spec.epsilon = Budget::parse(value);
    else if (key == "steps") spec.steps = static_cast<int>(parse_int(full, value));
    else if (key == "step_size") {
      if (!value.empty()) spec.step_size = Budget::parse(value).value;
    } else if (key == "momentum_mu") spec.momentum_mu = parse_double(full, value);
    else if (key == "di.min_size") spec.di.min_size = static_cast<int>(parse_int(full, value));
    else if (key == "di.max_size") spec.di.max_size = static_cast<int>(parse_int(full, value));
    else if (key == "di.prob") spec.di.transform_prob = parse_double(full, value);
    else if (key == "ti.size") ti_size = static_cast<int>(parse_int(full, value));
    else if (key == "ti.kind") {
      if (value == "gaussian") ti_kind = TiKernelKind::kGaussian;
      else if (value == "uniform") ti_kind = TiKernelKind::kUniform;
      else config_error(full, "unknown kernel kind '" + value + "'");
    } else if (key == "lambda") spec.lambda_afs = parse_double(full, value);
    else if (key == "seed") spec.seed = static_cast<std::uint64_t>(parse_int(full, value));
    else if (key == "random_start") {
      if (value != "true" && value != "false") config_error(full, "expected true or false");
      spec.random_start = value == "true";
    }
    else if (key == "ensemble") spec.ensemble = split_list(value);
    else if (key == "ensemble_weights") {
      spec.ensemble_weights.clear();
      for (const auto& w : split_list(value)) spec.ensemble_weights.push_back(parse_double(full, w));
    } else {
      config_error(full, "unknown key");
    }
  }
  if (ti_size < 0) config_error("attack.ti.size", "must be 0 (disabled) or odd");
  if (ti_size > 0) spec.ti = TiKernel::make(ti_kind, ti_size);
  return spec;
}

bool AttackSpec::uses_random_start() const {
  return random_start.value_or(objective == ObjectiveKind::kId2OodAfs);
}

PerturbationState PerturbationState::start(const ImageTensor& x0) {
  return PerturbationState{x0, x0, GradTensor(x0.shape()), 0};
}

// ---------------------------------------------------------------------------

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw Error(ErrorKind::kValidation, kModule, "cosine of vectors with different sizes");
  }
  double uv = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    uv += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  if (uu == 0.0 || vv == 0.0) {
    throw Error(ErrorKind::kDegenerate, kModule, "cosine similarity of a zero-norm vector");
  }
  return std::clamp(uv / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
}

CosineGrad cosine_with_grad(std::span<const double> u, std::span<const double> v) {
  double uv = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    uv += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  const double nu = std::max(std::sqrt(uu), 1e-12);
  const double nv = std::max(std::sqrt(vv), 1e-12);
  CosineGrad out;
  out.value = uv / (nu * nv);
  out.d_u.resize(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    out.d_u[i] = v[i] / (nu * nv) - out.value * u[i] / (nu * nu);
  }
  return out;
}

Objective afs_objective(std::vector<double> anchor_features) {
  return [anchor = std::move(anchor_features)](const ImageTensor&, const Encoding& enc,
                                               ObjectiveGrad& grad) {
    const CosineGrad cg = cosine_with_grad(enc.features, anchor);
    grad.d_features = cg.d_u;
    return cg.value;
  };
}

Objective ttafs_objective(std::vector<double> target_embedding,
                          std::vector<double> anchor_projected, double lambda_afs) {
  return [target = std::move(target_embedding), anchor = std::move(anchor_projected),
          lambda_afs](const ImageTensor&, const Encoding& enc, ObjectiveGrad& grad) {
    const CosineGrad toward = cosine_with_grad(enc.projected, target);
    const CosineGrad away = cosine_with_grad(enc.projected, anchor);
    for (std::size_t i = 0; i < grad.d_projected.size(); ++i) {
      grad.d_projected[i] = toward.d_u[i] - lambda_afs * away.d_u[i];
    }
    return toward.value - lambda_afs * away.value;
  };
}

Objective target_cosine_objective(std::vector<double> target_embedding) {
  return [target = std::move(target_embedding)](const ImageTensor&, const Encoding& enc,
                                                ObjectiveGrad& grad) {
    const CosineGrad cg = cosine_with_grad(enc.projected, target);
    grad.d_projected = cg.d_u;
    return cg.value;
  };
}

double afs_loss(const EncoderBundle& bundle, const ImageTensor& x0,
                const ImageTensor& x_adv) {
  const Encoding start = encode_image(bundle, x0);
  const Encoding now = encode_image(bundle, x_adv);
  return cosine_similarity(now.features, start.features);
}

double ttafs_loss(const EncoderBundle& bundle, const ImageTensor& x0,
                  const ImageTensor& x_adv, std::span<const double> target_embedding,
                  double lambda_afs) {
  const Encoding start = encode_image(bundle, x0);
  const Encoding now = encode_image(bundle, x_adv);
  return cosine_similarity(now.projected, target_embedding) -
         lambda_afs * cosine_similarity(now.projected, start.projected);
}

ImageTensor make_distal_seed(Shape shape, std::uint64_t seed) {
  RandomStream rng(derive_seed(seed, {0xD157A1}));
  ImageTensor x(shape);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform();
  return x;
}

// ---------------------------------------------------------------------------

DiDraw draw_di(const DiversePolicy& policy, Shape input, RandomStream& rng) {
  policy.validate();
  if (input.height != input.width) {
    config_error("attack.di", "diverse inputs require square images");
  }
  if (policy.min_size > input.height) {
    config_error("attack.di.min_size", "min_size " + std::to_string(policy.min_size) +
                                           " exceeds input size " +
                                           std::to_string(input.height));
  }
  DiDraw d;
  if (!(rng.uniform() < policy.transform_prob)) return d;
  d.applied = true;
  d.size = rng.uniform_int(policy.min_size, std::min(policy.max_size, input.height));
  d.offset_y = rng.uniform_int(0, input.height - d.size);
  d.offset_x = rng.uniform_int(0, input.width - d.size);
  return d;
}

ImageTensor apply_di(const ImageTensor& x, const DiDraw& draw) {
  if (!draw.applied) return x;
  const Shape& s = x.shape();
  const auto ty = bilinear_taps(s.height, draw.size);
  const auto tx = bilinear_taps(s.width, draw.size);
  ImageTensor out(s);
  for (int c = 0; c < s.channels; ++c)
    for (int y = 0; y < draw.size; ++y)
      for (int xx = 0; xx < draw.size; ++xx) {
        const Tap& a = ty[y];
        const Tap& b = tx[xx];
        const double top = (1.0 - b.w1) * x.at(c, a.i0, b.i0) + b.w1 * x.at(c, a.i0, b.i1);
        const double bot = (1.0 - b.w1) * x.at(c, a.i1, b.i0) + b.w1 * x.at(c, a.i1, b.i1);
        out.at(c, draw.offset_y + y, draw.offset_x + xx) = (1.0 - a.w1) * top + a.w1 * bot;
      }
  return out;
}

GradTensor apply_di_adjoint(const GradTensor& grad, const DiDraw& draw) {
  if (!draw.applied) return grad;
  const Shape& s = grad.shape();
  const auto ty = bilinear_taps(s.height, draw.size);
  const auto tx = bilinear_taps(s.width, draw.size);
  GradTensor out(s);
  for (int c = 0; c < s.channels; ++c)
    for (int y = 0; y < draw.size; ++y)
      for (int xx = 0; xx < draw.size; ++xx) {
        const double g = grad.at(c, draw.offset_y + y, draw.offset_x + xx);
        const Tap& a = ty[y];
        const Tap& b = tx[xx];
        out.at(c, a.i0, b.i0) += g * (1.0 - a.w1) * (1.0 - b.w1);
        out.at(c, a.i0, b.i1) += g * (1.0 - a.w1) * b.w1;
        out.at(c, a.i1, b.i0) += g * a.w1 * (1.0 - b.w1);
        out.at(c, a.i1, b.i1) += g * a.w1 * b.w1;
      }
  return out;
}

ImageTensor di_transform(const ImageTensor& x, const DiversePolicy& policy,
                         RandomStream& rng) {
  return apply_di(x, draw_di(policy, x.shape(), rng));
}

GradTensor ti_smooth(const GradTensor& grad, const TiKernel& kernel) {
  kernel.validate();
  const Shape& s = grad.shape();
  if (s.height < kernel.size || s.width < kernel.size) {
    throw Error(ErrorKind::kValidation, kModule,
                "gradient " + s.str() + " smaller than TI kernel " +
                    std::to_string(kernel.size));
  }
  const int r = kernel.size / 2;
  GradTensor out(s);
  for (int c = 0; c < s.channels; ++c)
    for (int y = 0; y < s.height; ++y)
      for (int x = 0; x < s.width; ++x) {
        double acc = 0.0;
        for (int a = 0; a < kernel.size; ++a) {
          const int yy = y + a - r;
          if (yy < 0 || yy >= s.height) continue;
          for (int b = 0; b < kernel.size; ++b) {
            const int xx = x + b - r;
            if (xx < 0 || xx >= s.width) continue;
            acc += kernel.at(a, b) * grad.at(c, yy, xx);
          }
        }
        out.at(c, y, x) = acc;
      }
  return out;
}

MomentumResult momentum_update(const GradTensor& g_prev, const GradTensor& grad,
                               double mu) {
  if (g_prev.shape() != grad.shape()) {
    throw Error(ErrorKind::kValidation, kModule, "momentum buffer shape mismatch");
  }
  MomentumResult r{g_prev, false};
  r.accumulated.scale(mu);
  const double l1 = grad.l1_norm();
  if (l1 == 0.0) {
    r.stalled = true;
    return r;
  }
  r.accumulated.axpy(1.0 / l1, grad);
  return r;
}

PerturbationState pgd_step(const PerturbationState& state,
                           const GradTensor& smoothed_grad, const AttackSpec& spec,
                           Direction direction) {
  const double step = spec.effective_step_size();
  const double eps = spec.epsilon.value;
  const double sgn = direction == Direction::kAscend ? 1.0 : -1.0;
  PerturbationState next = state;
  for (std::size_t i = 0; i < next.x_adv.size(); ++i) {
    const double g = smoothed_grad[i];
    const double s = (g > 0.0) - (g < 0.0);
    const double raw = state.x_adv[i] + sgn * step * s;
    const double lo = std::max(state.x0[i] - eps, 0.0);
    const double hi = std::min(state.x0[i] + eps, 1.0);
    next.x_adv[i] = std::clamp(raw, lo, hi);
  }
  ++next.iteration;
  return next;
}

double ensemble_loss(std::span<const double> weights,
                     std::span<const double> per_model_losses) {
  if (per_model_losses.empty()) {
    throw Error(ErrorKind::kConfig, kModule, "attack.ensemble: empty ensemble");
  }
  if (weights.size() != per_model_losses.size()) {
    throw Error(ErrorKind::kConfig, kModule,
                "attack.ensemble_weights: length does not match ensemble");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) total += weights[i] * per_model_losses[i];
  return total;
}

AdvResult run_attack(std::span<const EncoderBundle* const> bundles,
                     const ImageTensor& x0, const AttackSpec& spec,
                     std::span<const std::vector<double>> target_embeddings) {
  spec.validate(bundles.size());
  const bool targeted = spec.objective == ObjectiveKind::kOod2IdTtafs;
  if (targeted && target_embeddings.size() != bundles.size()) {
    throw Error(ErrorKind::kConfig, kModule,
                "attack.objective: ood2id_ttafs needs one target embedding per member");
  }
  if (!targeted && !target_embeddings.empty()) {
    throw Error(ErrorKind::kConfig, kModule,
                "attack.objective: id2ood_afs takes no target embedding");
  }
  const std::vector<double> weights = spec.weights_for(bundles.size());

  std::vector<Objective> objectives;
  for (std::size_t m = 0; m < bundles.size(); ++m) {
    const Encoding anchor = encode_image(*bundles[m], x0);
    if (targeted) {
      objectives.push_back(
          ttafs_objective(target_embeddings[m], anchor.projected, spec.lambda_afs));
    } else {
      objectives.push_back(afs_objective(anchor.features));
    }
  }

  const Direction direction = targeted ? Direction::kAscend : Direction::kDescend;
  PerturbationState state = PerturbationState::start(x0);
  if (spec.uses_random_start() && spec.steps > 0) {
    RandomStream rng(derive_seed(spec.seed, {0x5747A27}));
    const double eps = spec.epsilon.value;
    for (std::size_t i = 0; i < x0.size(); ++i) {
      state.x_adv[i] = std::clamp(x0[i] + rng.uniform(-eps, eps), 0.0, 1.0);
    }
  }
  AdvResult result;
  for (int it = 0; it < spec.steps; ++it) {
    GradTensor total_grad(x0.shape());
    TraceRow row{it, 0.0, {}};
    for (std::size_t m = 0; m < bundles.size(); ++m) {
      DiDraw draw;
      if (spec.di.enabled()) {
        RandomStream rng(derive_seed(spec.seed, {static_cast<std::uint64_t>(it), m}));
        draw = draw_di(spec.di, x0.shape(), rng);
      }
      ValueAndGrad vg;
      try {
        vg = value_and_grad(*bundles[m], objectives[m], apply_di(state.x_adv, draw));
      } catch (const Error& e) {
        std::ostringstream msg;
        msg << e.what() << " [iteration " << it << ", member " << m;
        if (!result.trace.empty()) msg << ", last loss " << result.trace.back().loss;
        msg << "]";
        throw Error(e.kind(), kModule, msg.str());
      }
      row.member_losses.push_back(vg.value);
      total_grad.axpy(weights[m], apply_di_adjoint(vg.grad, draw));
    }
    row.loss = ensemble_loss(weights, row.member_losses);
    result.trace.push_back(row);

    const GradTensor smoothed = spec.ti ? ti_smooth(total_grad, *spec.ti) : total_grad;
    MomentumResult mom = momentum_update(state.momentum, smoothed, spec.momentum_mu);
    if (mom.stalled) {
      result.warnings.push_back("iteration " + std::to_string(it) + ": stalled gradient");
    }
    state.momentum = std::move(mom.accumulated);
    state = pgd_step(state, state.momentum, spec, direction);
  }
  result.x_adv = std::move(state.x_adv);
  return result;
}

void write_trace_csv(std::ostream& out, const AdvResult& result) {
  const std::size_t members =
      result.trace.empty() ? 0 : result.trace.front().member_losses.size();
  out << "iteration,loss";
  for (std::size_t m = 0; m < members; ++m) out << ",member_" << m;
  out << "\n";
  for (const auto& row : result.trace) {
    out << row.iteration << "," << fmt_double(row.loss);
    for (double l : row.member_losses) out << "," << fmt_double(l);
    out << "\n";
  }
}

}  // namespace fsadv
