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


// Campaign configuration: parsing, validation and canonical snapshots.

#include <algorithm>
#include <cmath>
#include <set>

#include "fsadv/digest.hpp"
#include "fsadv/errors.hpp"
#include "fsadv/harness.hpp"
#include "file_util.hpp"

namespace fsadv {

namespace {

constexpr char kModule[] = "harness";

[[noreturn]] void config_error(const std::string& key, const std::string& what) {
  throw Error(ErrorKind::kConfig, kModule, key + ": " + what);
}

constexpr char kRun[] = "attack-id2ood attack-ood2id eval-clean sweep";
constexpr char kAttack[] = "attack-id2ood attack-ood2id sweep";
constexpr char kRender[] = "attack-id2ood attack-ood2id eval-clean report-render";

const std::vector<ConfigKey> kKeys = {
    {"campaign.mode", "id2ood, ood2id or clean; set by the command", kRun},
    {"campaign.seed", "root seed for distal seeds and noise draws", kRun},
    {"campaign.output_dir", "directory receiving all artifacts", "toy-data attack-id2ood attack-ood2id eval-clean sweep"},
    {"campaign.num_distals", "distal inputs, targets assigned round-robin", "attack-ood2id"},
    {"campaign.noise_baseline", "also score uniform-noise copies at attack.epsilon", "attack-id2ood"},
    {"campaign.pairwise", "also attack from each pool member alone", kAttack},
    {"task.source", "\"toy\" or a directory tree <split>/<label>/*.png", "toy-data attack-id2ood attack-ood2id eval-clean sweep"},
    {"task.seed", "toy dataset seed", "toy-data attack-id2ood attack-ood2id eval-clean sweep"},
    {"task.max_test", "cap on test images, 0 for all", kRun},
    {"task.num_classes", "toy ID classes", "toy-data attack-id2ood attack-ood2id eval-clean sweep"},
    {"task.image_size", "toy image side in pixels", "toy-data attack-id2ood attack-ood2id eval-clean sweep"},
    {"task.samples_per_class", "toy images per class and split", "toy-data attack-id2ood attack-ood2id eval-clean sweep"},
    {"task.background_noise", "toy background noise amplitude in [0,1]", "toy-data attack-id2ood attack-ood2id eval-clean sweep"},
    {"task.object_contrast", "toy object contrast in (0,1]", "toy-data attack-id2ood attack-ood2id eval-clean sweep"},
    {"task.object_scale", "toy object radius over image side, (0,0.5]", "toy-data attack-id2ood attack-ood2id eval-clean sweep"},
    {"models.pool", "bundle ids evaluated as targets", kRun},
    {"models.whitebox", "pool members generating perturbations", kAttack},
    {"models.cache_dir", "model cache (default $FSADV_CACHE_DIR)", "model-fetch attack-id2ood attack-ood2id eval-clean sweep"},
    {"models.hub_url", "model hub (default $FSADV_HUB_URL)", "model-fetch attack-id2ood attack-ood2id eval-clean sweep"},
    {"head.scheme", "zeroshot, probe or knn", kRun},
    {"head.k", "kNN neighbours", kRun},
    {"head.metric", "kNN metric: auto, cosine or euclidean", kRun},
    {"head.l2", "probe penalty, auto for 1/N", kRun},
    {"head.max_iter", "probe Newton iterations", kRun},
    {"detector.kind", "mcm, msp, or auto (mcm for zeroshot)", kRun},
    {"detector.temperature", "MCM softmax temperature", kRun},
    {"detector.tpr_target", "clean TPR the threshold keeps", kRun},
    {"attack.objective", "id2ood_afs or ood2id_ttafs, must match the mode", kAttack},
    {"attack.epsilon", "L-inf budget, e.g. 16/255", kAttack},
    {"attack.steps", "iterations", kAttack},
    {"attack.step_size", "per-step size, default epsilon/steps", kAttack},
    {"attack.momentum_mu", "momentum decay", kAttack},
    {"attack.di.min_size", "diverse-input min resize, default scaled to image", kAttack},
    {"attack.di.max_size", "diverse-input max resize", kAttack},
    {"attack.di.prob", "diverse-input probability, 0 disables", kAttack},
    {"attack.ti.size", "translation kernel size, 0 disables", kAttack},
    {"attack.ti.kind", "gaussian or uniform", kAttack},
    {"attack.lambda", "away-from-start weight in TT+AFS", kAttack},
    {"attack.seed", "attack randomness seed", kAttack},
    {"attack.random_start", "uniform start inside the ball", kAttack},
    {"attack.ensemble_weights", "per-whitebox loss weights, empty for uniform", kAttack},
    {"sweep.epsilons", "ascending budgets, e.g. 0,2/255,4/255", "sweep"},
    {"render.bins", "histogram bins", kRender},
    {"render.width", "panel width in pixels", kRender},
    {"render.height", "panel height in pixels", kRender},
    {"render.grid_samples", "adversarial examples per image grid", kAttack},
};

class Reader {
 public:
  explicit Reader(const ConfigDoc& doc) : doc_(doc) {}

  const std::string* raw(const std::string& key) const { return doc_.find(key); }

  std::string str(const std::string& key, std::string fallback) const {
    const auto* v = raw(key);
    return v ? *v : std::move(fallback);
  }
  double real(const std::string& key, double fallback) const {
    const auto* v = raw(key);
    if (!v) return fallback;
    try {
      std::size_t pos = 0;
      const double d = std::stod(*v, &pos);
      if (pos == v->size() && std::isfinite(d)) return d;
    } catch (const std::logic_error&) {
    }
    config_error(key, "expected a number, got '" + *v + "'");
  }
  long long integer(const std::string& key, long long fallback) const {
    const double d = real(key, static_cast<double>(fallback));
    if (d != std::floor(d)) config_error(key, "expected an integer");
    return static_cast<long long>(d);
  }
  bool boolean(const std::string& key, bool fallback) const {
    const auto* v = raw(key);
    if (!v) return fallback;
    if (*v == "true") return true;
    if (*v == "false") return false;
    config_error(key, "expected true or false, got '" + *v + "'");
  }

 private:
  const ConfigDoc& doc_;
};

std::string fmt(double v) { return detail::format_double(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }

}  // namespace

const std::vector<ConfigKey>& config_keys() { return kKeys; }

const char* to_string(CampaignMode mode) {
  switch (mode) {
    case CampaignMode::kId2Ood: return "id2ood";
    case CampaignMode::kOod2Id: return "ood2id";
    case CampaignMode::kClean: return "clean";
  }
  return "?";
}

CampaignMode parse_campaign_mode(std::string_view text) {
  if (text == "id2ood") return CampaignMode::kId2Ood;
  if (text == "ood2id") return CampaignMode::kOod2Id;
  if (text == "clean") return CampaignMode::kClean;
  config_error("campaign.mode", "unknown mode '" + std::string(text) + "'");
}

CampaignConfig::CampaignConfig() {
  attack.di = DiversePolicy{}.scaled_to(task.world.image_size);
  sweep_epsilons = {Budget::parse("0"), Budget::parse("2/255"), Budget::parse("4/255"),
                    Budget::parse("8/255"), Budget::parse("16/255")};
}

CampaignConfig CampaignConfig::from_doc(const ConfigDoc& doc) {
  std::set<std::string, std::less<>> known;
  for (const auto& k : kKeys) known.insert(k.key);
  for (const auto& [key, value] : doc.entries()) {
    if (!known.count(key)) {
      if (key == "attack.ensemble") config_error(key, "derived from models.whitebox; set that instead");
      config_error(key, "unknown key");
    }
  }
  const Reader r(doc);
  CampaignConfig c;
  c.mode = parse_campaign_mode(r.str("campaign.mode", "id2ood"));
  c.seed = static_cast<std::uint64_t>(r.integer("campaign.seed", 0));
  c.output_dir = r.str("campaign.output_dir", c.output_dir);
  c.num_distals = static_cast<int>(r.integer("campaign.num_distals", c.num_distals));
  c.noise_baseline = r.boolean("campaign.noise_baseline", false);
  c.pairwise = r.boolean("campaign.pairwise", false);

  c.task.source = r.str("task.source", "toy");
  c.task.seed = static_cast<std::uint64_t>(r.integer("task.seed", 7));
  c.task.max_test = static_cast<int>(r.integer("task.max_test", 0));
  const auto classes = static_cast<int>(r.integer("task.num_classes", 6));
  const auto size = static_cast<int>(r.integer("task.image_size", 32));
  if (classes < 2) config_error("task.num_classes", "need at least 2 classes");
  if (size < 8) config_error("task.image_size", "need at least 8 pixels");
  try {
    c.task.world = ToyWorldSpec::make_default(classes, size);
  } catch (const Error& e) {
    config_error("task.num_classes", e.what());
  }
  auto& w = c.task.world;
  w.samples_per_class = static_cast<int>(r.integer("task.samples_per_class", w.samples_per_class));
  w.background_noise = r.real("task.background_noise", w.background_noise);
  w.object_contrast = r.real("task.object_contrast", w.object_contrast);
  w.object_scale = r.real("task.object_scale", w.object_scale);

  if (const auto* v = doc.find("models.pool")) c.model_pool = split_list(*v);
  if (const auto* v = doc.find("models.whitebox")) c.whitebox_ids = split_list(*v);
  c.cache_dir = r.str("models.cache_dir", "");
  c.hub_url = r.str("models.hub_url", "");

  c.head.scheme = parse_head_scheme(r.str("head.scheme", "zeroshot"));
  c.head.k = static_cast<int>(r.integer("head.k", 5));
  c.head.metric = r.str("head.metric", "auto");
  if (c.head.metric != "auto") parse_knn_metric(c.head.metric);
  if (const auto* v = doc.find("head.l2"); v && *v != "auto") c.head.l2_strength = r.real("head.l2", 0);
  c.head.max_iter = static_cast<int>(r.integer("head.max_iter", 1000));

  const std::string detector = r.str("detector.kind", "auto");
  if (detector == "auto") {
    c.detector.kind = c.head.scheme == HeadScheme::kZeroShot ? DetectorKind::kMcm : DetectorKind::kMsp;
  } else {
    c.detector.kind = parse_detector(detector);
  }
  c.detector.temperature = r.real("detector.temperature", 1.0);
  c.threshold.tpr_target = r.real("detector.tpr_target", 0.95);

  auto section = doc.section("attack");
  const bool di_given = section.count("di.min_size") || section.count("di.max_size");
  const ObjectiveKind by_mode =
      c.mode == CampaignMode::kOod2Id ? ObjectiveKind::kOod2IdTtafs : ObjectiveKind::kId2OodAfs;
  if (section.count("objective") && parse_objective(section["objective"]) != by_mode &&
      c.mode != CampaignMode::kClean) {
    config_error("attack.objective", std::string("conflicts with campaign.mode ") + to_string(c.mode));
  }
  section["objective"] = to_string(by_mode);
  c.attack = AttackSpec::from_section(section);
  if (!di_given) c.attack.di = DiversePolicy{}.scaled_to(size);
  c.attack.ensemble = c.whitebox_ids;

  if (const auto* v = doc.find("sweep.epsilons")) {
    c.sweep_epsilons.clear();
    for (const auto& e : split_list(*v)) {
      try {
        c.sweep_epsilons.push_back(Budget::parse(e));
      } catch (const Error& err) {
        config_error("sweep.epsilons", err.what());
      }
    }
  }
  c.render.bins = static_cast<int>(r.integer("render.bins", c.render.bins));
  c.render.width = static_cast<int>(r.integer("render.width", c.render.width));
  c.render.height = static_cast<int>(r.integer("render.height", c.render.height));
  c.render.grid_samples = static_cast<int>(r.integer("render.grid_samples", c.render.grid_samples));
  c.validate();
  return c;
}

ConfigDoc CampaignConfig::to_doc() const {
  ConfigDoc d;
  d.set("campaign.mode", to_string(mode));
  d.set("campaign.seed", std::to_string(seed));
  d.set("campaign.output_dir", output_dir);
  d.set("campaign.num_distals", std::to_string(num_distals));
  d.set("campaign.noise_baseline", fmt(noise_baseline));
  d.set("campaign.pairwise", fmt(pairwise));
  d.set("task.source", task.source);
  d.set("task.seed", std::to_string(task.seed));
  d.set("task.max_test", std::to_string(task.max_test));
  d.set("task.num_classes", std::to_string(task.world.num_id_classes));
  d.set("task.image_size", std::to_string(task.world.image_size));
  d.set("task.samples_per_class", std::to_string(task.world.samples_per_class));
  d.set("task.background_noise", fmt(task.world.background_noise));
  d.set("task.object_contrast", fmt(task.world.object_contrast));
  d.set("task.object_scale", fmt(task.world.object_scale));
  d.set("models.pool", join_list(model_pool));
  d.set("models.whitebox", join_list(whitebox_ids));
  d.set("models.cache_dir", cache_dir);
  d.set("models.hub_url", hub_url);
  d.set("head.scheme", to_string(head.scheme));
  d.set("head.k", std::to_string(head.k));
  d.set("head.metric", head.metric);
  d.set("head.l2", head.l2_strength ? fmt(*head.l2_strength) : "auto");
  d.set("head.max_iter", std::to_string(head.max_iter));
  d.set("detector.kind", to_string(detector.kind));
  d.set("detector.temperature", fmt(detector.temperature));
  d.set("detector.tpr_target", fmt(threshold.tpr_target));
  AttackSpec a = attack;
  if (mode == CampaignMode::kClean) a.objective = ObjectiveKind::kId2OodAfs;
  for (const auto& [k, v] : a.to_section()) {
    if (k != "ensemble") d.set("attack." + k, v);
  }
  std::vector<std::string> eps;
  for (const auto& b : sweep_epsilons) eps.push_back(b.text);
  d.set("sweep.epsilons", join_list(eps));
  d.set("render.bins", std::to_string(render.bins));
  d.set("render.width", std::to_string(render.width));
  d.set("render.height", std::to_string(render.height));
  d.set("render.grid_samples", std::to_string(render.grid_samples));
  return d;
}

void CampaignConfig::validate() const {
  if (model_pool.empty()) config_error("models.pool", "empty model pool");
  std::set<std::string> seen;
  for (const auto& m : model_pool) {
    if (!seen.insert(m).second) config_error("models.pool", "duplicate id '" + m + "'");
  }
  if (mode != CampaignMode::kClean) {
    if (whitebox_ids.empty()) config_error("models.whitebox", "no whitebox models");
    std::set<std::string> wb;
    for (const auto& m : whitebox_ids) {
      if (!seen.count(m)) config_error("models.whitebox", "'" + m + "' is not in models.pool");
      if (!wb.insert(m).second) config_error("models.whitebox", "duplicate id '" + m + "'");
    }
    attack.validate(whitebox_ids.size());
  }
  if (task.source == "toy") task.world.validate();
  if (task.max_test < 0) config_error("task.max_test", "must be nonnegative");
  if (num_distals < 1) config_error("campaign.num_distals", "must be positive");
  if (head.k < 1) config_error("head.k", "must be positive");
  if (head.max_iter < 1) config_error("head.max_iter", "must be positive");
  if (head.l2_strength && !(*head.l2_strength >= 0.0)) config_error("head.l2", "must be nonnegative");
  detector.validate();
  threshold.validate();
  if (detector.kind == DetectorKind::kMcm && head.scheme != HeadScheme::kZeroShot) {
    config_error("detector.kind", "mcm scores cosine similarities and needs head.scheme zeroshot");
  }
  if (detector.kind == DetectorKind::kMsp && head.scheme == HeadScheme::kZeroShot) {
    config_error("detector.kind", "zero-shot heads are scored with mcm");
  }
  for (std::size_t i = 0; i < sweep_epsilons.size(); ++i) {
    if (sweep_epsilons[i].value < 0.0) config_error("sweep.epsilons", "negative budget");
    if (i > 0 && sweep_epsilons[i].value < sweep_epsilons[i - 1].value) {
      config_error("sweep.epsilons", "budgets must be ascending");
    }
  }
  if (render.bins < 1) config_error("render.bins", "must be positive");
  if (render.width < 64) config_error("render.width", "must be at least 64");
  if (render.height < 48) config_error("render.height", "must be at least 48");
  if (render.grid_samples < 0) config_error("render.grid_samples", "must be nonnegative");
}

std::string CampaignConfig::digest() const { return sha256_hex(snapshot()); }

std::string CampaignConfig::attack_digest() const {
  const ConfigDoc doc = to_doc();
  std::string text;
  for (const auto& [k, v] : doc.entries()) {
    if (k.starts_with("attack.") || k == "models.whitebox") text += k + "=" + v + "\n";
  }
  return sha256_hex(text);
}

}  // namespace fsadv
