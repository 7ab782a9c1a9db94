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


#include "fsadv/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <thread>
#include <tuple>

#include "fsadv/digest.hpp"
#include "fsadv/errors.hpp"
#include "fsadv/hub.hpp"
#include "fsadv/image_io.hpp"
#include "fsadv/rng.hpp"

namespace fsadv {

namespace {

constexpr char kModule[] = "harness";
constexpr std::uint64_t kDistalTag = 0xD15A1;
constexpr std::uint64_t kNoiseTag = 0x4015E;

namespace fs = std::filesystem;

int resolve_workers(int workers) {
  if (workers > 0) return workers;
  return std::max(1u, std::thread::hardware_concurrency());
}

// Runs fn(0..n-1) on a fixed pool. Results must be written to index-keyed
// slots; the lowest-index exception is rethrown so failures do not depend
// on scheduling.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  const auto threads = std::min<std::size_t>(resolve_workers(workers), n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::size_t error_index = n;
  std::exception_ptr error;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (i < error_index) {
            error_index = i;
            error = std::current_exception();
          }
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

std::string sample_id(const char* split, std::size_t i) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%s/%06zu", split, i);
  return buf;
}

std::string join_plus(const std::vector<std::string>& ids) {
  std::string out;
  for (const auto& id : ids) out += (out.empty() ? "" : "+") + id;
  return out;
}

std::vector<std::string> split_plus(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto end = s.find('+', start);
    if (end == std::string::npos) end = s.size();
    if (end > start) out.push_back(s.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

std::string file_token(std::string s) {
  for (char& c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
  }
  return s;
}

struct Model {
  std::string id;
  BundlePtr bundle;
  HeadPtr head;
};

struct Source {
  std::string label;
  std::vector<std::size_t> members;  // indices into the loaded models
};

// State shared by campaigns, sweeps and noise runs over one configuration.
class Campaign {
 public:
  Campaign(const CampaignConfig& config, const RunOptions& options)
      : config_(config), options_(options) {
    config_.validate();
  }

  void prepare() {
    data_ = load_task(config_.task);
    if (config_.task.max_test > 0 &&
        data_.test.size() > static_cast<std::size_t>(config_.task.max_test)) {
      data_.test.resize(config_.task.max_test);
    }
    if (data_.test.empty()) {
      throw Error(ErrorKind::kConfig, kModule, "task.source: the test split is empty");
    }
    const bool needs_train = config_.head.scheme != HeadScheme::kZeroShot;
    if (needs_train && data_.train.empty()) {
      throw Error(ErrorKind::kConfig, kModule,
                  "head.scheme: probe and knn heads need a train split");
    }
    load_models();
    build_heads();
    score_clean();
  }

  ReportBundle base_report() const {
    ReportBundle r;
    r.mode = to_string(config_.mode);
    r.config_snapshot = config_.snapshot();
    r.config_digest = sha256_hex(r.config_snapshot);
    r.attack_digest = config_.mode == CampaignMode::kClean ? "" : config_.attack_digest();
    r.head = to_string(config_.head.scheme);
    r.detector = config_.detector.label();
    r.tpr_target = config_.threshold.tpr_target;
    for (const auto& m : models_) r.models.push_back(m.id);
    r.failures = failures_;
    r.warnings = warnings_;
    r.records = clean_records_;
    return r;
  }

  std::vector<Source> sources() const {
    std::vector<Source> out;
    const auto index_of = [&](const std::string& id) -> std::optional<std::size_t> {
      for (std::size_t i = 0; i < models_.size(); ++i) {
        if (models_[i].id == id) return i;
      }
      return std::nullopt;
    };
    Source primary{join_plus(config_.whitebox_ids), {}};
    bool ok = true;
    for (const auto& id : config_.whitebox_ids) {
      if (auto i = index_of(id)) primary.members.push_back(*i);
      else ok = false;
    }
    if (ok) out.push_back(primary);
    if (config_.pairwise) {
      for (std::size_t i = 0; i < models_.size(); ++i) {
        if (primary.members == std::vector<std::size_t>{i}) continue;
        out.push_back({models_[i].id, {i}});
      }
    }
    return out;
  }

  // Perturbed test images (ID->OOD) or distals (OOD->ID) for one source.
  struct Generated {
    std::vector<ImageTensor> images;
    std::vector<int> labels;  // true class, or target class
  };

  Generated generate(const Source& source, std::size_t source_index, const AttackSpec& spec) const {
    std::vector<const EncoderBundle*> members;
    for (std::size_t m : source.members) members.push_back(models_[m].bundle.get());
    Generated g;
    const int k = static_cast<int>(data_.class_names.size());
    if (config_.mode == CampaignMode::kOod2Id) {
      const std::size_t n = static_cast<std::size_t>(config_.num_distals);
      g.images.resize(n);
      g.labels.resize(n);
      // Target embeddings per class and member.
      std::vector<std::vector<std::vector<double>>> targets(k);
      for (int c = 0; c < k; ++c) {
        for (const auto* b : members) {
          targets[c].push_back(encode_text(*b, format_prompt(data_.class_names[c])));
        }
      }
      parallel_for(n, options_.workers, [&](std::size_t j) {
        const int target = static_cast<int>(j % k);
        const ImageTensor x0 =
            make_distal_seed(image_shape(), derive_seed(config_.seed, {kDistalTag, j}));
        AttackSpec s = spec;
        s.seed = derive_seed(spec.seed, {source_index, j});
        g.images[j] = run_attack(members, x0, s, targets[target]).x_adv;
        g.labels[j] = target;
      });
      return g;
    }
    const std::size_t n = data_.test.size();
    g.images.resize(n);
    g.labels.resize(n);
    const bool noop = spec.steps == 0 || spec.epsilon.value == 0.0;
    parallel_for(n, options_.workers, [&](std::size_t i) {
      g.labels[i] = data_.test[i].class_index;
      if (noop) {
        g.images[i] = data_.test[i].image;
        return;
      }
      AttackSpec s = spec;
      s.seed = derive_seed(spec.seed, {source_index, i});
      g.images[i] = run_attack(members, data_.test[i].image, s).x_adv;
    });
    return g;
  }

  Generated noisy(const Budget& epsilon) const {
    Generated g;
    const std::size_t n = data_.test.size();
    g.images.resize(n);
    g.labels.resize(n);
    parallel_for(n, options_.workers, [&](std::size_t i) {
      RandomStream rng(derive_seed(config_.seed, {kNoiseTag, i}));
      ImageTensor x = data_.test[i].image;
      for (std::size_t p = 0; p < x.size(); ++p) {
        x[p] = std::clamp(x[p] + rng.uniform(-epsilon.value, epsilon.value), 0.0, 1.0);
      }
      g.images[i] = std::move(x);
      g.labels[i] = data_.test[i].class_index;
    });
    return g;
  }

  // Scores every image on every loaded model, model-major.
  std::vector<ScoreRecord> score(const std::vector<ImageTensor>& images,
                                 const std::vector<int>& labels, Provenance provenance,
                                 const char* split, const std::string& source,
                                 const std::optional<std::string>& digest) const {
    std::vector<ScoreRecord> out(models_.size() * images.size());
    for (std::size_t m = 0; m < models_.size(); ++m) {
      const Model& model = models_[m];
      const std::string fingerprint = model.head->fingerprint();
      parallel_for(images.size(), options_.workers, [&](std::size_t i) {
        const Encoding enc = encode_image(*model.bundle, images[i]);
        const Prediction pred = model.head->predict(enc);
        ScoreRecord& r = out[m * images.size() + i];
        r.sample_id = sample_id(split, i);
        r.provenance = provenance;
        r.model_id = model.id;
        r.head = to_string(config_.head.scheme);
        r.ood_score = ood_score(config_.detector, pred.scores);
        r.predicted_class = pred.class_index;
        r.true_or_target_class = labels[i];
        r.attack_config_digest = digest;
        r.source = source;
        r.head_fingerprint = fingerprint;
      });
    }
    return out;
  }

  void write_grid(const Generated& g, const std::string& name) const {
    if (options_.grid_dir.empty() || config_.render.grid_samples <= 0 || g.images.empty()) return;
    const std::size_t n = std::min<std::size_t>(config_.render.grid_samples, g.images.size());
    std::vector<ImageTensor> images(g.images.begin(), g.images.begin() + n);
    write_image_grid(images, std::min<int>(static_cast<int>(n), 8),
                     options_.grid_dir + "/" + file_token(name) + ".png");
  }

  const CampaignConfig& config() const { return config_; }
  const std::vector<ScoreRecord>& clean_records() const { return clean_records_; }
  const TaskData& data() const { return data_; }

 private:
  Shape image_shape() const { return data_.test.front().image.shape(); }

  void fail(const std::string& id, const std::string& what) {
    failures_.push_back({id, what});
  }

  void load_models() {
    const HubClient hub = HubClient::from_env(config_.hub_url, config_.cache_dir);
    for (const auto& id : config_.model_pool) {
      try {
        BundlePtr bundle;
        if (is_toy_id(id)) {
          bundle = build_toy_bundle(config_.task.world, toy_preset(id));
        } else {
          bundle = load_external_bundle(id, hub);
        }
        if (!(bundle->info().input_shape == image_shape())) {
          throw Error(ErrorKind::kConfig, kModule,
                      "bundle input " + bundle->info().input_shape.str() +
                          " does not match task images " + image_shape().str());
        }
        models_.push_back({id, std::move(bundle), nullptr});
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::kConfig) throw;
        fail(id, e.what());
      }
    }
    if (models_.empty()) {
      throw Error(ErrorKind::kNotFound, kModule, "no model in models.pool could be loaded");
    }
    // Capability checks happen before any scoring or attack work.
    for (const auto& m : models_) {
      if (config_.head.scheme == HeadScheme::kZeroShot && !m.bundle->info().has_text_tower) {
        throw Error(ErrorKind::kConfig, kModule,
                    "head.scheme: zeroshot needs a text tower, which '" + m.id + "' lacks");
      }
    }
    if (config_.mode != CampaignMode::kClean) {
      for (const auto& id : config_.whitebox_ids) {
        for (const auto& m : models_) {
          if (m.id != id) continue;
          if (!m.bundle->info().differentiable) {
            throw Error(ErrorKind::kConfig, kModule,
                        "models.whitebox: '" + id + "' is not differentiable");
          }
          if (config_.mode == CampaignMode::kOod2Id && !m.bundle->info().has_text_tower) {
            throw Error(ErrorKind::kConfig, kModule,
                        "models.whitebox: '" + id + "' has no text tower for targets");
          }
        }
      }
    }
  }

  void build_heads() {
    const int k = static_cast<int>(data_.class_names.size());
    std::vector<Model> kept;
    for (auto& m : models_) {
      try {
        if (config_.head.scheme == HeadScheme::kZeroShot) {
          m.head = std::make_shared<ZeroShotHead>(
              ZeroShotHead::from_bundle(*m.bundle, data_.class_names, config_.detector.temperature));
        } else {
          std::vector<Encoding> enc(data_.train.size());
          parallel_for(enc.size(), options_.workers, [&](std::size_t i) {
            enc[i] = encode_image(*m.bundle, data_.train[i].image);
          });
          std::vector<int> labels;
          for (const auto& s : data_.train) labels.push_back(s.class_index);
          if (config_.head.scheme == HeadScheme::kProbe) {
            Matrix features;
            for (const auto& e : enc) features.push_back(e.features);
            auto probe = fit_linear_probe(
                features, labels, k,
                ProbeOptions{config_.head.l2_strength, config_.head.max_iter, 1e-6});
            for (const auto& w : probe.warnings) warnings_.push_back(m.id + ": " + w);
            m.head = std::make_shared<LinearProbeHead>(std::move(probe));
          } else {
            const bool text = m.bundle->info().has_text_tower;
            KnnMetric metric = text ? KnnMetric::kCosine : KnnMetric::kEuclidean;
            if (config_.head.metric != "auto") metric = parse_knn_metric(config_.head.metric);
            const FeatureSpace space = metric == KnnMetric::kCosine && text
                                           ? FeatureSpace::kProjected
                                           : FeatureSpace::kFeatures;
            Matrix bank;
            for (const auto& e : enc) {
              bank.push_back(space == FeatureSpace::kProjected ? e.projected : e.features);
            }
            m.head = std::make_shared<KnnHead>(std::move(bank), std::move(labels), k,
                                               config_.head.k, metric, space);
          }
        }
        kept.push_back(std::move(m));
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::kConfig) throw;
        fail(m.id, e.what());
      }
    }
    models_ = std::move(kept);
    if (models_.empty()) {
      throw Error(ErrorKind::kNotFound, kModule, "no model in models.pool produced a head");
    }
  }

  void score_clean() {
    std::vector<ImageTensor> images;
    std::vector<int> labels;
    for (const auto& s : data_.test) {
      images.push_back(s.image);
      labels.push_back(s.class_index);
    }
    clean_records_ = score(images, labels, Provenance::kCleanId, "test", "", std::nullopt);
    if (!data_.ood.empty()) {
      images.clear();
      labels.clear();
      for (const auto& s : data_.ood) {
        images.push_back(s.image);
        labels.push_back(-1);
      }
      auto ood = score(images, labels, Provenance::kNaturalOod, "ood", "", std::nullopt);
      clean_records_.insert(clean_records_.end(), ood.begin(), ood.end());
    }
  }

  CampaignConfig config_;
  RunOptions options_;
  TaskData data_;
  std::vector<Model> models_;
  std::vector<ModelFailure> failures_;
  std::vector<std::string> warnings_;
  std::vector<ScoreRecord> clean_records_;
};

Provenance attack_provenance(const CampaignConfig& c) {
  return c.mode == CampaignMode::kOod2Id ? Provenance::kDistal : Provenance::kAdvId;
}

const char* attack_split(const CampaignConfig& c) {
  return c.mode == CampaignMode::kOod2Id ? "distal" : "test";
}

void append(std::vector<ScoreRecord>& to, std::vector<ScoreRecord> from) {
  to.insert(to.end(), std::make_move_iterator(from.begin()), std::make_move_iterator(from.end()));
}

void finalize(ReportBundle& r) {
  Tables t = compute_tables(r);
  r.metrics = std::move(t.metrics);
  r.thresholds = std::move(t.thresholds);
  r.transfer = std::move(t.transfer);
}

}  // namespace

// ---------------------------------------------------------------------------

const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::kCleanId: return "cleanID";
    case Provenance::kAdvId: return "advID";
    case Provenance::kDistal: return "distal";
    case Provenance::kNaturalOod: return "naturalOOD";
    case Provenance::kNoiseId: return "noiseID";
  }
  return "?";
}

Provenance parse_provenance(std::string_view text) {
  for (Provenance p : {Provenance::kCleanId, Provenance::kAdvId, Provenance::kDistal,
                       Provenance::kNaturalOod, Provenance::kNoiseId}) {
    if (text == to_string(p)) return p;
  }
  throw Error(ErrorKind::kIo, kModule, "unknown provenance '" + std::string(text) + "'");
}

std::vector<MetricRow> ReportBundle::find(MetricKind metric, std::string_view scope,
                                          std::string_view model_id,
                                          std::string_view whitebox) const {
  std::vector<MetricRow> out;
  for (const auto& row : metrics) {
    if (row.metric != metric || row.scope != scope) continue;
    if (!model_id.empty() && row.model_id != model_id) continue;
    if (!whitebox.empty() && row.whitebox != whitebox) continue;
    out.push_back(row);
  }
  return out;
}

const ThresholdRow* ReportBundle::threshold_for(std::string_view model_id) const {
  for (const auto& t : thresholds) {
    if (t.model_id == model_id) return &t;
  }
  return nullptr;
}

Tables compute_tables(const ReportBundle& report) {
  struct Column {
    std::vector<double> scores;
    std::vector<int> predicted;
    std::vector<int> labels;
  };
  // (model, provenance, source) -> column, in record order.
  std::map<std::tuple<std::string, Provenance, std::string>, Column> cols;
  for (const auto& r : report.records) {
    auto& c = cols[{r.model_id, r.provenance, r.source}];
    c.scores.push_back(r.ood_score);
    c.predicted.push_back(r.predicted_class);
    c.labels.push_back(r.true_or_target_class);
  }
  const auto column = [&](const std::string& model, Provenance p,
                          const std::string& source) -> const Column* {
    auto it = cols.find({model, p, source});
    return it == cols.end() ? nullptr : &it->second;
  };
  const ThresholdPolicy policy{report.tpr_target};
  const bool distal = report.mode == "ood2id";

  Tables t;
  const auto row = [&](MetricKind kind, double value, std::size_t n_pos, std::size_t n_neg,
                       std::optional<double> tau, const std::string& model,
                       const std::string& scope, const std::string& whitebox) {
    MetricRow m;
    m.metric = kind;
    m.value = value;
    m.n_pos = n_pos;
    m.n_neg = n_neg;
    m.threshold = tau;
    m.model_id = model;
    m.head = report.head;
    m.detector = report.detector;
    m.attack_config_digest =
        (scope == "clean" || scope == "noise") ? std::string() : report.attack_digest;
    m.scope = scope;
    m.whitebox = whitebox;
    t.metrics.push_back(std::move(m));
  };

  std::map<std::string, double> tau;
  for (const auto& model : report.models) {
    const Column* clean = column(model, Provenance::kCleanId, "");
    if (!clean) continue;
    const double th = tpr95_threshold(clean->scores, policy);
    tau[model] = th;
    t.thresholds.push_back({model, report.head, report.detector, th, report.tpr_target,
                            true_positive_rate(clean->scores, th), clean->scores.size()});
    row(MetricKind::kAcc, accuracy(clean->predicted, clean->labels), clean->scores.size(), 0,
        std::nullopt, model, "clean", "");
    if (const Column* ood = column(model, Provenance::kNaturalOod, "")) {
      row(MetricKind::kAuroc, auroc(clean->scores, ood->scores), clean->scores.size(),
          ood->scores.size(), std::nullopt, model, "clean", "");
      row(MetricKind::kFpr95, fpr_at_threshold(ood->scores, th), clean->scores.size(),
          ood->scores.size(), th, model, "clean", "");
    }
  }

  const Provenance attacked = distal ? Provenance::kDistal : Provenance::kAdvId;
  const MetricKind first = distal ? MetricKind::kTsuc : MetricKind::kAcc;
  const MetricKind rate = distal ? MetricKind::kFpr95 : MetricKind::kFnr95;
  for (const auto& source : report.sources) {
    const auto members = split_plus(source);
    struct Sum {
      double value = 0.0;
      std::size_t n_pos = 0;
      std::size_t n_neg = 0;
    };
    std::map<MetricKind, Sum> blackbox;
    int blackbox_models = 0;
    for (const auto& model : report.models) {
      const Column* clean = column(model, Provenance::kCleanId, "");
      const Column* adv = column(model, attacked, source);
      if (!clean || !adv) continue;
      const double th = tau[model];
      const bool wb = std::find(members.begin(), members.end(), model) != members.end();
      const std::string scope = wb ? "whitebox" : "blackbox";
      const double v1 = accuracy(adv->predicted, adv->labels);
      const double v2 = distal ? fpr_at_threshold(adv->scores, th) : fnr_at_threshold(adv->scores, th);
      const double v3 = auroc(clean->scores, adv->scores);
      const std::size_t np = clean->scores.size();
      const std::size_t nn = adv->scores.size();
      row(first, v1, nn, 0, std::nullopt, model, scope, source);
      row(MetricKind::kAuroc, v3, np, nn, std::nullopt, model, scope, source);
      row(rate, v2, np, nn, th, model, scope, source);
      t.transfer.push_back({source, model, wb, v1, v2, v3, nn});
      if (!wb) {
        ++blackbox_models;
        for (auto [kind, v, p, n] : {std::tuple{first, v1, nn, std::size_t{0}},
                                     std::tuple{MetricKind::kAuroc, v3, np, nn},
                                     std::tuple{rate, v2, np, nn}}) {
          blackbox[kind].value += v;
          blackbox[kind].n_pos += p;
          blackbox[kind].n_neg += n;
        }
      }
    }
    if (blackbox_models > 0) {
      for (MetricKind kind : {first, MetricKind::kAuroc, rate}) {
        const Sum& s = blackbox[kind];
        row(kind, s.value / blackbox_models, s.n_pos, s.n_neg, std::nullopt, "avg",
            "blackbox_avg", source);
      }
    }
  }

  for (const auto& model : report.models) {
    const Column* clean = column(model, Provenance::kCleanId, "");
    const Column* noise = column(model, Provenance::kNoiseId, "noise");
    if (!clean || !noise) continue;
    const double th = tau[model];
    row(MetricKind::kAcc, accuracy(noise->predicted, noise->labels), noise->scores.size(), 0,
        std::nullopt, model, "noise", "noise");
    row(MetricKind::kAuroc, auroc(clean->scores, noise->scores), clean->scores.size(),
        noise->scores.size(), std::nullopt, model, "noise", "noise");
    row(MetricKind::kFnr95, fnr_at_threshold(noise->scores, th), clean->scores.size(),
        noise->scores.size(), th, model, "noise", "noise");
  }
  return t;
}

// ---------------------------------------------------------------------------

ReportBundle run_campaign(const CampaignConfig& config, const RunOptions& options) {
  Campaign campaign(config, options);
  campaign.prepare();
  ReportBundle report = campaign.base_report();
  if (config.mode != CampaignMode::kClean) {
    const auto sources = campaign.sources();
    if (sources.empty()) {
      report.warnings.push_back("a whitebox model failed to load; no perturbations generated");
    }
    for (std::size_t s = 0; s < sources.size(); ++s) {
      const auto g = campaign.generate(sources[s], s, config.attack);
      campaign.write_grid(g, "adv_grid_" + sources[s].label + "_eps_" + config.attack.epsilon.text);
      append(report.records, campaign.score(g.images, g.labels, attack_provenance(config),
                                            attack_split(config), sources[s].label,
                                            report.attack_digest));
      report.sources.push_back(sources[s].label);
    }
    if (config.noise_baseline && config.mode == CampaignMode::kId2Ood) {
      const auto g = campaign.noisy(config.attack.epsilon);
      append(report.records, campaign.score(g.images, g.labels, Provenance::kNoiseId, "test",
                                            "noise", std::nullopt));
    }
  }
  finalize(report);
  return report;
}

SweepReport epsilon_sweep(const CampaignConfig& config, const std::vector<Budget>& epsilons,
                          const RunOptions& options) {
  if (config.mode == CampaignMode::kClean) {
    throw Error(ErrorKind::kConfig, kModule, "campaign.mode: a sweep needs an attack mode");
  }
  for (std::size_t i = 0; i < epsilons.size(); ++i) {
    if (epsilons[i].value < 0.0 || (i > 0 && epsilons[i].value < epsilons[i - 1].value)) {
      throw Error(ErrorKind::kConfig, kModule, "sweep.epsilons: budgets must be ascending and >= 0");
    }
  }
  Campaign campaign(config, options);
  campaign.prepare();
  SweepReport sweep;
  sweep.config_digest = config.digest();
  const auto sources = campaign.sources();
  for (const Budget& eps : epsilons) {
    CampaignConfig point_config = config;
    point_config.attack.epsilon = eps;
    ReportBundle report = campaign.base_report();
    report.config_snapshot = point_config.snapshot();
    report.config_digest = sha256_hex(report.config_snapshot);
    report.attack_digest = point_config.attack_digest();
    for (std::size_t s = 0; s < sources.size(); ++s) {
      std::vector<ScoreRecord> recs;
      if (eps.value == 0.0 && config.mode == CampaignMode::kId2Ood) {
        // No budget: the adversarial set is the clean set, so reuse its scores.
        for (const auto& r : campaign.clean_records()) {
          if (r.provenance != Provenance::kCleanId) continue;
          ScoreRecord a = r;
          a.provenance = Provenance::kAdvId;
          a.source = sources[s].label;
          a.attack_config_digest = report.attack_digest;
          recs.push_back(std::move(a));
        }
      } else {
        const auto g = campaign.generate(sources[s], s, point_config.attack);
        campaign.write_grid(g, "adv_grid_" + sources[s].label + "_eps_" + eps.text);
        recs = campaign.score(g.images, g.labels, attack_provenance(config),
                              attack_split(config), sources[s].label, report.attack_digest);
      }
      append(report.records, std::move(recs));
      report.sources.push_back(sources[s].label);
    }
    finalize(report);
    sweep.points.push_back({eps, std::move(report)});
  }
  return sweep;
}

std::vector<double> SweepReport::series(std::string_view model_id, std::string_view scope,
                                        MetricKind metric) const {
  std::vector<double> out;
  for (const auto& p : points) {
    const auto rows = p.report.find(metric, scope, model_id);
    if (!rows.empty()) out.push_back(rows.front().value);
  }
  return out;
}

NoiseBaseline noise_baseline(const CampaignConfig& config, const Budget& epsilon,
                             const RunOptions& options) {
  Campaign campaign(config, options);
  campaign.prepare();
  ReportBundle report = campaign.base_report();
  report.sources.clear();
  const auto g = campaign.noisy(epsilon);
  NoiseBaseline out;
  out.records =
      campaign.score(g.images, g.labels, Provenance::kNoiseId, "test", "noise", std::nullopt);
  append(report.records, out.records);
  for (auto& row : compute_tables(report).metrics) {
    if (row.scope == "noise") out.metrics.push_back(std::move(row));
  }
  return out;
}

// ---------------------------------------------------------------------------

TaskData load_task(const TaskConfig& task) {
  if (task.source != "toy") return load_image_tree(task.source);
  TaskData d;
  d.class_names = task.world.class_names();
  d.train = generate_toy_dataset(task.world, Split::kTrain, task.seed);
  d.test = generate_toy_dataset(task.world, Split::kTest, task.seed);
  d.ood = generate_toy_dataset(task.world, Split::kOod, task.seed);
  return d;
}

TaskData load_image_tree(const std::string& root) {
  if (!fs::is_directory(root)) {
    throw Error(ErrorKind::kConfig, kModule, "task.source: '" + root + "' is not a directory");
  }
  TaskData d;
  const fs::path classes_file = fs::path(root) / "classes.txt";
  if (fs::exists(classes_file)) {
    std::ifstream in(classes_file);
    for (std::string line; std::getline(in, line);) {
      while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
      if (!line.empty()) d.class_names.push_back(line);
    }
  } else if (fs::is_directory(fs::path(root) / "test")) {
    for (const auto& e : fs::directory_iterator(fs::path(root) / "test")) {
      if (e.is_directory()) d.class_names.push_back(e.path().filename().string());
    }
    std::sort(d.class_names.begin(), d.class_names.end());
  }
  if (d.class_names.size() < 2) {
    throw Error(ErrorKind::kConfig, kModule, "task.source: need at least two classes under " + root);
  }
  const auto images_in = [](const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (!e.is_regular_file()) continue;
      std::string ext = e.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
      if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    return files;
  };
  const auto load_split = [&](const char* split, std::vector<LabeledImage>& out) {
    const fs::path dir = fs::path(root) / split;
    if (!fs::is_directory(dir)) return;
    std::vector<std::string> labels;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.is_directory()) labels.push_back(e.path().filename().string());
    }
    std::sort(labels.begin(), labels.end());
    for (const auto& label : labels) {
      int index = -1;
      if (std::string_view(split) != "ood") {
        const auto it = std::find(d.class_names.begin(), d.class_names.end(), label);
        if (it == d.class_names.end()) {
          throw Error(ErrorKind::kConfig, kModule,
                      "task.source: " + (dir / label).string() + " is not a listed class");
        }
        index = static_cast<int>(it - d.class_names.begin());
      }
      for (const auto& f : images_in(dir / label)) {
        out.push_back({read_image(f.string()), label, index, std::nullopt});
      }
    }
  };
  load_split("train", d.train);
  load_split("test", d.test);
  load_split("ood", d.ood);
  // Disk order is class-major; interleave the test split so that
  // task.max_test keeps classes balanced.
  std::vector<std::vector<LabeledImage>> by_class(d.class_names.size());
  for (auto& s : d.test) by_class[s.class_index].push_back(std::move(s));
  d.test.clear();
  for (std::size_t row = 0;; ++row) {
    bool any = false;
    for (auto& bucket : by_class) {
      if (row < bucket.size()) {
        d.test.push_back(std::move(bucket[row]));
        any = true;
      }
    }
    if (!any) break;
  }
  std::vector<const LabeledImage*> all;
  for (auto* split : {&d.train, &d.test, &d.ood}) {
    for (const auto& s : *split) all.push_back(&s);
  }
  for (const auto* s : all) {
    if (!(s->image.shape() == all.front()->image.shape())) {
      throw Error(ErrorKind::kConfig, kModule, "task.source: images under " + root +
                                                   " do not share one shape");
    }
  }
  return d;
}

}  // namespace fsadv
