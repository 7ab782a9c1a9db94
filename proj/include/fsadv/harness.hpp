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


#ifndef FSADV_HARNESS_HPP_
#define FSADV_HARNESS_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fsadv/attack.hpp"
#include "fsadv/config.hpp"
#include "fsadv/heads.hpp"
#include "fsadv/metrics.hpp"
#include "fsadv/model_zoo.hpp"
#include "fsadv/ood.hpp"

namespace fsadv {

enum class CampaignMode { kId2Ood, kOod2Id, kClean };
const char* to_string(CampaignMode mode);
CampaignMode parse_campaign_mode(std::string_view text);

enum class Provenance { kCleanId, kAdvId, kDistal, kNaturalOod, kNoiseId };
const char* to_string(Provenance p);
Provenance parse_provenance(std::string_view text);

// Either the generated toy world or a directory tree laid out as
// <root>/<split>/<label>/*.png|jpg, with OOD images under <root>/ood.
struct TaskConfig {
  std::string source = "toy";
  ToyWorldSpec world = ToyWorldSpec::make_default();
  std::uint64_t seed = 7;
  // Use only the first n test images (0 keeps all).
  int max_test = 0;
};

struct HeadConfig {
  HeadScheme scheme = HeadScheme::kZeroShot;
  int k = 5;
  // "auto" picks cosine on projected embeddings for bundles with a text
  // tower and euclidean on features otherwise.
  std::string metric = "auto";
  std::optional<double> l2_strength;
  int max_iter = 1000;
};

struct RenderStyle {
  int bins = 30;
  int width = 480;
  int height = 300;
  // Adversarial examples per image grid; 0 disables grids.
  int grid_samples = 8;
};

struct CampaignConfig {
  CampaignMode mode = CampaignMode::kId2Ood;
  TaskConfig task;
  std::vector<std::string> model_pool{"toy-a", "toy-b", "toy-c"};
  std::vector<std::string> whitebox_ids{"toy-a"};
  // Also attack from every pool member alone, filling the transfer matrix.
  bool pairwise = false;
  HeadConfig head;
  DetectorConfig detector;
  ThresholdPolicy threshold;
  AttackSpec attack;
  int num_distals = 100;
  bool noise_baseline = false;
  std::vector<Budget> sweep_epsilons;
  std::uint64_t seed = 0;
  std::string output_dir = "fsadv-out";
  std::string cache_dir;
  std::string hub_url;
  RenderStyle render;

  CampaignConfig();

  // Unknown keys and bad values raise kConfig naming the key.
  static CampaignConfig from_doc(const ConfigDoc& doc);
  // Every key with its resolved value.
  ConfigDoc to_doc() const;
  void validate() const;

  std::string snapshot() const { return to_doc().to_toml(); }
  std::string digest() const;
  std::string attack_digest() const;
};

struct ConfigKey {
  const char* key;
  const char* description;
  // Commands that read the key, space separated.
  const char* commands;
};
const std::vector<ConfigKey>& config_keys();

struct ScoreRecord {
  std::string sample_id;
  Provenance provenance = Provenance::kCleanId;
  std::string model_id;
  std::string head;
  double ood_score = 0.0;
  int predicted_class = -1;
  int true_or_target_class = -1;
  // Set for advID and distal records only.
  std::optional<std::string> attack_config_digest;
  // Whitebox members joined with '+', or "noise" for the noise baseline.
  std::string source;
  std::string head_fingerprint;

  friend bool operator==(const ScoreRecord&, const ScoreRecord&) = default;
};

struct ThresholdRow {
  std::string model_id;
  std::string head;
  std::string detector;
  double tau = 0.0;
  double tpr_target = 0.95;
  double clean_tpr = 0.0;
  std::size_t n_clean = 0;

  friend bool operator==(const ThresholdRow&, const ThresholdRow&) = default;
};

// One (perturbation source, target model) pair. For ID->OOD the success
// measures are accuracy and FNR; for OOD->ID targeted success and FPR.
struct TransferCell {
  std::string source;
  std::string target;
  bool whitebox = false;
  double accuracy_or_tsuc = 0.0;
  double fnr_or_fpr = 0.0;
  double auroc = 0.0;
  std::size_t n = 0;

  friend bool operator==(const TransferCell&, const TransferCell&) = default;
};

struct ModelFailure {
  std::string model_id;
  std::string error;

  friend bool operator==(const ModelFailure&, const ModelFailure&) = default;
};

inline constexpr int kReportSchemaVersion = 1;

struct ReportBundle {
  int schema_version = kReportSchemaVersion;
  std::string mode;
  std::string config_snapshot;
  std::string config_digest;
  std::string attack_digest;
  std::string head;
  std::string detector;
  double tpr_target = 0.95;
  // Models that loaded; failures are listed separately.
  std::vector<std::string> models;
  // Whitebox sets, each joined with '+'.
  std::vector<std::string> sources;
  std::vector<ScoreRecord> records;
  std::vector<MetricRow> metrics;
  std::vector<ThresholdRow> thresholds;
  std::vector<TransferCell> transfer;
  std::vector<ModelFailure> failures;
  std::vector<std::string> warnings;

  bool partial() const { return !failures.empty(); }
  // Rows matching all given non-empty fields.
  std::vector<MetricRow> find(MetricKind metric, std::string_view scope,
                              std::string_view model_id = {},
                              std::string_view whitebox = {}) const;
  const ThresholdRow* threshold_for(std::string_view model_id) const;

  friend bool operator==(const ReportBundle&, const ReportBundle&) = default;
};

struct Tables {
  std::vector<MetricRow> metrics;
  std::vector<ThresholdRow> thresholds;
  std::vector<TransferCell> transfer;
};
// Derives every table from the records and the report header alone.
Tables compute_tables(const ReportBundle& report);

struct RunOptions {
  // 0 means the hardware concurrency.
  int workers = 0;
  // When set, adversarial image grids are written here.
  std::string grid_dir;
};

struct TaskData {
  std::vector<std::string> class_names;
  std::vector<LabeledImage> train;
  std::vector<LabeledImage> test;
  std::vector<LabeledImage> ood;
};
TaskData load_task(const TaskConfig& task);
// Reads <root>/<split>/<label>/* for train, test and ood. Class order comes
// from <root>/classes.txt when present, else from sorted test labels.
TaskData load_image_tree(const std::string& root);

ReportBundle run_campaign(const CampaignConfig& config, const RunOptions& options = {});

struct SweepPoint {
  Budget epsilon;
  ReportBundle report;
};

struct SweepReport {
  std::string config_digest;
  std::vector<SweepPoint> points;

  // Metric values across points for one (model, scope, metric).
  std::vector<double> series(std::string_view model_id, std::string_view scope,
                             MetricKind metric) const;
};

// Runs the attack at every epsilon, reusing one clean evaluation. A zero
// budget leaves the clean images untouched.
SweepReport epsilon_sweep(const CampaignConfig& config, const std::vector<Budget>& epsilons,
                          const RunOptions& options = {});

struct NoiseBaseline {
  std::vector<ScoreRecord> records;
  std::vector<MetricRow> metrics;
};
// Test images plus U(-eps, eps) noise, clipped to the unit box, evaluated
// like adversarial inputs.
NoiseBaseline noise_baseline(const CampaignConfig& config, const Budget& epsilon,
                             const RunOptions& options = {});

// records.ndjson, metrics.csv, thresholds.csv, transfer_matrix.csv,
// config.snapshot and report.json.
void write_report(const ReportBundle& report, const std::string& dir);
// Throws kNotFound naming a missing file and kMigration on version mismatch.
ReportBundle read_report(const std::string& dir);

void write_sweep(const SweepReport& sweep, const std::string& dir);

// One panel per (model, head) at <dir>/hist_<model>_<head>.png. Returns the
// files written; panels without scores are skipped with a warning.
std::vector<std::string> render_histograms(const ReportBundle& report, const std::string& dir,
                                           const RenderStyle& style = {},
                                           std::vector<std::string>* warnings = nullptr);

// Pixel column of score s on a panel of the given style.
int histogram_x(const RenderStyle& style, double lo, double hi, double s);

void write_image_grid(const std::vector<ImageTensor>& images, int columns,
                      const std::string& path);

}  // namespace fsadv

#endif  // FSADV_HARNESS_HPP_
