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


// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Every check runs the library code paths used by the CLI.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "fsadv/attack.hpp"
#include "fsadv/harness.hpp"
#include "fsadv/heads.hpp"
#include "fsadv/hub.hpp"
#include "fsadv/metrics.hpp"
#include "fsadv/model_zoo.hpp"
#include "fsadv/ood.hpp"
#include "test_support.hpp"

namespace fsadv {
namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const ToyWorldSpec& world() {
  static const ToyWorldSpec w = ToyWorldSpec::make_default();
  return w;
}

const ToyBundle& toy(int i) {
  static const std::shared_ptr<const ToyBundle> pool[3] = {
      build_toy_bundle(world(), toy_preset("toy-a")),
      build_toy_bundle(world(), toy_preset("toy-b")),
      build_toy_bundle(world(), toy_preset("toy-c"))};
  return *pool[i];
}

CampaignConfig campaign(std::initializer_list<std::pair<const char*, const char*>> kv) {
  ConfigDoc d;
  for (const auto& [k, v] : kv) d.set(k, v);
  CampaignConfig c = CampaignConfig::from_doc(d);
  c.validate();
  return c;
}

double metric(const ReportBundle& r, MetricKind k, const std::string& scope,
              const std::string& model, const std::string& source = "") {
  auto rows = r.find(k, scope, model, source);
  if (rows.size() != 1) {
    throw std::runtime_error(fmt("expected one %s row for %s/%s/%s, found %zu", to_string(k),
                                 scope.c_str(), model.c_str(), source.c_str(), rows.size()));
  }
  return rows.front().value;
}

std::vector<double> clean_scores(const ReportBundle& r, const std::string& model) {
  std::vector<double> s;
  for (const auto& rec : r.records) {
    if (rec.model_id == model && rec.provenance == Provenance::kCleanId) s.push_back(rec.ood_score);
  }
  return s;
}

std::size_t count_clean(const ReportBundle& r, const std::string& model) {
  return clean_scores(r, model).size();
}

// Clean TPR at each stored threshold, recomputed from the records with the
// at-or-above rule.
bool thresholds_hold(const ReportBundle& r, std::string* worst) {
  bool ok = !r.thresholds.empty();
  double lowest = 1.0;
  for (const auto& t : r.thresholds) {
    const auto s = clean_scores(r, t.model_id);
    const double kept =
        std::count_if(s.begin(), s.end(), [&](double v) { return v >= t.tau; }) / double(s.size());
    lowest = std::min(lowest, kept);
    ok = ok && kept >= 0.95;
  }
  if (worst) *worst = fmt("%.4f", lowest);
  return ok;
}

// ---------------------------------------------------------------------------

Outcome projection_soundness() {
  const int kRuns = 10000;
  RandomStream rng(0xF022);
  auto mlp = std::make_shared<MlpBundle>(
      MlpWeights::random({3, 32, 32}, 24, 12, 8, world().class_names(), 3), "mlp");
  const EncoderBundle* bundles[] = {&toy(0), &toy(1), &toy(2), mlp.get()};
  const auto test = generate_toy_dataset(world(), Split::kTest, 11);
  int violations = 0;
  double worst = 0.0;
  for (int run = 0; run < kRuns; ++run) {
    AttackSpec spec;
    spec.objective = rng.uniform() < 0.5 ? ObjectiveKind::kId2OodAfs : ObjectiveKind::kOod2IdTtafs;
    spec.epsilon = rng.uniform() < 0.3 ? Budget::parse(fmt("%d/255", rng.uniform_int(1, 64)))
                                       : Budget::of(rng.uniform(1e-4, 0.5));
    spec.steps = rng.uniform_int(0, 4);
    if (rng.uniform() < 0.5) spec.step_size = rng.uniform(1e-4, 1.0);
    spec.momentum_mu = rng.uniform(0.0, 2.0);
    spec.di = rng.uniform() < 0.5 ? DiversePolicy{}.scaled_to(32) : DiversePolicy::disabled();
    if (rng.uniform() < 0.5) {
      spec.ti = rng.uniform() < 0.5 ? TiKernel::gaussian(1 + 2 * rng.uniform_int(0, 3))
                                    : TiKernel::uniform(1 + 2 * rng.uniform_int(0, 3));
    }
    spec.lambda_afs = rng.uniform(0.0, 1.0);
    spec.seed = rng.next();
    spec.random_start = rng.uniform() < 0.5;

    std::vector<const EncoderBundle*> members;
    const int n = rng.uniform_int(1, 3);
    for (int m = 0; m < n; ++m) members.push_back(bundles[rng.uniform_int(0, 3)]);
    std::vector<std::vector<double>> targets;
    if (spec.objective == ObjectiveKind::kOod2IdTtafs) {
      const std::string name = world().class_names()[rng.uniform_int(0, world().num_id_classes - 1)];
      for (const auto* m : members) targets.push_back(m->text_embedding(format_prompt(name)));
    }
    ImageTensor x0;
    const double pick = rng.uniform();
    if (pick < 0.4) {
      x0 = test[rng.uniform_int(0, static_cast<int>(test.size()) - 1)].image;
    } else if (pick < 0.7) {
      x0 = make_distal_seed(world().image_shape(), rng.next());
    } else {
      // Saturated pixels exercise the box constraint.
      x0 = ImageTensor(world().image_shape());
      for (std::size_t i = 0; i < x0.size(); ++i) x0[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
    }
    const AdvResult r = run_attack(members, x0, spec, targets);
    const double dist = linf_distance(r.x_adv, x0);
    worst = std::max(worst, dist - spec.epsilon.value);
    if (dist > spec.epsilon.value + 1e-6 || r.x_adv.min() < 0.0 || r.x_adv.max() > 1.0 ||
        !r.x_adv.all_finite()) {
      ++violations;
    }
  }
  return {violations == 0,
          fmt("%d runs, %d violations, max(|x_adv-x0|_inf - eps) = %.3g", kRuns, violations, worst)};
}

Outcome gradient_fidelity() {
  RandomStream rng(0x6AD);
  const auto test = generate_toy_dataset(world(), Split::kTest, 3);
  double worst = 0.0;
  for (int pair = 0; pair < 50; ++pair) {
    const ToyBundle& b = toy(pair % 3);
    ImageTensor x = test[rng.uniform_int(0, static_cast<int>(test.size()) - 1)].image;
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i] + rng.uniform(-0.05, 0.05), 0.0, 1.0);
    const Tensor3 d = testing::random_tensor(x.shape(), rng, -1.0, 1.0);
    const ImageTensor anchor_img = make_distal_seed(x.shape(), rng.next());
    const Encoding anchor = b.forward(anchor_img);
    Objective obj;
    if (pair % 2 == 0) {
      obj = afs_objective(anchor.features);
    } else {
      const std::string name = world().class_names()[pair % world().num_id_classes];
      obj = ttafs_objective(b.text_embedding(format_prompt(name)), anchor.projected, 0.25);
    }
    const ValueAndGrad vg = value_and_grad(b, obj, x);
    double analytic = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) analytic += vg.grad[i] * d[i];
    const double h = 1e-5;
    ImageTensor xp = x, xm = x;
    xp.axpy(h, d);
    xm.axpy(-h, d);
    ObjectiveGrad scratch;
    const auto eval = [&](const ImageTensor& z) {
      const Encoding e = b.forward(z);
      scratch.d_features.assign(e.features.size(), 0.0);
      scratch.d_projected.assign(e.projected.size(), 0.0);
      scratch.d_pixels = GradTensor(z.shape());
      return obj(z, e, scratch);
    };
    const double numeric = (eval(xp) - eval(xm)) / (2 * h);
    const double rel = std::abs(analytic - numeric) / std::max(std::abs(numeric), 1e-12);
    worst = std::max(worst, rel);
  }
  return {worst < 1e-4, fmt("50 pairs (AFS and TT+AFS on toy-a/b/c), max relative error %.2e", worst)};
}

Outcome auroc_oracle() {
  RandomStream rng(0xA0C);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const int levels = t % 4 == 0 ? 2 : (t % 4 == 1 ? 10 : (t % 4 == 2 ? 1000 : 1 << 30));
    const auto draw = [&](int n) {
      std::vector<double> v(n);
      for (double& x : v) x = rng.uniform_int(0, levels) / double(levels);
      return v;
    };
    const auto pos = draw(rng.uniform_int(1, 300));
    const auto neg = draw(rng.uniform_int(1, 300));
    double wins = 0.0;
    for (double p : pos)
      for (double q : neg) wins += p > q ? 1.0 : (p == q ? 0.5 : 0.0);
    worst = std::max(worst, std::abs(auroc(pos, neg) - wins / (double(pos.size()) * neg.size())));
  }
  return {worst <= 1e-9, fmt("1000 instances with heavy ties, max |fast - pairwise| = %.2e", worst)};
}

Outcome ti_equivalence() {
  RandomStream rng(0x71);
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const int size = 1 + 2 * rng.uniform_int(0, 4);
    const Shape s{rng.uniform_int(1, 3), rng.uniform_int(size, 24), rng.uniform_int(size, 24)};
    const GradTensor g = testing::random_tensor(s, rng, -1.0, 1.0);
    // Explicit Gaussian weights, sigma = size / 3, normalized to unit sum.
    const int r = size / 2;
    const double sigma = size / 3.0;
    std::vector<double> w(size * size);
    double z = 0.0;
    for (int a = -r; a <= r; ++a)
      for (int b = -r; b <= r; ++b) z += w[(a + r) * size + b + r] = std::exp(-(a * a + b * b) / (2 * sigma * sigma));
    for (double& v : w) v /= z;
    GradTensor ref(s);
    for (int c = 0; c < s.channels; ++c)
      for (int y = 0; y < s.height; ++y)
        for (int x = 0; x < s.width; ++x) {
          double acc = 0.0;
          for (int a = -r; a <= r; ++a)
            for (int b = -r; b <= r; ++b) {
              const int yy = y - a, xx = x - b;
              if (yy < 0 || yy >= s.height || xx < 0 || xx >= s.width) continue;
              acc += w[(r - a) * size + (r - b)] * g.at(c, yy, xx);
            }
          ref.at(c, y, x) = acc;
        }
    worst = std::max(worst, linf_distance(ti_smooth(g, TiKernel::gaussian(size)), ref));
  }
  return {worst <= 1e-6, fmt("200 random tensors, kernel sizes 1-9, max abs diff %.2e", worst)};
}

Outcome whitebox_id2ood() {
  const ReportBundle r = run_campaign(campaign({}));
  const double acc = metric(r, MetricKind::kAcc, "whitebox", "toy-a", "toy-a");
  const double fnr = metric(r, MetricKind::kFnr95, "whitebox", "toy-a", "toy-a");
  const std::size_t n = count_clean(r, "toy-a");
  return {acc <= 0.10 && fnr >= 0.90 && n >= 200,
          fmt("toy-a whitebox, eps 16/255, 20 steps, mu 1: acc %.3f (<= 0.10), fnr95 %.3f (>= 0.90), n %zu",
              acc, fnr, n)};
}

Outcome blackbox_transfer() {
  const ReportBundle r = run_campaign(campaign({{"models.whitebox", "toy-a,toy-b"},
                                                {"campaign.pairwise", "true"},
                                                {"campaign.noise_baseline", "true"}}));
  const double single = metric(r, MetricKind::kFnr95, "blackbox_avg", "avg", "toy-a");
  const double ensemble = metric(r, MetricKind::kFnr95, "blackbox_avg", "avg", "toy-a+toy-b");
  const double noise_single = (metric(r, MetricKind::kFnr95, "noise", "toy-b") +
                               metric(r, MetricKind::kFnr95, "noise", "toy-c")) / 2;
  const double noise_ensemble = metric(r, MetricKind::kFnr95, "noise", "toy-c");
  const double a_to_c = metric(r, MetricKind::kFnr95, "blackbox", "toy-c", "toy-a");
  const bool ok = single > noise_single && ensemble > noise_ensemble && ensemble >= single;
  return {ok, fmt("blackbox fnr95: toy-a -> avg(b,c) %.3f vs noise %.3f; {toy-a,toy-b} -> c %.3f vs "
                  "noise %.3f; ensemble >= single; (toy-a -> c alone %.3f)",
                  single, noise_single, ensemble, noise_ensemble, a_to_c)};
}

Outcome distal_whitebox() {
  const ReportBundle r = run_campaign(campaign({{"campaign.mode", "ood2id"},
                                                {"campaign.num_distals", "100"},
                                                {"attack.steps", "500"},
                                                {"attack.step_size", "1/255"},
                                                {"attack.lambda", "0.25"},
                                                {"attack.ti.size", "5"}}));
  const double tsuc = metric(r, MetricKind::kTsuc, "whitebox", "toy-a", "toy-a");
  const double fpr = metric(r, MetricKind::kFpr95, "whitebox", "toy-a", "toy-a");
  std::size_t distals = 0;
  for (const auto& rec : r.records) distals += rec.model_id == "toy-a" && rec.provenance == Provenance::kDistal;
  return {tsuc >= 0.95 && fpr >= 0.95 && distals == 100,
          fmt("toy-a TT+AFS, 500 steps, lambda 0.25, TI k=5: %zu distals, tsuc %.3f, fpr95 %.3f (>= 0.95)",
              distals, tsuc, fpr)};
}

Outcome epsilon_sweep_monotone(std::vector<ReportBundle>* reports) {
  const CampaignConfig c = campaign({});
  const SweepReport s = epsilon_sweep(c, c.sweep_epsilons);
  const auto acc = s.series("toy-a", "whitebox", MetricKind::kAcc);
  const auto fnr = s.series("toy-a", "whitebox", MetricKind::kFnr95);
  bool ok = acc.size() == 5 && fnr.size() == 5;
  for (std::size_t i = 1; ok && i < acc.size(); ++i) ok = acc[i] <= acc[i - 1] && fnr[i] >= fnr[i - 1];
  const ReportBundle& zero = s.points.front().report;
  bool zero_clean = true;
  for (const auto& m : zero.models) {
    const std::string scope = m == "toy-a" ? "whitebox" : "blackbox";
    zero_clean = zero_clean &&
                 metric(zero, MetricKind::kAcc, scope, m, "toy-a") == metric(zero, MetricKind::kAcc, "clean", m) &&
                 metric(zero, MetricKind::kFnr95, scope, m, "toy-a") ==
                     fnr_at_threshold(clean_scores(zero, m), zero.threshold_for(m)->tau);
  }
  for (const auto& p : s.points) reports->push_back(p.report);
  std::string series;
  for (std::size_t i = 0; i < acc.size(); ++i) {
    series += fmt("%s%s: acc %.3f fnr %.3f", i ? "; " : "", s.points[i].epsilon.text.c_str(), acc[i], fnr[i]);
  }
  return {ok && zero_clean, series + (zero_clean ? "; eps 0 equals clean" : "; eps 0 differs from clean")};
}

Outcome threshold_contract(const std::vector<ReportBundle>& reports) {
  bool ok = true;
  std::string worst = "1";
  for (const auto& r : reports) {
    std::string w;
    ok = thresholds_hold(r, &w) && ok;
    worst = std::min(worst, w);
  }
  const ReportBundle r = run_campaign(campaign({{"attack.steps", "0"}}));
  ok = thresholds_hold(r, nullptr) && ok;
  std::string fnrs;
  for (const auto& m : r.models) {
    const double f = metric(r, MetricKind::kFnr95, m == "toy-a" ? "whitebox" : "blackbox", m, "toy-a");
    ok = ok && f >= 0.03 && f <= 0.07 && count_clean(r, m) >= 200;
    fnrs += fmt(" %s %.3f", m.c_str(), f);
  }
  return {ok, fmt("%zu reports, lowest clean TPR at tau %s; steps=0 fnr95 (n=%zu):%s",
                  reports.size() + 1, worst.c_str(), count_clean(r, "toy-a"), fnrs.c_str())};
}

Outcome head_correctness() {
  RandomStream rng(0x4EAD);
  // kNN against a brute-force full sort on toy features.
  const auto train = generate_toy_dataset(world(), Split::kTrain, 7);
  const auto test = generate_toy_dataset(world(), Split::kTest, 7);
  Matrix feats;
  std::vector<int> labels;
  for (const auto& s : train) {
    feats.push_back(toy(0).forward(s.image).features);
    labels.push_back(s.class_index);
  }
  int knn_mismatch = 0, knn_checked = 0;
  double worst_sum = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = rng.uniform_int(5, std::min<int>(500, feats.size()));
    Matrix bank(feats.begin(), feats.begin() + n);
    std::vector<int> y(labels.begin(), labels.begin() + n);
    if (trial % 2) {
      for (auto& row : bank)
        for (double& v : row) v = std::round(v);  // forces ties
    }
    const int k = rng.uniform_int(1, std::min(n, 15));
    const KnnMetric metric_kind = trial % 3 == 0 ? KnnMetric::kCosine : KnnMetric::kEuclidean;
    const KnnHead head(bank, y, world().num_id_classes, k, metric_kind);
    for (int q = 0; q < 25; ++q) {
      std::vector<double> query = toy(0).forward(test[rng.uniform_int(0, int(test.size()) - 1)].image).features;
      if (trial % 2)
        for (double& v : query) v = std::round(v);
      std::vector<std::pair<double, int>> all;
      for (int i = 0; i < n; ++i) {
        double dist = 0.0;
        if (metric_kind == KnnMetric::kEuclidean) {
          for (std::size_t j = 0; j < query.size(); ++j) dist += (query[j] - bank[i][j]) * (query[j] - bank[i][j]);
        } else {
          double ab = 0, aa = 0, bb = 0;
          for (std::size_t j = 0; j < query.size(); ++j) {
            ab += query[j] * bank[i][j];
            aa += query[j] * query[j];
            bb += bank[i][j] * bank[i][j];
          }
          dist = (aa == 0 || bb == 0) ? 1.0 : 1.0 - ab / (std::sqrt(aa) * std::sqrt(bb));
        }
        all.emplace_back(dist, i);
      }
      std::sort(all.begin(), all.end());
      std::vector<int> expect;
      for (int i = 0; i < k; ++i) expect.push_back(all[i].second);
      knn_mismatch += head.neighbors(query) != expect;
      ++knn_checked;
      const auto p = head.predict_proba(query);
      worst_sum = std::max(worst_sum, std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0));
    }
  }
  // Probe stationarity on each toy encoder's training features.
  double worst_grad = 0.0;
  for (int m = 0; m < 3; ++m) {
    Matrix x;
    for (const auto& s : train) x.push_back(toy(m).forward(s.image).features);
    const LinearProbeHead probe = fit_linear_probe(x, labels, world().num_id_classes);
    const ProbeObjective obj = probe_objective(probe, x, labels);
    double g2 = 0.0;
    for (double g : obj.gradient) g2 += g * g;
    worst_grad = std::max(worst_grad, std::sqrt(g2));
    for (const auto& s : test) {
      const auto p = probe.predict_proba(toy(m).forward(s.image).features);
      worst_sum = std::max(worst_sum, std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0));
    }
  }
  const bool ok = knn_mismatch == 0 && worst_grad < 1e-5 && worst_sum <= 1e-9;
  return {ok, fmt("kNN %d/%d queries match brute force; probe gradient norm max %.2e (< 1e-5); "
                  "max |sum p - 1| %.2e",
                  knn_checked - knn_mismatch, knn_checked, worst_grad, worst_sum)};
}

Outcome determinism() {
  namespace fs = std::filesystem;
  testing::TempDir a, b;
  const CampaignConfig c = campaign({{"models.whitebox", "toy-a,toy-b"}, {"campaign.noise_baseline", "true"}});
  write_report(run_campaign(c, {.workers = 1}), a.path());
  write_report(run_campaign(c, {.workers = 7}), b.path());
  bool ok = true;
  std::string sizes;
  for (const char* f : {"records.ndjson", "metrics.csv"}) {
    const std::string x = testing::slurp(a / f), y = testing::slurp(b / f);
    ok = ok && !x.empty() && x == y;
    sizes += fmt(" %s %zu bytes %s;", f, x.size(), x == y ? "identical" : "DIFFER");
  }
  return {ok, "workers 1 vs 7:" + sizes};
}

int run_all() {
  std::vector<ReportBundle> sweep_reports;
  struct Criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<Outcome()> check;
  };
  const std::vector<Criterion> criteria = {
      {1, "projection soundness", 120, projection_soundness},
      {2, "gradient fidelity", 0, gradient_fidelity},
      {3, "AUROC oracle equivalence", 0, auroc_oracle},
      {4, "TI equivalence", 0, ti_equivalence},
      {5, "whitebox ID->OOD", 300, whitebox_id2ood},
      {6, "blackbox transfer", 0, blackbox_transfer},
      {7, "distal whitebox", 600, distal_whitebox},
      {8, "epsilon sweep", 0, [&] { return epsilon_sweep_monotone(&sweep_reports); }},
      {9, "threshold contract", 0, [&] { return threshold_contract(sweep_reports); }},
      {10, "head correctness", 0, head_correctness},
      {11, "determinism", 0, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    if (c.limit_s > 0 && secs >= c.limit_s) {
      o.pass = false;
      o.detail += fmt(" [over the %.0f s limit]", c.limit_s);
    }
    failed += !o.pass;
    std::printf("%s criterion %2d %-26s %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", int(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}

}  // namespace
}  // namespace fsadv

int main() { return fsadv::run_all(); }
