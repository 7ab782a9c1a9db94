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


#include "fsadv/fsadv.h"

#include <cstdio>
#include <exception>
#include <filesystem>
#include <memory>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include "fsadv/config.hpp"
#include "fsadv/errors.hpp"
#include "fsadv/harness.hpp"
#include "fsadv/hub.hpp"
#include "fsadv/metrics.hpp"
#include "fsadv/model_zoo.hpp"

struct fsadv_config {
  fsadv::ConfigDoc doc;
  fsadv::CampaignConfig resolved;
  std::string digest;
  std::string snapshot;
  std::string value;
  std::string fetched;
};

struct fsadv_report {
  fsadv::ReportBundle bundle;
  std::string summary;
  std::string digest;
};

namespace {

thread_local std::string g_error;
thread_local std::string g_module;

fsadv_status status_of(fsadv::ErrorKind kind) {
  using fsadv::ErrorKind;
  switch (kind) {
    case ErrorKind::kConfig: return FSADV_ERR_CONFIG;
    case ErrorKind::kValidation: return FSADV_ERR_VALIDATION;
    case ErrorKind::kDegenerate: return FSADV_ERR_DEGENERATE;
    case ErrorKind::kUnsupported: return FSADV_ERR_UNSUPPORTED;
    case ErrorKind::kLookup: return FSADV_ERR_LOOKUP;
    case ErrorKind::kNumeric: return FSADV_ERR_NUMERIC;
    case ErrorKind::kNotFound: return FSADV_ERR_NOT_FOUND;
    case ErrorKind::kIntegrity: return FSADV_ERR_INTEGRITY;
    case ErrorKind::kNetwork: return FSADV_ERR_NETWORK;
    case ErrorKind::kIo: return FSADV_ERR_IO;
    case ErrorKind::kMigration: return FSADV_ERR_MIGRATION;
    case ErrorKind::kBuild: return FSADV_ERR_BUILD;
  }
  return FSADV_ERR_INTERNAL;
}

fsadv_status fail(fsadv_status status, std::string module, std::string message) {
  g_module = std::move(module);
  g_error = std::move(message);
  return status;
}

// Runs body and converts exceptions into status codes.
template <typename F>
fsadv_status guarded(F&& body) {
  g_error.clear();
  g_module.clear();
  try {
    body();
    return FSADV_OK;
  } catch (const fsadv::Error& e) {
    std::string message = e.what();
    const std::string prefix = e.module() + ": ";
    if (message.starts_with(prefix)) message.erase(0, prefix.size());
    return fail(status_of(e.kind()), e.module(), std::move(message));
  } catch (const std::bad_alloc&) {
    return fail(FSADV_ERR_INTERNAL, "api", "out of memory");
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(FSADV_ERR_IO, "api", e.what());
  } catch (const std::exception& e) {
    return fail(FSADV_ERR_INTERNAL, "api", e.what());
  }
}

fsadv_status null_argument(const char* name) {
  return fail(FSADV_ERR_ARGUMENT, "api", std::string("null argument: ") + name);
}

void refresh(fsadv_config& c) {
  c.resolved = fsadv::CampaignConfig::from_doc(c.doc);
  c.resolved.validate();
  c.digest = c.resolved.digest();
  c.snapshot = c.resolved.snapshot();
}

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string summarize(const fsadv::ReportBundle& r) {
  std::ostringstream out;
  out << "mode " << r.mode << "  head " << r.head << "  detector " << r.detector
      << "  config " << r.config_digest << "\n";
  for (const auto& t : r.thresholds) {
    out << "tau " << t.model_id << " = " << format_value(t.tau) << " (clean tpr "
        << format_value(t.clean_tpr) << ", n " << t.n_clean << ")\n";
  }
  for (const auto& m : r.metrics) {
    out << m.scope << " " << fsadv::to_string(m.metric) << " " << m.model_id;
    if (!m.whitebox.empty()) out << " <- " << m.whitebox;
    out << " = " << format_value(m.value) << "\n";
  }
  for (const auto& f : r.failures) out << "failed " << f.model_id << ": " << f.error << "\n";
  for (const auto& w : r.warnings) out << "warning: " << w << "\n";
  return out.str();
}

}  // namespace

extern "C" {

const char* fsadv_version(void) { return "0.1.0"; }

const char* fsadv_status_name(fsadv_status status) {
  switch (status) {
    case FSADV_OK: return "ok";
    case FSADV_ERR_CONFIG: return "config";
    case FSADV_ERR_VALIDATION: return "validation";
    case FSADV_ERR_DEGENERATE: return "degenerate";
    case FSADV_ERR_UNSUPPORTED: return "unsupported";
    case FSADV_ERR_LOOKUP: return "lookup";
    case FSADV_ERR_NUMERIC: return "numeric";
    case FSADV_ERR_NOT_FOUND: return "not_found";
    case FSADV_ERR_INTEGRITY: return "integrity";
    case FSADV_ERR_NETWORK: return "network";
    case FSADV_ERR_IO: return "io";
    case FSADV_ERR_MIGRATION: return "migration";
    case FSADV_ERR_BUILD: return "build";
    case FSADV_ERR_INTERNAL: return "internal";
    case FSADV_ERR_ARGUMENT: return "argument";
  }
  return "unknown";
}

const char* fsadv_last_error(void) { return g_error.c_str(); }
const char* fsadv_last_error_module(void) { return g_module.c_str(); }

int fsadv_exit_code(fsadv_status status) {
  switch (status) {
    case FSADV_OK: return 0;
    case FSADV_ERR_CONFIG:
    case FSADV_ERR_VALIDATION:
    case FSADV_ERR_LOOKUP:
    case FSADV_ERR_UNSUPPORTED:
    case FSADV_ERR_BUILD:
    case FSADV_ERR_ARGUMENT:
      return 1;
    default:
      return 2;
  }
}

fsadv_status fsadv_config_load(const char* path, fsadv_config** out) {
  if (out == nullptr) return null_argument("out");
  *out = nullptr;
  return guarded([&] {
    auto c = std::make_unique<fsadv_config>();
    if (path != nullptr) c->doc = fsadv::load_config(path);
    refresh(*c);
    *out = c.release();
  });
}

fsadv_status fsadv_config_set(fsadv_config* config, const char* assignment) {
  if (config == nullptr) return null_argument("config");
  if (assignment == nullptr) return null_argument("assignment");
  return guarded([&] {
    fsadv::ConfigDoc saved = config->doc;
    try {
      fsadv::apply_override(config->doc, assignment);
      refresh(*config);
    } catch (...) {
      config->doc = std::move(saved);
      throw;
    }
  });
}

fsadv_status fsadv_config_digest(fsadv_config* config, const char** out) {
  if (config == nullptr) return null_argument("config");
  if (out == nullptr) return null_argument("out");
  *out = config->digest.c_str();
  return guarded([] {});
}

fsadv_status fsadv_config_snapshot(fsadv_config* config, const char** out) {
  if (config == nullptr) return null_argument("config");
  if (out == nullptr) return null_argument("out");
  *out = config->snapshot.c_str();
  return guarded([] {});
}

fsadv_status fsadv_config_get(fsadv_config* config, const char* key, const char** out) {
  if (config == nullptr) return null_argument("config");
  if (key == nullptr) return null_argument("key");
  if (out == nullptr) return null_argument("out");
  return guarded([&] {
    fsadv::ConfigDoc resolved = config->resolved.to_doc();
    const std::string* v = resolved.find(key);
    if (v == nullptr) {
      throw fsadv::Error(fsadv::ErrorKind::kLookup, "harness",
                         std::string("unknown config key '") + key + "'");
    }
    config->value = *v;
    *out = config->value.c_str();
  });
}

void fsadv_config_free(fsadv_config* config) { delete config; }

size_t fsadv_config_key_count(void) { return fsadv::config_keys().size(); }

fsadv_status fsadv_config_key_info(size_t index, const char** key, const char** description,
                                   const char** commands) {
  const auto& keys = fsadv::config_keys();
  if (index >= keys.size()) {
    return fail(FSADV_ERR_ARGUMENT, "api", "config key index out of range");
  }
  if (key != nullptr) *key = keys[index].key;
  if (description != nullptr) *description = keys[index].description;
  if (commands != nullptr) *commands = keys[index].commands;
  return guarded([] {});
}

fsadv_status fsadv_toy_export(const fsadv_config* config) {
  if (config == nullptr) return null_argument("config");
  return guarded([&] {
    const auto& c = config->resolved;
    if (c.task.source != "toy") {
      throw fsadv::Error(fsadv::ErrorKind::kConfig, "harness",
                         "task.source must be 'toy' to export the toy dataset");
    }
    fsadv::export_toy_dataset(c.task.world, c.task.seed, c.output_dir);
  });
}

fsadv_status fsadv_model_fetch(fsadv_config* config, const char* model_id, const char** out_dir) {
  if (config == nullptr) return null_argument("config");
  if (model_id == nullptr) return null_argument("model_id");
  return guarded([&] {
    auto hub = fsadv::HubClient::from_env(config->resolved.hub_url, config->resolved.cache_dir);
    config->fetched = hub.fetch(model_id);
    if (out_dir != nullptr) *out_dir = config->fetched.c_str();
  });
}

fsadv_status fsadv_run_campaign(const fsadv_config* config, int workers, const char* grid_dir,
                                fsadv_report** out) {
  if (config == nullptr) return null_argument("config");
  if (out == nullptr) return null_argument("out");
  *out = nullptr;
  return guarded([&] {
    fsadv::RunOptions options;
    options.workers = workers < 0 ? 0 : workers;
    if (grid_dir != nullptr) options.grid_dir = grid_dir;
    auto r = std::make_unique<fsadv_report>();
    r->bundle = fsadv::run_campaign(config->resolved, options);
    *out = r.release();
  });
}

fsadv_status fsadv_run_sweep(const fsadv_config* config, int workers, const char* dir,
                             const char** out_summary) {
  if (config == nullptr) return null_argument("config");
  if (dir == nullptr) return null_argument("dir");
  thread_local std::string summary;
  return guarded([&] {
    fsadv::RunOptions options;
    options.workers = workers < 0 ? 0 : workers;
    auto sweep =
        fsadv::epsilon_sweep(config->resolved, config->resolved.sweep_epsilons, options);
    fsadv::write_sweep(sweep, dir);
    std::ostringstream text;
    text << "sweep config " << sweep.config_digest << "\n";
    for (const auto& p : sweep.points) {
      text << "epsilon " << p.epsilon.text << "\n";
      for (const auto& m : p.report.metrics) {
        if (m.scope == "clean") continue;
        text << "  " << m.scope << " " << fsadv::to_string(m.metric) << " " << m.model_id
             << " = " << format_value(m.value) << "\n";
      }
    }
    summary = text.str();
    if (out_summary != nullptr) *out_summary = summary.c_str();
  });
}

fsadv_status fsadv_report_write(const fsadv_report* report, const char* dir) {
  if (report == nullptr) return null_argument("report");
  if (dir == nullptr) return null_argument("dir");
  return guarded([&] { fsadv::write_report(report->bundle, dir); });
}

fsadv_status fsadv_report_read(const char* dir, fsadv_report** out) {
  if (dir == nullptr) return null_argument("dir");
  if (out == nullptr) return null_argument("out");
  *out = nullptr;
  return guarded([&] {
    auto r = std::make_unique<fsadv_report>();
    r->bundle = fsadv::read_report(dir);
    *out = r.release();
  });
}

fsadv_status fsadv_report_render(const fsadv_report* report, const char* dir,
                                 const fsadv_config* style, size_t* out_count) {
  if (report == nullptr) return null_argument("report");
  if (dir == nullptr) return null_argument("dir");
  return guarded([&] {
    fsadv::RenderStyle s = style != nullptr ? style->resolved.render : fsadv::RenderStyle{};
    auto files = fsadv::render_histograms(report->bundle, dir, s);
    if (out_count != nullptr) *out_count = files.size();
  });
}

fsadv_status fsadv_report_summary(fsadv_report* report, const char** out) {
  if (report == nullptr) return null_argument("report");
  if (out == nullptr) return null_argument("out");
  return guarded([&] {
    report->summary = summarize(report->bundle);
    *out = report->summary.c_str();
  });
}

fsadv_status fsadv_report_metric(const fsadv_report* report, const char* metric,
                                 const char* scope, const char* model_id, const char* whitebox,
                                 double* out) {
  if (report == nullptr) return null_argument("report");
  if (metric == nullptr) return null_argument("metric");
  if (scope == nullptr) return null_argument("scope");
  if (out == nullptr) return null_argument("out");
  return guarded([&] {
    auto rows = report->bundle.find(fsadv::parse_metric(metric), scope,
                                    model_id != nullptr ? model_id : "",
                                    whitebox != nullptr ? whitebox : "");
    if (rows.empty()) {
      throw fsadv::Error(fsadv::ErrorKind::kLookup, "metrics",
                         std::string("no ") + metric + " row for scope '" + scope + "'");
    }
    *out = rows.front().value;
  });
}

int fsadv_report_partial(const fsadv_report* report) {
  return report != nullptr && report->bundle.partial() ? 1 : 0;
}

fsadv_status fsadv_report_digest(fsadv_report* report, const char** out) {
  if (report == nullptr) return null_argument("report");
  if (out == nullptr) return null_argument("out");
  report->digest = report->bundle.config_digest;
  *out = report->digest.c_str();
  return guarded([] {});
}

void fsadv_report_free(fsadv_report* report) { delete report; }

}  // extern "C"
