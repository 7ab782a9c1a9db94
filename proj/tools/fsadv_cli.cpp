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


// Command-line front end. Talks to the library only through the C API.

#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fsadv/fsadv.h"

namespace {

constexpr int kPartialExit = 3;

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  int workers = 0;
};

// Failures detected by the front end itself are printed where they occur.
int report_failure(fsadv_status status) {
  if (*fsadv_last_error() == '\0') return fsadv_exit_code(status);
  const char* module = fsadv_last_error_module();
  std::fprintf(stderr, "fsadv: %s error in %s: %s\n", fsadv_status_name(status),
               *module != '\0' ? module : "cli", fsadv_last_error());
  return fsadv_exit_code(status);
}

// Owns a handle for the duration of one command.
template <typename T, void (*Free)(T*)>
class Handle {
 public:
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(ptr_); }
  T** out() { return &ptr_; }
  T* get() const { return ptr_; }

 private:
  T* ptr_ = nullptr;
};
using Config = Handle<fsadv_config, fsadv_config_free>;
using Report = Handle<fsadv_report, fsadv_report_free>;

std::string keys_for(const std::string& command) {
  std::string text = "\nConfig keys read by " + command + ":\n";
  for (size_t i = 0; i < fsadv_config_key_count(); ++i) {
    const char* key = nullptr;
    const char* description = nullptr;
    const char* commands = nullptr;
    if (fsadv_config_key_info(i, &key, &description, &commands) != FSADV_OK) continue;
    std::string list = std::string(" ") + commands + " ";
    if (list.find(" " + command + " ") == std::string::npos) continue;
    char line[256];
    std::snprintf(line, sizeof line, "  %-24s %s\n", key, description);
    text += line;
  }
  return text;
}

// Loads the config, applies --set overrides in order, pins the mode when the
// command implies one, and prints the digest.
fsadv_status load(const Common& common, const char* mode, Config& config) {
  fsadv_status s =
      fsadv_config_load(common.config_path.empty() ? nullptr : common.config_path.c_str(),
                        config.out());
  if (s != FSADV_OK) return s;
  if (mode != nullptr) {
    s = fsadv_config_set(config.get(), (std::string("campaign.mode=") + mode).c_str());
    if (s != FSADV_OK) return s;
  }
  for (const auto& o : common.overrides) {
    s = fsadv_config_set(config.get(), o.c_str());
    if (s != FSADV_OK) return s;
  }
  if (mode != nullptr) {
    const char* resolved = nullptr;
    s = fsadv_config_get(config.get(), "campaign.mode", &resolved);
    if (s != FSADV_OK) return s;
    if (std::string(resolved) != mode) {
      std::fprintf(stderr, "fsadv: config error in cli: campaign.mode: '%s' conflicts with the command\n",
                   resolved);
      return FSADV_ERR_CONFIG;
    }
  }
  const char* digest = nullptr;
  s = fsadv_config_digest(config.get(), &digest);
  if (s != FSADV_OK) return s;
  std::printf("config digest: %s\n", digest);
  return FSADV_OK;
}

std::string output_dir(Config& config) {
  const char* dir = nullptr;
  if (fsadv_config_get(config.get(), "campaign.output_dir", &dir) != FSADV_OK) return "fsadv-out";
  return dir;
}

int finish(fsadv_status s) { return s == FSADV_OK ? 0 : report_failure(s); }

int run_toy_data(const Common& common) {
  Config config;
  fsadv_status s = load(common, nullptr, config);
  if (s == FSADV_OK) s = fsadv_toy_export(config.get());
  if (s == FSADV_OK) std::printf("toy dataset written to %s\n", output_dir(config).c_str());
  return finish(s);
}

int run_model_fetch(const Common& common, std::vector<std::string> ids) {
  Config config;
  fsadv_status s = load(common, nullptr, config);
  if (s != FSADV_OK) return finish(s);
  if (ids.empty()) {
    const char* pool = nullptr;
    if ((s = fsadv_config_get(config.get(), "models.pool", &pool)) != FSADV_OK) return finish(s);
    std::string list = pool;
    size_t start = 0;
    while (start <= list.size()) {
      size_t end = list.find(',', start);
      if (end == std::string::npos) end = list.size();
      std::string id = list.substr(start, end - start);
      if (!id.empty() && id.rfind("toy", 0) != 0) ids.push_back(id);
      start = end + 1;
    }
  }
  for (const auto& id : ids) {
    const char* dir = nullptr;
    if ((s = fsadv_model_fetch(config.get(), id.c_str(), &dir)) != FSADV_OK) return finish(s);
    std::printf("%s -> %s\n", id.c_str(), dir);
  }
  if (ids.empty()) std::printf("nothing to fetch: toy bundles are built locally\n");
  return 0;
}

int run_campaign(const Common& common, const char* mode) {
  Config config;
  fsadv_status s = load(common, mode, config);
  if (s != FSADV_OK) return finish(s);
  const std::string out = output_dir(config);
  const std::string plots = out + "/plots";
  const char* grid_setting = nullptr;
  bool grids = fsadv_config_get(config.get(), "render.grid_samples", &grid_setting) == FSADV_OK &&
               std::string(grid_setting) != "0" && std::string(mode) != "clean";
  std::string grid_dir = plots + "/grids";
  Report report;
  s = fsadv_run_campaign(config.get(), common.workers, grids ? grid_dir.c_str() : nullptr,
                         report.out());
  if (s != FSADV_OK) return finish(s);
  if ((s = fsadv_report_write(report.get(), out.c_str())) != FSADV_OK) return finish(s);
  size_t panels = 0;
  if ((s = fsadv_report_render(report.get(), plots.c_str(), config.get(), &panels)) != FSADV_OK) {
    return finish(s);
  }
  const char* summary = nullptr;
  if ((s = fsadv_report_summary(report.get(), &summary)) != FSADV_OK) return finish(s);
  std::printf("%s", summary);
  std::printf("artifacts in %s (%zu histogram panels)\n", out.c_str(), panels);
  if (fsadv_report_partial(report.get())) {
    std::fprintf(stderr, "fsadv: campaign is partial, some models failed to load\n");
    return kPartialExit;
  }
  return 0;
}

int run_sweep(const Common& common) {
  Config config;
  fsadv_status s = load(common, "id2ood", config);
  if (s != FSADV_OK) return finish(s);
  const std::string out = output_dir(config);
  const char* summary = nullptr;
  s = fsadv_run_sweep(config.get(), common.workers, out.c_str(), &summary);
  if (s != FSADV_OK) return finish(s);
  std::printf("%s", summary);
  std::printf("artifacts in %s\n", out.c_str());
  return 0;
}

int run_report_render(const Common& common, std::string report_dir) {
  Config config;
  fsadv_status s = load(common, nullptr, config);
  if (s != FSADV_OK) return finish(s);
  const std::string out = output_dir(config);
  if (report_dir.empty()) report_dir = out;
  Report report;
  if ((s = fsadv_report_read(report_dir.c_str(), report.out())) != FSADV_OK) return finish(s);
  const std::string plots = out + "/plots";
  size_t panels = 0;
  s = fsadv_report_render(report.get(), plots.c_str(), config.get(), &panels);
  if (s != FSADV_OK) return finish(s);
  std::printf("%zu histogram panels written to %s\n", panels, plots.c_str());
  return 0;
}

void add_common(CLI::App* cmd, Common& common) {
  cmd->add_option("--config", common.config_path, "TOML config file")->check(CLI::ExistingFile);
  cmd->add_option("--set", common.overrides, "override a config key, key=value (repeatable)")
      ->take_all();
  cmd->add_option("--workers", common.workers, "worker threads, 0 for all cores")
      ->check(CLI::NonNegativeNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial OOD evaluation of frozen encoders"};
  app.require_subcommand(1);
  app.set_version_flag("--version", fsadv_version());

  Common common;
  std::vector<std::string> fetch_ids;
  std::string report_dir;
  struct Spec {
    const char* name;
    const char* help;
  };
  const Spec specs[] = {
      {"toy-data", "export the toy dataset as PNG trees"},
      {"model-fetch", "download hub models into the cache"},
      {"attack-id2ood", "attack clean test images away from the ID region"},
      {"attack-ood2id", "craft distal inputs that pass as ID"},
      {"eval-clean", "clean accuracy and OOD detection"},
      {"sweep", "ID->OOD attack across sweep.epsilons"},
      {"report-render", "render histograms from a stored report"},
  };
  for (const auto& spec : specs) {
    CLI::App* cmd = app.add_subcommand(spec.name, spec.help);
    add_common(cmd, common);
    cmd->footer(keys_for(spec.name));
  }
  app.get_subcommand("model-fetch")->add_option("ids", fetch_ids, "model ids (default: models.pool)");
  app.get_subcommand("report-render")
      ->add_option("--report", report_dir, "report directory (default campaign.output_dir)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Help and version exit 0; any usage error is a configuration error.
    return app.exit(e) == 0 ? 0 : 1;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  if (command == "toy-data") return run_toy_data(common);
  if (command == "model-fetch") return run_model_fetch(common, fetch_ids);
  if (command == "attack-id2ood") return run_campaign(common, "id2ood");
  if (command == "attack-ood2id") return run_campaign(common, "ood2id");
  if (command == "eval-clean") return run_campaign(common, "clean");
  if (command == "sweep") return run_sweep(common);
  return run_report_render(common, report_dir);
}
