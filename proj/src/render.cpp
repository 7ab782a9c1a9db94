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


#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <map>

#include "fsadv/errors.hpp"
#include "fsadv/harness.hpp"
#include "fsadv/image_io.hpp"
#include "file_util.hpp"

namespace fsadv {

namespace {

constexpr int kLeft = 40;
constexpr int kRight = 12;
constexpr int kTop = 20;
constexpr int kBottom = 28;

using Rgb = std::array<std::uint8_t, 3>;

struct Series {
  Provenance provenance;
  Rgb color;
  std::vector<double> scores;
};

void hline(Raster& r, int x0, int x1, int y, Rgb c) {
  for (int x = std::max(0, x0); x <= std::min(r.width - 1, x1); ++x) r.set(x, y, c[0], c[1], c[2]);
}
void vline(Raster& r, int x, int y0, int y1, Rgb c) {
  if (y0 > y1) std::swap(y0, y1);
  for (int y = std::max(0, y0); y <= std::min(r.height - 1, y1); ++y) r.set(x, y, c[0], c[1], c[2]);
}

std::string token(std::string s) {
  for (char& c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
  }
  return s;
}

}  // namespace

int histogram_x(const RenderStyle& style, double lo, double hi, double s) {
  const int plot_w = style.width - kLeft - kRight;
  const double t = hi > lo ? (s - lo) / (hi - lo) : 0.5;
  return kLeft + static_cast<int>(std::lround(std::clamp(t, 0.0, 1.0) * (plot_w - 1)));
}

std::vector<std::string> render_histograms(const ReportBundle& report, const std::string& dir,
                                           const RenderStyle& style,
                                           std::vector<std::string>* warnings) {
  std::vector<std::string> written;
  std::filesystem::create_directories(dir);
  const std::string primary = report.sources.empty() ? "" : report.sources.front();
  for (const auto& model : report.models) {
    std::vector<Series> series{
        {Provenance::kCleanId, {31, 119, 180}, {}},
        {report.mode == "ood2id" ? Provenance::kDistal : Provenance::kAdvId, {214, 39, 40}, {}},
        {Provenance::kNaturalOod, {44, 160, 44}, {}},
        {Provenance::kNoiseId, {127, 127, 127}, {}},
    };
    for (const auto& r : report.records) {
      if (r.model_id != model) continue;
      for (auto& s : series) {
        const bool attacked = s.provenance == Provenance::kAdvId || s.provenance == Provenance::kDistal;
        if (r.provenance == s.provenance && (!attacked || r.source == primary)) {
          s.scores.push_back(r.ood_score);
        }
      }
    }
    const ThresholdRow* th = report.threshold_for(model);
    if (series.front().scores.empty() || th == nullptr) {
      if (warnings) warnings->push_back("no clean scores for " + model + "; panel skipped");
      continue;
    }
    double lo = th->tau;
    double hi = th->tau;
    for (const auto& s : series) {
      for (double v : s.scores) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
    if (hi - lo < 1e-9) {
      lo -= 0.5;
      hi += 0.5;
    }

    Raster img(style.width, style.height);
    const int plot_h = style.height - kTop - kBottom;
    const int base_y = kTop + plot_h - 1;
    // Density per bin, scaled to the tallest bin over all series.
    std::vector<std::vector<double>> dens;
    double peak = 0.0;
    for (const auto& s : series) {
      std::vector<double> d(style.bins, 0.0);
      for (double v : s.scores) {
        int b = static_cast<int>((v - lo) / (hi - lo) * style.bins);
        d[std::clamp(b, 0, style.bins - 1)] += 1.0;
      }
      for (double& x : d) {
        x = s.scores.empty() ? 0.0 : x / static_cast<double>(s.scores.size());
        peak = std::max(peak, x);
      }
      dens.push_back(std::move(d));
    }
    for (std::size_t si = 0; si < series.size(); ++si) {
      if (series[si].scores.empty()) continue;
      const Rgb c = series[si].color;
      int prev_y = base_y;
      for (int b = 0; b < style.bins; ++b) {
        const int x0 = histogram_x(style, lo, hi, lo + (hi - lo) * b / style.bins);
        const int x1 = histogram_x(style, lo, hi, lo + (hi - lo) * (b + 1) / style.bins);
        const int y = base_y - static_cast<int>(std::lround(dens[si][b] / peak * (plot_h - 1)));
        vline(img, x0, prev_y, y, c);
        hline(img, x0, x1, y, c);
        prev_y = y;
      }
      vline(img, histogram_x(style, lo, hi, hi), prev_y, base_y, c);
      // Legend swatch.
      for (int dy = 0; dy < 8; ++dy) hline(img, kLeft + 14 * static_cast<int>(si), kLeft + 14 * static_cast<int>(si) + 9, 6 + dy, c);
    }
    const Rgb black{0, 0, 0};
    hline(img, kLeft, style.width - kRight - 1, base_y + 1, black);
    vline(img, kLeft - 1, kTop, base_y + 1, black);
    const int tau_x = histogram_x(style, lo, hi, th->tau);
    for (int y = kTop; y <= base_y; ++y) {
      if (((y - kTop) / 4) % 2 == 0) img.set(tau_x, y, 0, 0, 0);
    }
    const std::string path = dir + "/hist_" + token(model) + "_" + token(report.head) + ".png";
    write_png(path, img,
              {{"model", model},
               {"head", report.head},
               {"detector", report.detector},
               {"tau", detail::format_double(th->tau)},
               {"tau_x", std::to_string(tau_x)},
               {"lo", detail::format_double(lo)},
               {"hi", detail::format_double(hi)}});
    written.push_back(path);
  }
  return written;
}

void write_image_grid(const std::vector<ImageTensor>& images, int columns, const std::string& path) {
  if (images.empty() || columns < 1) {
    throw Error(ErrorKind::kValidation, "harness", "image grid needs images and columns >= 1");
  }
  constexpr int kUpscale = 2;
  constexpr int kGap = 2;
  const Shape s = images.front().shape();
  const int tile_w = s.width * kUpscale;
  const int tile_h = s.height * kUpscale;
  const int rows = (static_cast<int>(images.size()) + columns - 1) / columns;
  Raster grid(columns * (tile_w + kGap) + kGap, rows * (tile_h + kGap) + kGap);
  for (std::size_t i = 0; i < images.size(); ++i) {
    const Raster tile = to_raster(images[i], kUpscale);
    const int ox = kGap + static_cast<int>(i % columns) * (tile_w + kGap);
    const int oy = kGap + static_cast<int>(i / columns) * (tile_h + kGap);
    for (int y = 0; y < tile.height; ++y) {
      for (int x = 0; x < tile.width; ++x) {
        const auto* p = tile.pixel(x, y);
        grid.set(ox + x, oy + y, p[0], p[1], p[2]);
      }
    }
  }
  std::filesystem::create_directories(std::filesystem::path(path).parent_path());
  write_png(path, grid);
}

}  // namespace fsadv
