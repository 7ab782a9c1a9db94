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

#ifndef FSADV_IMAGE_IO_HPP_
#define FSADV_IMAGE_IO_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fsadv/tensor.hpp"

namespace fsadv {

// 8-bit interleaved raster used for plots.
struct Raster {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // width * height * 3

  Raster(int w, int h, std::uint8_t fill = 255)
      : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, fill) {}
  void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b);
  std::uint8_t* pixel(int x, int y) { return &rgb[(static_cast<std::size_t>(y) * width + x) * 3]; }
  const std::uint8_t* pixel(int x, int y) const {
    return &rgb[(static_cast<std::size_t>(y) * width + x) * 3];
  }
};

// PNG output carries no timestamp, so identical inputs give identical bytes.
void write_png(const std::string& path, const Raster& raster,
               const std::map<std::string, std::string>& text = {});
// Writes a 1- or 3-channel tensor, quantizing [0,1] to 8 bits.
void write_png(const std::string& path, const ImageTensor& image);

Raster read_png_raster(const std::string& path);
std::map<std::string, std::string> read_png_text(const std::string& path);

// Loads .png / .jpg / .jpeg as a 3 x H x W tensor in [0,1].
ImageTensor read_image(const std::string& path);

Raster to_raster(const ImageTensor& image, int upscale = 1);

}  // namespace fsadv

#endif  // FSADV_IMAGE_IO_HPP_
