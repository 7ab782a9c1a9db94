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

#include "fsadv/image_io.hpp"

#include <jpeglib.h>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>

#include "fsadv/errors.hpp"

namespace fsadv {

namespace {

constexpr char kModule[] = "image-io";

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f != nullptr) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::string& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) {
    throw Error(mode[0] == 'r' ? ErrorKind::kNotFound : ErrorKind::kIo, kModule,
                "cannot open '" + path + "'");
  }
  return f;
}

std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

[[noreturn]] void png_fail(const std::string& path) {
  throw Error(ErrorKind::kIo, kModule, "libpng failure on '" + path + "'");
}

struct JpegError {
  jpeg_error_mgr mgr{};
  std::jmp_buf jump{};
  char message[JMSG_LENGTH_MAX] = {};
};

ImageTensor read_jpeg(const std::string& path) {
  FilePtr f = open_file(path, "rb");
  jpeg_decompress_struct info{};
  JpegError err;
  info.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = [](j_common_ptr cinfo) {
    auto* e = reinterpret_cast<JpegError*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, e->message);
    std::longjmp(e->jump, 1);
  };
  std::vector<JSAMPLE> pixels;
  jpeg_create_decompress(&info);
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&info);
    throw Error(ErrorKind::kIo, kModule, "libjpeg: " + std::string(err.message));
  }
  jpeg_stdio_src(&info, f.get());
  jpeg_read_header(&info, TRUE);
  info.out_color_space = JCS_RGB;
  jpeg_start_decompress(&info);
  const int w = static_cast<int>(info.output_width);
  const int h = static_cast<int>(info.output_height);
  pixels.resize(static_cast<std::size_t>(w) * h * 3);
  while (info.output_scanline < info.output_height) {
    JSAMPROW rows[1] = {pixels.data() + static_cast<std::size_t>(info.output_scanline) * w * 3};
    jpeg_read_scanlines(&info, rows, 1);
  }
  jpeg_finish_decompress(&info);
  jpeg_destroy_decompress(&info);
  ImageTensor img(Shape{3, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(c, y, x) = pixels[(static_cast<std::size_t>(y) * w + x) * 3 + c] / 255.0;
  return img;
}

}  // namespace

void Raster::set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  if (x < 0 || y < 0 || x >= width || y >= height) return;
  std::uint8_t* p = pixel(x, y);
  p[0] = r;
  p[1] = g;
  p[2] = b;
}

void write_png(const std::string& path, const Raster& raster,
               const std::map<std::string, std::string>& text) {
  FilePtr f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) png_fail(path);
  png_infop info = png_create_info_struct(png);
  if (info == nullptr || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    png_fail(path);
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(raster.width),
               static_cast<png_uint_32>(raster.height), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  std::vector<png_text> chunks;
  std::vector<std::string> storage;
  storage.reserve(text.size() * 2);
  for (const auto& [k, v] : text) {
    storage.push_back(k);
    storage.push_back(v);
    png_text t{};
    t.compression = PNG_TEXT_COMPRESSION_NONE;
    t.key = storage[storage.size() - 2].data();
    t.text = storage.back().data();
    chunks.push_back(t);
  }
  if (!chunks.empty()) png_set_text(png, info, chunks.data(), static_cast<int>(chunks.size()));
  png_write_info(png, info);
  for (int y = 0; y < raster.height; ++y) {
    png_write_row(png, const_cast<png_bytep>(raster.pixel(0, y)));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Raster to_raster(const ImageTensor& image, int upscale) {
  const Shape& s = image.shape();
  Raster r(s.width * upscale, s.height * upscale);
  for (int y = 0; y < r.height; ++y) {
    for (int x = 0; x < r.width; ++x) {
      const int sy = y / upscale;
      const int sx = x / upscale;
      if (s.channels >= 3) {
        r.set(x, y, quantize(image.at(0, sy, sx)), quantize(image.at(1, sy, sx)),
              quantize(image.at(2, sy, sx)));
      } else {
        const auto v = quantize(image.at(0, sy, sx));
        r.set(x, y, v, v, v);
      }
    }
  }
  return r;
}

void write_png(const std::string& path, const ImageTensor& image) {
  write_png(path, to_raster(image));
}

namespace {

struct PngReader {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngReader() { png_destroy_read_struct(&png, &info, nullptr); }
};

}  // namespace

Raster read_png_raster(const std::string& path) {
  FilePtr f = open_file(path, "rb");
  PngReader rd;
  rd.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (rd.png == nullptr) png_fail(path);
  rd.info = png_create_info_struct(rd.png);
  if (rd.info == nullptr || setjmp(png_jmpbuf(rd.png))) png_fail(path);
  png_init_io(rd.png, f.get());
  png_read_info(rd.png, rd.info);
  png_set_strip_16(rd.png);
  png_set_strip_alpha(rd.png);
  png_set_packing(rd.png);
  png_set_palette_to_rgb(rd.png);
  png_set_expand_gray_1_2_4_to_8(rd.png);
  png_set_gray_to_rgb(rd.png);
  png_read_update_info(rd.png, rd.info);
  const int w = static_cast<int>(png_get_image_width(rd.png, rd.info));
  const int h = static_cast<int>(png_get_image_height(rd.png, rd.info));
  Raster r(w, h);
  for (int y = 0; y < h; ++y) png_read_row(rd.png, r.pixel(0, y), nullptr);
  png_read_end(rd.png, nullptr);
  return r;
}

std::map<std::string, std::string> read_png_text(const std::string& path) {
  FilePtr f = open_file(path, "rb");
  PngReader rd;
  rd.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (rd.png == nullptr) png_fail(path);
  rd.info = png_create_info_struct(rd.png);
  if (rd.info == nullptr || setjmp(png_jmpbuf(rd.png))) png_fail(path);
  png_init_io(rd.png, f.get());
  png_read_info(rd.png, rd.info);
  png_textp text = nullptr;
  int count = 0;
  png_get_text(rd.png, rd.info, &text, &count);
  std::map<std::string, std::string> out;
  for (int i = 0; i < count; ++i) out[text[i].key] = text[i].text;
  return out;
}

ImageTensor read_image(const std::string& path) {
  std::string ext = path.substr(path.find_last_of('.') + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
  if (ext == "jpg" || ext == "jpeg") return read_jpeg(path);
  if (ext != "png") {
    throw Error(ErrorKind::kValidation, kModule, "unsupported image type '" + path + "'");
  }
  const Raster r = read_png_raster(path);
  ImageTensor img(Shape{3, r.height, r.width});
  for (int y = 0; y < r.height; ++y)
    for (int x = 0; x < r.width; ++x)
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = r.pixel(x, y)[c] / 255.0;
  return img;
}

}  // namespace fsadv
