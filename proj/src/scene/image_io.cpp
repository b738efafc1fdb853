/*
 * Copyright 2026 The refsplat Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "refsplat/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

namespace refsplat {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::string extension_of(const std::string& path) {
  const auto dot = path.find_last_of('.');
  if (dot == std::string::npos) return {};
  std::string ext = path.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

// Decoded PNG rows, 8 or 16 bits per sample.
struct RawPng {
  int width = 0, height = 0, channels = 0, bit_depth = 0;
  std::vector<unsigned char> bytes;
};

RawPng read_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw InputError("image: cannot open " + path);
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw InputError("image: not a PNG file: " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw InputError("image: libpng init failed");
  }
  RawPng out;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw InputError("image: corrupt PNG: " + path);
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int color = png_get_color_type(png, info);
  out.bit_depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && out.bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (out.bit_depth == 16) png_set_swap(png);  // host little-endian
  png_read_update_info(png, info);

  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.channels = png_get_channels(png, info);
  out.bit_depth = png_get_bit_depth(png, info);
  const std::size_t row_bytes = png_get_rowbytes(png, info);
  out.bytes.resize(row_bytes * out.height);
  std::vector<png_bytep> rows(out.height);
  for (int y = 0; y < out.height; ++y) rows[y] = out.bytes.data() + row_bytes * y;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

void write_png(const std::string& path, int width, int height, int channels, int bit_depth,
               const std::vector<unsigned char>& bytes) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw InputError("image: cannot write " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw InputError("image: libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw InputError("image: PNG write failed: " + path);
  }
  png_init_io(png, fp.get());
  const int color = channels == 1   ? PNG_COLOR_TYPE_GRAY
                    : channels == 2 ? PNG_COLOR_TYPE_GRAY_ALPHA
                    : channels == 3 ? PNG_COLOR_TYPE_RGB
                                    : PNG_COLOR_TYPE_RGB_ALPHA;
  png_set_IHDR(png, info, width, height, bit_depth, color, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (bit_depth == 16) png_set_swap(png);
  const std::size_t row_bytes = static_cast<std::size_t>(width) * channels * (bit_depth / 8);
  for (int y = 0; y < height; ++y) png_write_row(png, const_cast<png_bytep>(bytes.data() + row_bytes * y));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

double srgb_to_linear(double s) {
  return s <= 0.04045 ? s / 12.92 : std::pow((s + 0.055) / 1.055, 2.4);
}

double linear_to_srgb(double l) {
  return l <= 0.0031308 ? 12.92 * l : 1.055 * std::pow(l, 1.0 / 2.4) - 0.055;
}

Image load_pfm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("image: cannot open " + path);
  std::string magic;
  int w = 0, h = 0;
  double scale = 0;
  in >> magic >> w >> h >> scale;
  in.get();
  if (!in || (magic != "PF" && magic != "Pf") || w <= 0 || h <= 0)
    throw InputError("image: malformed PFM header: " + path);
  const int c = magic == "PF" ? 3 : 1;
  std::vector<float> raw(static_cast<std::size_t>(w) * h * c);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size() * sizeof(float)));
  if (!in) throw InputError("image: truncated PFM: " + path);
  if (scale > 0) {
    for (float& f : raw) {
      std::uint32_t u;
      std::memcpy(&u, &f, 4);
      u = __builtin_bswap32(u);
      std::memcpy(&f, &u, 4);
    }
  }
  Image img(w, h, c);
  // PFM rows run bottom to top.
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int k = 0; k < c; ++k) img.at(x, y, k) = raw[(static_cast<std::size_t>(h - 1 - y) * w + x) * c + k];
  return img;
}

void save_pfm(const Image& image, const std::string& path) {
  if (image.channels != 1 && image.channels != 3) throw InputError("image: PFM supports 1 or 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("image: cannot write " + path);
  out << (image.channels == 3 ? "PF" : "Pf") << "\n" << image.width << " " << image.height << "\n-1.0\n";
  std::vector<float> raw(image.data.size());
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      for (int k = 0; k < image.channels; ++k)
        raw[(static_cast<std::size_t>(image.height - 1 - y) * image.width + x) * image.channels + k] =
            static_cast<float>(image.at(x, y, k));
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size() * sizeof(float)));
}

Image load_image(const std::string& path) {
  const std::string ext = extension_of(path);
  if (ext == "pfm") return load_pfm(path);
  if (ext != "png") throw InputError("image: unsupported extension: " + path);
  const RawPng raw = read_png(path);
  const int c = raw.channels >= 3 ? 3 : 1;
  Image img(raw.width, raw.height, c);
  const double max_value = raw.bit_depth == 16 ? 65535.0 : 255.0;
  for (int y = 0; y < raw.height; ++y) {
    for (int x = 0; x < raw.width; ++x) {
      for (int k = 0; k < c; ++k) {
        const std::size_t i = (static_cast<std::size_t>(y) * raw.width + x) * raw.channels + k;
        double v;
        if (raw.bit_depth == 16) {
          std::uint16_t s;
          std::memcpy(&s, raw.bytes.data() + 2 * i, 2);
          v = s / max_value;
        } else {
          v = raw.bytes[i] / max_value;
        }
        img.at(x, y, k) = srgb_to_linear(v);
      }
    }
  }
  return img;
}

void save_image(const Image& image, const std::string& path) {
  const std::string ext = extension_of(path);
  if (ext == "pfm") return save_pfm(image, path);
  if (ext != "png") throw InputError("image: unsupported extension: " + path);
  if (image.channels < 1 || image.channels > 4) throw InputError("image: PNG supports 1-4 channels");
  std::vector<unsigned char> bytes(image.data.size());
  for (std::size_t i = 0; i < image.data.size(); ++i) {
    const double l = std::clamp(image.data[i], 0.0, 1.0);
    bytes[i] = static_cast<unsigned char>(std::lround(linear_to_srgb(l) * 255.0));
  }
  write_png(path, image.width, image.height, image.channels, 8, bytes);
}

LabelMap load_labels(const std::string& path) {
  const RawPng raw = read_png(path);
  if (raw.channels != 1) throw InputError("labels: expected single-channel PNG: " + path);
  LabelMap labels(raw.width, raw.height);
  for (std::size_t i = 0; i < labels.labels.size(); ++i) {
    if (raw.bit_depth == 16) {
      std::uint16_t s;
      std::memcpy(&s, raw.bytes.data() + 2 * i, 2);
      labels.labels[i] = s;
    } else {
      labels.labels[i] = raw.bytes[i];
    }
  }
  return labels;
}

void save_labels(const LabelMap& labels, const std::string& path) {
  std::vector<unsigned char> bytes(labels.labels.size() * 2);
  std::memcpy(bytes.data(), labels.labels.data(), bytes.size());
  write_png(path, labels.width, labels.height, 1, 16, bytes);
}

}  // namespace refsplat
