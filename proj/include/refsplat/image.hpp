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

#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace refsplat {

/// Errors caused by malformed or missing inputs (files, configs, arguments).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Row-major, channel-interleaved image of linear radiance (or any per-pixel
/// scalar field such as depth or a loss weight).
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, int c, double fill = 0.0)
      : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

  std::size_t index(int x, int y, int c = 0) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  double& at(int x, int y, int c = 0) { return data[index(x, y, c)]; }
  double at(int x, int y, int c = 0) const { return data[index(x, y, c)]; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  bool same_shape(const Image& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
  bool empty() const { return data.empty(); }
};

/// 16-bit region labels; 0 is background.
struct LabelMap {
  int width = 0;
  int height = 0;
  std::vector<std::uint16_t> labels;

  LabelMap() = default;
  LabelMap(int w, int h) : width(w), height(h), labels(static_cast<std::size_t>(w) * h, 0) {}
  std::uint16_t at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
  std::uint16_t& at(int x, int y) { return labels[static_cast<std::size_t>(y) * width + x]; }
};

double srgb_to_linear(double s);
double linear_to_srgb(double l);

/// Loads an 8-bit PNG (sRGB, converted to linear) or a PFM (already linear).
Image load_image(const std::string& path);
/// Writes PNG (linear->sRGB, clamped) or PFM depending on the extension.
void save_image(const Image& image, const std::string& path);

Image load_pfm(const std::string& path);
void save_pfm(const Image& image, const std::string& path);

LabelMap load_labels(const std::string& path);
void save_labels(const LabelMap& labels, const std::string& path);

}  // namespace refsplat
