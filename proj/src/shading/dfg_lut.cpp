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

#include "refsplat/shading.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace refsplat {

namespace {

double radical_inverse(std::uint32_t bits) {
  bits = (bits << 16u) | (bits >> 16u);
  bits = ((bits & 0x55555555u) << 1u) | ((bits & 0xAAAAAAAAu) >> 1u);
  bits = ((bits & 0x33333333u) << 2u) | ((bits & 0xCCCCCCCCu) >> 2u);
  bits = ((bits & 0x0F0F0F0Fu) << 4u) | ((bits & 0xF0F0F0F0u) >> 4u);
  bits = ((bits & 0x00FF00FFu) << 8u) | ((bits & 0xFF00FF00u) >> 8u);
  return bits * 2.3283064365386963e-10;
}

// Clamp-to-edge linear coordinate over texel centers.
struct Lerp1 {
  int i0, i1;
  double f;
  double slope;  // d(coordinate) / d(input), zero when clamped
};

Lerp1 texel_lerp(double value, int n) {
  const double x = value * n - 0.5;
  Lerp1 l;
  if (x <= 0.0) return {0, 0, 0.0, 0.0};
  if (x >= n - 1) return {n - 1, n - 1, 0.0, 0.0};
  l.i0 = static_cast<int>(std::floor(x));
  l.i1 = l.i0 + 1;
  l.f = x - l.i0;
  l.slope = n;
  return l;
}

}  // namespace

DfgLut::DfgLut(int resolution, std::vector<double> scale, std::vector<double> bias)
    : resolution_(resolution), scale_(std::move(scale)), bias_(std::move(bias)) {
  const std::size_t n = static_cast<std::size_t>(resolution) * resolution;
  if (scale_.size() != n || bias_.size() != n) throw std::invalid_argument("DfgLut: table size mismatch");
}

DfgLut::Sample DfgLut::lookup(double cos_v, double roughness) const {
  const Lerp1 lc = texel_lerp(std::clamp(cos_v, 0.0, 1.0), resolution_);
  const Lerp1 lr = texel_lerp(std::clamp(roughness, 0.0, 1.0), resolution_);
  auto bilerp = [&](const std::vector<double>& t, double& value, double& d_cos, double& d_rough) {
    const double v00 = t[lr.i0 * resolution_ + lc.i0], v10 = t[lr.i0 * resolution_ + lc.i1];
    const double v01 = t[lr.i1 * resolution_ + lc.i0], v11 = t[lr.i1 * resolution_ + lc.i1];
    const double a = v00 + (v10 - v00) * lc.f;
    const double b = v01 + (v11 - v01) * lc.f;
    value = a + (b - a) * lr.f;
    d_cos = ((v10 - v00) * (1.0 - lr.f) + (v11 - v01) * lr.f) * lc.slope;
    d_rough = (b - a) * lr.slope;
  };
  Sample s;
  bilerp(scale_, s.scale, s.d_scale_d_cos, s.d_scale_d_rough);
  bilerp(bias_, s.bias, s.d_bias_d_cos, s.d_bias_d_rough);
  return s;
}

Image DfgLut::to_image() const {
  Image img(resolution_, resolution_, 3);
  for (int j = 0; j < resolution_; ++j)
    for (int i = 0; i < resolution_; ++i) {
      img.at(i, j, 0) = scale_at(i, j);
      img.at(i, j, 1) = bias_at(i, j);
    }
  return img;
}

DfgLut precompute_dfg(int resolution, int samples, std::uint64_t seed) {
  if (resolution < 16) throw std::invalid_argument("precompute_dfg: resolution must be >= 16");
  if (samples < 1) throw std::invalid_argument("precompute_dfg: need at least one sample");
  // Seeded Cranley-Patterson rotation of a Hammersley set.
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double shift0 = seed ? uni(rng) : 0.0;
  const double shift1 = seed ? uni(rng) : 0.0;

  const std::size_t n = static_cast<std::size_t>(resolution) * resolution;
  std::vector<double> scale(n), bias(n);
#pragma omp parallel for schedule(static)
  for (int j = 0; j < resolution; ++j) {
    const double rough = (j + 0.5) / resolution;
    const double a = roughness_to_alpha(rough);
    const double a2 = a * a;
    for (int i = 0; i < resolution; ++i) {
      const double cv = (i + 0.5) / resolution;
      const Vec3 v(std::sqrt(1.0 - cv * cv), 0.0, cv);
      double s = 0.0, b = 0.0;
      for (int k = 0; k < samples; ++k) {
        const double u1 = std::fmod(static_cast<double>(k) / samples + shift0, 1.0);
        const double u2 = std::fmod(radical_inverse(static_cast<std::uint32_t>(k)) + shift1, 1.0);
        const double phi = 2.0 * kPi * u1;
        const double cos_h = std::sqrt((1.0 - u2) / (1.0 + (a2 - 1.0) * u2));
        const double sin_h = std::sqrt(std::max(0.0, 1.0 - cos_h * cos_h));
        const Vec3 h(sin_h * std::cos(phi), sin_h * std::sin(phi), cos_h);
        const double vh = v.dot(h);
        const Vec3 l = 2.0 * vh * h - v;
        if (l.z() <= 0.0 || vh <= 0.0) continue;
        const double g_vis = smith_G(cv, l.z(), rough) * vh / (h.z() * cv);
        const double fc = std::pow(1.0 - vh, 5.0);
        s += (1.0 - fc) * g_vis;
        b += fc * g_vis;
      }
      scale[j * resolution + i] = s / samples;
      bias[j * resolution + i] = b / samples;
    }
  }
  return DfgLut(resolution, std::move(scale), std::move(bias));
}

const DfgLut& shared_dfg() {
  static const DfgLut lut = precompute_dfg();
  return lut;
}

}  // namespace refsplat
