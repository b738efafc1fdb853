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
#include <array>
#include <cmath>
#include <stdexcept>

namespace refsplat {

namespace {

struct FaceAxes {
  Vec3 major;  // ma = major . d
  Vec3 s;      // sc = s . d
  Vec3 t;      // tc = t . d
};

const std::array<FaceAxes, kFaces>& face_axes() {
  static const std::array<FaceAxes, kFaces> axes{{
      {Vec3(1, 0, 0), Vec3(0, 0, -1), Vec3(0, -1, 0)},
      {Vec3(-1, 0, 0), Vec3(0, 0, 1), Vec3(0, -1, 0)},
      {Vec3(0, 1, 0), Vec3(1, 0, 0), Vec3(0, 0, 1)},
      {Vec3(0, -1, 0), Vec3(1, 0, 0), Vec3(0, 0, -1)},
      {Vec3(0, 0, 1), Vec3(1, 0, 0), Vec3(0, -1, 0)},
      {Vec3(0, 0, -1), Vec3(-1, 0, 0), Vec3(0, -1, 0)},
  }};
  return axes;
}

int select_face(const Vec3& d) {
  const double ax = std::abs(d.x()), ay = std::abs(d.y()), az = std::abs(d.z());
  if (ax >= ay && ax >= az) return d.x() >= 0 ? 0 : 1;
  if (ay >= az) return d.y() >= 0 ? 2 : 3;
  return d.z() >= 0 ? 4 : 5;
}

struct Tap {
  int x0, x1, y0, y1;
  double fx, fy;
  double sx, sy;  // d(texel coordinate) / d(u or v)
};

// Unclamped bilinear footprint; indices may fall one texel outside the face
// and are resolved onto the neighboring face by wrap_texel().
Tap make_tap(double u, double v, int size) {
  auto axis = [size](double c, int& i0, int& i1, double& f, double& slope) {
    const double x = std::clamp(c * size - 0.5, -0.5, size - 0.5);
    i0 = static_cast<int>(std::floor(x));
    i1 = i0 + 1;
    f = x - i0;
    slope = size;
  };
  Tap t;
  axis(u, t.x0, t.x1, t.fx, t.sx);
  axis(v, t.y0, t.y1, t.fy, t.sy);
  return t;
}

void select_uv(const Vec3& d, int& face, double& u, double& v);

// Texel (x, y) of `face` extended past its border: the texel on the adjacent
// face that contains the extrapolated texel center.
void wrap_texel(int size, int& face, int& x, int& y) {
  if (x >= 0 && y >= 0 && x < size && y < size) return;
  const FaceAxes& a = face_axes()[face];
  const Vec3 d = a.major + (2.0 * (x + 0.5) / size - 1.0) * a.s + (2.0 * (y + 0.5) / size - 1.0) * a.t;
  double u, v;
  select_uv(d, face, u, v);
  x = std::clamp(static_cast<int>(std::floor(u * size)), 0, size - 1);
  y = std::clamp(static_cast<int>(std::floor(v * size)), 0, size - 1);
}

void select_uv(const Vec3& d, int& face, double& u, double& v) {
  face = select_face(d);
  const FaceAxes& a = face_axes()[face];
  const double ma = a.major.dot(d);
  u = 0.5 * (a.s.dot(d) / ma + 1.0);
  v = 0.5 * (a.t.dot(d) / ma + 1.0);
}

}  // namespace

void direction_to_face(const Vec3& d, int& face, double& u, double& v) { select_uv(d, face, u, v); }

EnvironmentCubemap::EnvironmentCubemap(int resolution, const Vec3& fill) : resolution_(resolution) {
  if (resolution < 1 || (resolution & (resolution - 1)) != 0)
    throw std::invalid_argument("EnvironmentCubemap: resolution must be a power of two");
  int levels = 1;
  while ((resolution >> (levels - 1)) > 1) ++levels;
  mips_.resize(levels);
  for (int l = 0; l < levels; ++l) {
    const std::size_t s = static_cast<std::size_t>(level_size(l));
    mips_[l].resize(kFaces * s * s * 3);
  }
  for (std::size_t i = 0; i < mips_[0].size(); ++i) mips_[0][i] = fill[i % 3];
  rebuild_mips();
}

std::size_t EnvironmentCubemap::texel_index(int level, int face, int x, int y) const {
  const std::size_t s = static_cast<std::size_t>(level_size(level));
  return ((static_cast<std::size_t>(face) * s + y) * s + x) * 3;
}

Vec3 EnvironmentCubemap::texel(int level, int face, int x, int y) const {
  const std::size_t i = texel_index(level, face, x, y);
  return Vec3(mips_[level][i], mips_[level][i + 1], mips_[level][i + 2]);
}

void EnvironmentCubemap::set_base_texel(int face, int x, int y, const Vec3& rgb) {
  const std::size_t i = texel_index(0, face, x, y);
  for (int c = 0; c < 3; ++c) mips_[0][i + c] = rgb[c];
}

void EnvironmentCubemap::rebuild_mips() {
  for (int l = 1; l < levels(); ++l) {
    const int s = level_size(l);
    const auto& src = mips_[l - 1];
    auto& dst = mips_[l];
    for (int f = 0; f < kFaces; ++f)
      for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x)
          for (int c = 0; c < 3; ++c) {
            const double sum = src[texel_index(l - 1, f, 2 * x, 2 * y) + c] +
                               src[texel_index(l - 1, f, 2 * x + 1, 2 * y) + c] +
                               src[texel_index(l - 1, f, 2 * x, 2 * y + 1) + c] +
                               src[texel_index(l - 1, f, 2 * x + 1, 2 * y + 1) + c];
            dst[texel_index(l, f, x, y) + c] = 0.25 * sum;
          }
  }
}

Vec3 EnvironmentCubemap::texel_direction(int level, int face, int x, int y) const {
  const int s = level_size(level);
  const FaceAxes& a = face_axes()[face];
  const double u = (x + 0.5) / s, v = (y + 0.5) / s;
  return (a.major + (2.0 * u - 1.0) * a.s + (2.0 * v - 1.0) * a.t).normalized();
}

void EnvironmentCubemap::fill(const std::function<Vec3(const Vec3&)>& radiance) {
  for (int f = 0; f < kFaces; ++f)
    for (int y = 0; y < resolution_; ++y)
      for (int x = 0; x < resolution_; ++x) set_base_texel(f, x, y, radiance(texel_direction(0, f, x, y)));
  rebuild_mips();
}

Vec3 EnvironmentCubemap::query(const Vec3& direction, double roughness, QueryGrad* grad) const {
  const int face = select_face(direction);
  const FaceAxes& a = face_axes()[face];
  const double ma = a.major.dot(direction);
  const double sc = a.s.dot(direction), tc = a.t.dot(direction);
  const double u = 0.5 * (sc / ma + 1.0), v = 0.5 * (tc / ma + 1.0);

  const double r = std::clamp(roughness, 0.0, 1.0);
  const double lod = r * (levels() - 1);
  const int l0 = std::min(static_cast<int>(std::floor(lod)), levels() - 1);
  const int l1 = std::min(l0 + 1, levels() - 1);
  const double lf = lod - l0;

  Vec3 value[2], du[2], dv[2];
  const int lv[2] = {l0, l1};
  for (int k = 0; k < 2; ++k) {
    const int size = level_size(lv[k]);
    const Tap t = make_tap(u, v, size);
    auto fetch = [&](int x, int y) {
      int f = face;
      wrap_texel(size, f, x, y);
      return texel(lv[k], f, x, y);
    };
    const Vec3 v00 = fetch(t.x0, t.y0), v10 = fetch(t.x1, t.y0);
    const Vec3 v01 = fetch(t.x0, t.y1), v11 = fetch(t.x1, t.y1);
    const Vec3 top = v00 + (v10 - v00) * t.fx;
    const Vec3 bot = v01 + (v11 - v01) * t.fx;
    value[k] = top + (bot - top) * t.fy;
    du[k] = ((v10 - v00) * (1.0 - t.fy) + (v11 - v01) * t.fy) * t.sx;
    dv[k] = (bot - top) * t.sy;
  }
  const Vec3 out = value[0] * (1.0 - lf) + value[1] * lf;
  if (grad) {
    const Vec3 g_u_dir = 0.5 * (a.s / ma - sc * a.major / (ma * ma));
    const Vec3 g_v_dir = 0.5 * (a.t / ma - tc * a.major / (ma * ma));
    const Vec3 d_u = du[0] * (1.0 - lf) + du[1] * lf;
    const Vec3 d_v = dv[0] * (1.0 - lf) + dv[1] * lf;
    for (int c = 0; c < 3; ++c) grad->d_direction[c] = d_u[c] * g_u_dir + d_v[c] * g_v_dir;
    const bool interior = roughness > 0.0 && roughness < 1.0;
    grad->d_roughness = interior ? Vec3((value[1] - value[0]) * (levels() - 1)) : Vec3::Zero();
  }
  return out;
}

std::vector<std::vector<double>> EnvironmentCubemap::make_level_grads() const {
  std::vector<std::vector<double>> g(mips_.size());
  for (std::size_t l = 0; l < mips_.size(); ++l) g[l].assign(mips_[l].size(), 0.0);
  return g;
}

void EnvironmentCubemap::query_backward(const Vec3& direction, double roughness, const Vec3& g_rgb,
                                        std::vector<std::vector<double>>& level_grads) const {
  int face;
  double u, v;
  direction_to_face(direction, face, u, v);
  const double r = std::clamp(roughness, 0.0, 1.0);
  const double lod = r * (levels() - 1);
  const int l0 = std::min(static_cast<int>(std::floor(lod)), levels() - 1);
  const int l1 = std::min(l0 + 1, levels() - 1);
  const double lf = lod - l0;
  const int lv[2] = {l0, l1};
  const double lw[2] = {1.0 - lf, lf};
  for (int k = 0; k < 2; ++k) {
    if (lw[k] == 0.0) continue;
    const int size = level_size(lv[k]);
    const Tap t = make_tap(u, v, size);
    const double w00 = (1.0 - t.fx) * (1.0 - t.fy), w10 = t.fx * (1.0 - t.fy);
    const double w01 = (1.0 - t.fx) * t.fy, w11 = t.fx * t.fy;
    auto& g = level_grads[lv[k]];
    auto add = [&](int x, int y, double w) {
      int f = face;
      wrap_texel(size, f, x, y);
      const std::size_t i = texel_index(lv[k], f, x, y);
      for (int c = 0; c < 3; ++c) g[i + c] += lw[k] * w * g_rgb[c];
    };
    add(t.x0, t.y0, w00);
    add(t.x1, t.y0, w10);
    add(t.x0, t.y1, w01);
    add(t.x1, t.y1, w11);
  }
}

std::vector<double> EnvironmentCubemap::collapse_gradients(std::vector<std::vector<double>> level_grads) const {
  for (int l = levels() - 1; l >= 1; --l) {
    const int s = level_size(l);
    for (int f = 0; f < kFaces; ++f)
      for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x)
          for (int c = 0; c < 3; ++c) {
            const double g = 0.25 * level_grads[l][texel_index(l, f, x, y) + c];
            if (g == 0.0) continue;
            level_grads[l - 1][texel_index(l - 1, f, 2 * x, 2 * y) + c] += g;
            level_grads[l - 1][texel_index(l - 1, f, 2 * x + 1, 2 * y) + c] += g;
            level_grads[l - 1][texel_index(l - 1, f, 2 * x, 2 * y + 1) + c] += g;
            level_grads[l - 1][texel_index(l - 1, f, 2 * x + 1, 2 * y + 1) + c] += g;
          }
  }
  return std::move(level_grads[0]);
}

Image EnvironmentCubemap::face_image(int face, int level) const {
  const int s = level_size(level);
  Image img(s, s, 3);
  for (int y = 0; y < s; ++y)
    for (int x = 0; x < s; ++x) {
      const Vec3 t = texel(level, face, x, y);
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = t[c];
    }
  return img;
}

void EnvironmentCubemap::set_face_image(int face, const Image& img) {
  if (img.width != resolution_ || img.height != resolution_ || img.channels != 3)
    throw InputError("environment: face image must be " + std::to_string(resolution_) + "x" +
                     std::to_string(resolution_) + " RGB");
  for (int y = 0; y < resolution_; ++y)
    for (int x = 0; x < resolution_; ++x)
      set_base_texel(face, x, y, Vec3(img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2)));
}

namespace {
const char* kFaceSuffix[kFaces] = {"px", "nx", "py", "ny", "pz", "nz"};
}

void save_environment(const EnvironmentCubemap& env, const std::string& prefix) {
  for (int f = 0; f < kFaces; ++f) save_pfm(env.face_image(f), prefix + "_" + kFaceSuffix[f] + ".pfm");
}

EnvironmentCubemap load_environment(const std::string& prefix) {
  std::array<Image, kFaces> faces;
  for (int f = 0; f < kFaces; ++f) faces[f] = load_image(prefix + "_" + kFaceSuffix[f] + ".pfm");
  const int s = faces[0].width;
  for (const auto& img : faces)
    if (img.width != s || img.height != s) throw InputError("environment: faces must be equal squares");
  EnvironmentCubemap env(s);
  for (int f = 0; f < kFaces; ++f) env.set_face_image(f, faces[f]);
  env.rebuild_mips();
  return env;
}

}  // namespace refsplat
