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

#include "refsplat/scene.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace refsplat::testing {

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("refsplat_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline Gaussian make_disk(const Vec3& p, const Vec3& n, double sigma, double opacity = 0.8) {
  Gaussian g;
  g.position = p;
  g.rotation = quat_from_z_to(n.normalized());
  g.scale = Vec2(sigma, sigma);
  g.opacity = opacity;
  return g;
}

/// Random disks in a box with random orientation and materials.
inline GaussianSet random_disks(std::size_t n, std::uint64_t seed, double extent = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0), s(-1.0, 1.0);
  GaussianSet out;
  for (std::size_t i = 0; i < n; ++i) {
    Gaussian g;
    g.position = extent * Vec3(s(rng), s(rng), s(rng));
    g.rotation = Vec4(s(rng), s(rng), s(rng), s(rng)).normalized();
    g.scale = Vec2(0.02 + 0.1 * u(rng), 0.02 + 0.1 * u(rng)) * extent;
    g.opacity = 0.1 + 0.85 * u(rng);
    g.diffuse = Vec3(u(rng), u(rng), u(rng));
    g.albedo = u(rng);
    g.metallic = u(rng);
    g.roughness = u(rng);
    g.residual = 0.3 * Vec3(u(rng), u(rng), u(rng));
    out.push_back(g);
  }
  return out;
}

inline double max_abs_diff(const Image& a, const Image& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

}  // namespace refsplat::testing
