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

#include "refsplat/image.hpp"
#include "refsplat/scene.hpp"
#include "refsplat/shading.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace refsplat {

struct ToyOptions {
  int image_size = 64;
  int views = 32;
  int env_resolution = 64;
  std::uint64_t seed = 0;
};

/// Synthetic scene with known geometry, materials and lighting. Images are
/// rendered by this library's own forward pass, so they are reproduced
/// exactly by rendering `gaussians` under `environment`.
struct ToyScene {
  std::string name;
  GaussianSet gaussians;
  std::vector<std::uint16_t> object_ids;  ///< per Gaussian, 1-based
  std::vector<Camera> cameras;
  std::vector<Image> images;     ///< linear RGB
  std::vector<Image> normals;    ///< camera-space, zero where depth is invalid
  std::vector<LabelMap> labels;  ///< object id of the dominant contributor
  EnvironmentCubemap environment;
  Vec3 background = Vec3::Zero();
};

/// "plane-mirror", "sphere-glossy" or "occluder-box"; throws InputError otherwise.
ToyScene make_toy_scene(const std::string& name, const ToyOptions& opts = {});
std::vector<std::string> toy_scene_names();

/// Radiance of the analytic four-color gradient sky.
Vec3 toy_sky(const Vec3& direction);

/// Training start point: positions get per-axis uniform noise of
/// +-jitter * (largest bounding-box extent); materials, opacity and residual
/// are reset to MaterialDefaults. Rotations and scales are kept.
GaussianSet perturbed_initialization(const GaussianSet& truth, double jitter, std::uint64_t seed);

}  // namespace refsplat
