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

#include "refsplat/trainer/parameters.hpp"
#include "refsplat/trainer/pipeline.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace refsplat {

/// Small self-contained scene for finite-difference checks: one reference
/// view, two nearby sources, noise ground truth and synthetic priors.
struct GradcheckScene {
  GaussianSet gaussians;
  EnvironmentCubemap env;
  Camera camera;
  std::vector<Camera> sources;
  Image target;
  Image normal_prior;
  ReflectionPrior reflection;
};

GradcheckScene make_gradcheck_scene(int gaussians, int size, int env_resolution, std::uint64_t seed);

struct GradcheckCase {
  std::string name;
  StageFlags flags;
  LossWeights weights;  ///< terms with zero weight are off
};

/// L_c alone, L_c plus each term on its own, the shaded paths and everything at once.
std::vector<GradcheckCase> default_gradcheck_cases(const LossWeights& weights = {});

struct GradcheckOptions {
  int gaussians = 6;
  int size = 16;
  int env_resolution = 4;
  std::uint64_t seed = 0;
  double step = 1e-6;       ///< central-difference step on raw parameters
  double tolerance = 1e-3;  ///< relative error bound
  double min_grad = 1e-6;   ///< entries with smaller magnitude are not compared
  LossWeights weights;
  /// Test hook applied to the analytic gradients before comparison.
  std::function<void(Gradients&)> corrupt;
};

struct ClassError {
  std::size_t checked = 0;
  double worst = 0.0;  ///< worst relative error among checked entries
};

struct GradcheckReport {
  std::string name;
  std::array<ClassError, kParamClassCount> classes{};
  double loss = 0.0;
  bool pass = true;
};

struct GradcheckResult {
  std::vector<GradcheckReport> cases;
  std::array<ClassError, kParamClassCount> classes{};  ///< worst over all cases
  std::size_t parameters = 0;
  bool pass = true;
};

GradcheckReport check_gradients(const GradcheckScene& scene, const GradcheckCase& c, const GradcheckOptions& opts);
GradcheckResult run_gradcheck(const GradcheckOptions& opts = {});

}  // namespace refsplat
