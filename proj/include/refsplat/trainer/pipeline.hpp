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

#include "refsplat/multiview.hpp"
#include "refsplat/rasterizer.hpp"
#include "refsplat/raytrace.hpp"
#include "refsplat/shading.hpp"
#include "refsplat/trainer/losses.hpp"

#include <span>
#include <vector>

namespace refsplat {

struct LossWeights {
  double depth_normal = 0.05;
  double normal_prior = 0.05;
  double multiview = 0.1;
  double reflection = 0.01;
};

/// Which parts of the model are active at a given iteration.
struct StageFlags {
  bool pbr = true;            ///< deferred shading; otherwise render = diffuse map
  bool trace = true;          ///< ray-traced indirect light (needs pbr)
  bool normal_prior = false;  ///< L_n
  bool multiview = false;     ///< L_mv and L_ref
};

struct PipelineOptions {
  RasterOptions raster;
  TraceOptions trace;
  MvOptions mv;
  ShadeOptions shade;
  LossWeights weights;
};

struct TrainView {
  const Camera* camera = nullptr;
  const Image* image = nullptr;                ///< ground truth, linear RGB
  const Image* normal_prior = nullptr;         ///< optional, camera space
  const ReflectionPrior* reflection = nullptr;  ///< optional
};

struct LossTerms {
  double total = 0;
  double photometric = 0;
  double l1 = 0;
  double dssim = 0;
  double depth_normal = 0;
  double normal_prior = 0;
  double multiview = 0;
  double reflection = 0;
};

/// Every discrete decision of one iteration: fragment lists, secondary ray hit
/// lists and multi-view sample positions. Evaluating the loss through a fixed
/// structure is smooth in the parameters.
struct FrozenStructure {
  RasterPlan plan;
  TracePlan trace;
  bool traced = false;
  std::vector<const Camera*> sources;
  std::vector<RasterPlan> source_plans;
  MvPlan mv;
};

FrozenStructure freeze_structure(std::span<const Gaussian> gaussians, const DiskBVH& bvh, const TrainView& view,
                                 std::span<const Camera* const> sources, const StageFlags& flags,
                                 const PipelineOptions& opts);

struct Gradients {
  std::vector<GaussianGrad> gaussians;
  std::vector<double> env;  ///< empty unless the shading path is active
};

/// Total loss and its parts; fills `grads` when given.
LossTerms evaluate_loss(std::span<const Gaussian> gaussians, const EnvironmentCubemap& env, const DfgLut& dfg,
                        const FrozenStructure& frozen, const TrainView& view, const StageFlags& flags,
                        const PipelineOptions& opts, Gradients* grads = nullptr, Image* render_out = nullptr);

/// Forward-only render with every intermediate kept.
struct RenderLayers {
  GBuffer gbuffer;
  IncidentMaps incident;
  ShadeLayers shade;
  Image final;
};

RenderLayers render_view(std::span<const Gaussian> gaussians, const EnvironmentCubemap& env, const DfgLut& dfg,
                         const DiskBVH& bvh, const Camera& cam, const StageFlags& flags, const PipelineOptions& opts);

}  // namespace refsplat
