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

// Serial, unoptimized versions of the parallel kernels. They skip tiling,
// bounding boxes, acceleration structures and summed-area tables, and exist to
// cross-check the fast paths in tests and benchmarks.

#pragma once

#include "refsplat/rasterizer.hpp"
#include "refsplat/raytrace.hpp"
#include "refsplat/shading.hpp"

namespace refsplat::reference {

/// Tests every Gaussian at every pixel; also returns the plan when asked.
GBuffer splat_forward(std::span<const Gaussian> gaussians, const Camera& cam, const RasterOptions& opts = {},
                      RasterPlan* plan_out = nullptr);

/// Mirror-ray tracing with brute-force intersection.
IncidentMaps trace_image(std::span<const Gaussian> gaussians, const GBuffer& gbuffer, const Camera& cam,
                         const TraceOptions& opts = {}, const RasterPlan* raster_plan = nullptr);

Image deferred_shade(const GBuffer& gbuffer, const Camera& cam, const EnvironmentCubemap& env, const DfgLut& dfg,
                     const IncidentMaps& incident, const ShadeOptions& opts = {});

/// Local mean by explicit window sums.
Image luminance_normalize(const Image& rgb, int window = 31, double floor = 1e-3, const Image* mask = nullptr);

}  // namespace refsplat::reference
