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

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace refsplat {

struct RasterOptions {
  double near_plane = 0.01;
  double min_screen_sigma = 0.3;       ///< low-pass floor on the footprint, pixels
  double weight_cutoff = 1.0 / 255.0;  ///< fragments below this weight are skipped
  double transmittance_stop = 1e-4;
  double depth_alpha_threshold = 0.2;  ///< depth is valid only above this alpha
  double support = 3.0;                ///< footprint half-extent in sigmas
  int tile_size = 16;
};

struct ProjectedSplat {
  Vec2 mean;        ///< pixel coordinates of the disk center
  Mat2 covariance;  ///< screen-space footprint, floored at min_screen_sigma^2
  Mat2 conic;       ///< inverse of covariance
  double depth = 0;
  Vec3 plane_normal;  ///< camera-space disk normal facing the camera
  double plane_offset = 0;  ///< plane_normal . x = plane_offset on the disk
  int x0 = 0, x1 = -1, y0 = 0, y1 = -1;  ///< inclusive pixel bounds of the support

  /// 1-sigma radius along the major axis, pixels.
  double sigma_radius() const;
};

/// Projects a disk; std::nullopt when culled (behind the near plane or
/// entirely off-image).
std::optional<ProjectedSplat> project_gaussian(const Gaussian& g, const Camera& cam, const RasterOptions& opts = {});

/// Rasterized material and geometry maps. Material channels are
/// alpha-premultiplied; depth and normal are normalized by alpha. The normal
/// is in camera space and faces the camera.
struct GBuffer {
  int width = 0;
  int height = 0;
  Image diffuse;    ///< 3 channels
  Image albedo;     ///< 1 channel
  Image metallic;   ///< 1 channel
  Image roughness;  ///< 1 channel
  Image depth;      ///< 1 channel; 0 where invalid
  Image normal;     ///< 3 channels; unit or zero
  Image alpha;      ///< 1 channel
  std::vector<std::uint8_t> depth_valid;

  GBuffer() = default;
  GBuffer(int w, int h);
  bool valid_depth(int x, int y) const { return depth_valid[static_cast<std::size_t>(y) * width + x] != 0; }
};

/// Upstream gradients with the GBuffer layout (depth_valid unused).
using GBufferGrad = GBuffer;

struct Fragment {
  std::uint32_t gaussian = 0;
  std::uint8_t screen_branch = 0;  ///< weight came from the low-pass screen footprint
  double contribution = 0;         ///< w * T at planning time
};

/// The discrete structure of one rasterization: per-pixel front-to-back
/// fragment lists after culling, cutoffs and early termination, plus the
/// depth-validity mask. Compositing through a fixed plan is a smooth function
/// of the Gaussian parameters.
struct RasterPlan {
  int width = 0;
  int height = 0;
  std::vector<std::uint32_t> offsets;  ///< size width*height+1
  std::vector<Fragment> fragments;
  std::vector<std::uint8_t> depth_valid;

  std::span<const Fragment> pixel(int x, int y) const {
    const std::size_t p = static_cast<std::size_t>(y) * width + x;
    return {fragments.data() + offsets[p], fragments.data() + offsets[p + 1]};
  }
  bool covered(int x, int y) const {
    const std::size_t p = static_cast<std::size_t>(y) * width + x;
    return offsets[p + 1] > offsets[p];
  }
};

RasterPlan plan_splats(std::span<const Gaussian> gaussians, const Camera& cam, const RasterOptions& opts = {});

GBuffer composite_splats(std::span<const Gaussian> gaussians, const Camera& cam, const RasterPlan& plan,
                         const RasterOptions& opts = {});

/// plan_splats followed by composite_splats.
GBuffer splat_forward(std::span<const Gaussian> gaussians, const Camera& cam, const RasterOptions& opts = {},
                      RasterPlan* plan_out = nullptr);

/// Gradients of a scalar loss with respect to every Gaussian, given the
/// loss gradient on each GBuffer channel. Deterministic for any thread count.
std::vector<GaussianGrad> splat_backward(std::span<const Gaussian> gaussians, const Camera& cam,
                                         const RasterPlan& plan, const GBufferGrad& upstream,
                                         const RasterOptions& opts = {});

/// Camera-space normals from the cross product of central depth differences;
/// zero where any of the pixel or its 4-neighbors has invalid depth.
Image render_normal_from_depth(const Image& depth, const Camera& cam);

/// Gradient of a loss on render_normal_from_depth's output with respect to the depth map.
Image render_normal_from_depth_backward(const Image& depth, const Camera& cam, const Image& grad_normal);

}  // namespace refsplat
