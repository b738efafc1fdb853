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

#include "refsplat/rasterizer.hpp"
#include "refsplat/scene.hpp"
#include "refsplat/shading.hpp"

#include <Eigen/Geometry>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace refsplat {

struct TraceOptions {
  double support = 3.0;                ///< square footprint half-extent in sigmas
  double weight_cutoff = 1.0 / 255.0;
  double transmittance_stop = 1e-4;
  double origin_offset = 1e-3;         ///< secondary ray origin offset along the normal; also t_min
  double self_hit_threshold = 0.01;    ///< own contributors above this w*T are skipped
};

using Box3 = Eigen::AlignedBox3d;

/// Bounds of the two-triangle proxy of a disk (its +-support sigma square).
Box3 proxy_box(const Gaussian& g, double support);

class DiskBVH {
 public:
  struct Node {
    Box3 box;
    std::int32_t left = -1;  ///< child indices; -1 for leaves
    std::int32_t right = -1;
    std::uint32_t first = 0;  ///< leaf range into indices()
    std::uint32_t count = 0;
    bool leaf() const { return left < 0; }
  };

  DiskBVH() = default;

  /// Median-split build over all Gaussians.
  static DiskBVH build(std::span<const Gaussian> gaussians, const TraceOptions& opts = {});

  /// Recomputes boxes bottom-up for moved Gaussians; the topology is kept.
  void refit(std::span<const Gaussian> gaussians);

  bool empty() const { return nodes_.empty(); }
  std::size_t primitive_count() const { return indices_.size(); }
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<std::uint32_t>& indices() const { return indices_; }

 private:
  std::int32_t build_node(std::span<const Gaussian> gaussians, std::vector<Vec3>& centroids, std::uint32_t begin,
                          std::uint32_t end);
  std::vector<Node> nodes_;
  std::vector<std::uint32_t> indices_;
  double support_ = 3.0;
};

struct RayHit {
  double t = 0;
  std::uint32_t gaussian = 0;
  double falloff = 0;  ///< exp(-rho^2 / 2) at the intersection
  double weight = 0;   ///< opacity * falloff
};

using RayHitList = std::vector<RayHit>;

/// Single disk test: plane hit beyond t_min inside the support square with
/// weight >= cutoff.
std::optional<RayHit> intersect_disk(const Gaussian& g, std::uint32_t index, const Vec3& origin, const Vec3& dir,
                                     double t_min, const TraceOptions& opts = {});

/// All hits sorted by (t, index). `excluded` must be sorted ascending.
RayHitList intersect_ray(const DiskBVH& bvh, std::span<const Gaussian> gaussians, const Vec3& origin,
                         const Vec3& dir, double t_min, const TraceOptions& opts = {},
                         std::span<const std::uint32_t> excluded = {});

/// Same contract as intersect_ray, testing every disk.
RayHitList intersect_ray_brute_force(std::span<const Gaussian> gaussians, const Vec3& origin, const Vec3& dir,
                                     double t_min, const TraceOptions& opts = {},
                                     std::span<const std::uint32_t> excluded = {});

struct TraceResult {
  Vec3 indirect = Vec3::Zero();
  double occlusion = 0;
};

/// Truncates a sorted hit list after the fragment that drives transmittance
/// below the stop threshold.
RayHitList truncate_hits(std::span<const Gaussian> gaussians, RayHitList hits, const TraceOptions& opts = {});

/// Front-to-back composite of (c_d + c_r) and occupancy along fixed hits;
/// weights use the current opacities with the stored falloffs.
TraceResult composite_hits(std::span<const Gaussian> gaussians, std::span<const RayHit> hits);

/// Adds gradients on opacity, diffuse and residual for the hits of one ray.
void composite_hits_backward(std::span<const Gaussian> gaussians, std::span<const RayHit> hits, const Vec3& g_indirect,
                             double g_occlusion, std::span<GaussianGrad> per_hit_grads);

TraceResult trace_indirect(std::span<const Gaussian> gaussians, const DiskBVH& bvh, const Vec3& origin,
                           const Vec3& dir, const TraceOptions& opts = {});

/// Frozen per-pixel secondary rays and their truncated hit lists.
struct TracePlan {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> active;
  std::vector<Vec3> origin;
  std::vector<Vec3> direction;
  std::vector<std::uint32_t> offsets;  ///< size width*height+1
  std::vector<RayHit> hits;

  std::span<const RayHit> pixel(int x, int y) const {
    const std::size_t p = static_cast<std::size_t>(y) * width + x;
    return {hits.data() + offsets[p], hits.data() + offsets[p + 1]};
  }
};

/// Mirror rays from every pixel with valid depth and a normal. When
/// `raster_plan` is given, each pixel's own significant contributors are
/// excluded from its ray.
TracePlan plan_trace(std::span<const Gaussian> gaussians, const DiskBVH& bvh, const GBuffer& gbuffer,
                     const Camera& cam, const TraceOptions& opts = {}, const RasterPlan* raster_plan = nullptr);

IncidentMaps composite_trace(std::span<const Gaussian> gaussians, const TracePlan& plan);

IncidentMaps trace_image(std::span<const Gaussian> gaussians, const DiskBVH& bvh, const GBuffer& gbuffer,
                         const Camera& cam, const TraceOptions& opts = {}, const RasterPlan* raster_plan = nullptr,
                         TracePlan* plan_out = nullptr);

/// Per-Gaussian gradients of a loss given its gradient on the incident maps.
/// Ray geometry is held fixed. Deterministic for any thread count.
std::vector<GaussianGrad> trace_backward(std::span<const Gaussian> gaussians, const TracePlan& plan,
                                         const IncidentMaps& upstream);

}  // namespace refsplat
