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

#include "refsplat/raytrace.hpp"

#include <algorithm>

namespace refsplat {

RayHitList truncate_hits(std::span<const Gaussian> gaussians, RayHitList hits, const TraceOptions& opts) {
  double tr = 1.0;
  for (std::size_t i = 0; i < hits.size(); ++i) {
    tr *= 1.0 - gaussians[hits[i].gaussian].opacity * hits[i].falloff;
    if (tr < opts.transmittance_stop) {
      hits.resize(i + 1);
      break;
    }
  }
  return hits;
}

TraceResult composite_hits(std::span<const Gaussian> gaussians, std::span<const RayHit> hits) {
  TraceResult r;
  double tr = 1.0;
  for (const RayHit& h : hits) {
    const Gaussian& g = gaussians[h.gaussian];
    const double w = g.opacity * h.falloff;
    r.indirect += (g.diffuse + g.residual) * (w * tr);
    r.occlusion += w * tr;
    tr *= 1.0 - w;
  }
  return r;
}

void composite_hits_backward(std::span<const Gaussian> gaussians, std::span<const RayHit> hits, const Vec3& g_indirect,
                             double g_occlusion, std::span<GaussianGrad> per_hit_grads) {
  const std::size_t k = hits.size();
  if (k == 0) return;
  std::vector<double> trans(k);
  double tr = 1.0;
  for (std::size_t i = 0; i < k; ++i) {
    trans[i] = tr;
    tr *= 1.0 - gaussians[hits[i].gaussian].opacity * hits[i].falloff;
  }
  Vec3 back_col = Vec3::Zero();
  double back_occ = 0.0;
  for (std::size_t i = k; i-- > 0;) {
    const Gaussian& g = gaussians[hits[i].gaussian];
    const double w = g.opacity * hits[i].falloff;
    const Vec3 col = g.diffuse + g.residual;
    const double g_w = trans[i] * (g_indirect.dot(col - back_col) + g_occlusion * (1.0 - back_occ));
    back_col = col * w + (1.0 - w) * back_col;
    back_occ = w + (1.0 - w) * back_occ;
    GaussianGrad& out = per_hit_grads[i];
    const Vec3 g_col = g_indirect * (w * trans[i]);
    out.diffuse += g_col;
    out.residual += g_col;
    out.opacity += g_w * hits[i].falloff;
  }
}

TraceResult trace_indirect(std::span<const Gaussian> gaussians, const DiskBVH& bvh, const Vec3& origin,
                           const Vec3& dir, const TraceOptions& opts) {
  const RayHitList hits =
      truncate_hits(gaussians, intersect_ray(bvh, gaussians, origin, dir, opts.origin_offset, opts), opts);
  return composite_hits(gaussians, hits);
}

TracePlan plan_trace(std::span<const Gaussian> gaussians, const DiskBVH& bvh, const GBuffer& gbuffer,
                     const Camera& cam, const TraceOptions& opts, const RasterPlan* raster_plan) {
  const int w = gbuffer.width, h = gbuffer.height;
  const std::size_t np = static_cast<std::size_t>(w) * h;
  TracePlan plan;
  plan.width = w;
  plan.height = h;
  plan.active.assign(np, 0);
  plan.origin.assign(np, Vec3::Zero());
  plan.direction.assign(np, Vec3::Zero());
  std::vector<RayHitList> per_pixel(np);

#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t p = 0; p < static_cast<std::ptrdiff_t>(np); ++p) {
    const int x = static_cast<int>(p % w), y = static_cast<int>(p / w);
    if (!gbuffer.valid_depth(x, y)) continue;
    const Vec3 ncam(gbuffer.normal.at(x, y, 0), gbuffer.normal.at(x, y, 1), gbuffer.normal.at(x, y, 2));
    if (!(ncam.squaredNorm() > 0.0)) continue;
    const Vec3 n = cam.rotation().transpose() * ncam;
    const Vec3 surface = cam.to_world(gbuffer.depth.at(x, y) * cam.camera_ray(x, y));
    const Vec3 view = cam.world_ray(x, y).normalized();
    const Vec3 dir = (view - 2.0 * view.dot(n) * n).normalized();
    const Vec3 origin = surface + opts.origin_offset * n;
    std::vector<std::uint32_t> excluded;
    if (raster_plan) {
      for (const Fragment& f : raster_plan->pixel(x, y))
        if (f.contribution > opts.self_hit_threshold) excluded.push_back(f.gaussian);
      std::sort(excluded.begin(), excluded.end());
    }
    plan.active[p] = 1;
    plan.origin[p] = origin;
    plan.direction[p] = dir;
    per_pixel[p] =
        truncate_hits(gaussians, intersect_ray(bvh, gaussians, origin, dir, opts.origin_offset, opts, excluded), opts);
  }

  plan.offsets.assign(np + 1, 0);
  for (std::size_t p = 0; p < np; ++p) plan.offsets[p + 1] = plan.offsets[p] + per_pixel[p].size();
  plan.hits.resize(plan.offsets[np]);
  for (std::size_t p = 0; p < np; ++p) std::copy(per_pixel[p].begin(), per_pixel[p].end(), plan.hits.begin() + plan.offsets[p]);
  return plan;
}

IncidentMaps composite_trace(std::span<const Gaussian> gaussians, const TracePlan& plan) {
  IncidentMaps maps(plan.width, plan.height);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < plan.height; ++y)
    for (int x = 0; x < plan.width; ++x) {
      const TraceResult r = composite_hits(gaussians, plan.pixel(x, y));
      for (int c = 0; c < 3; ++c) maps.indirect.at(x, y, c) = r.indirect[c];
      maps.occlusion.at(x, y) = r.occlusion;
    }
  return maps;
}

IncidentMaps trace_image(std::span<const Gaussian> gaussians, const DiskBVH& bvh, const GBuffer& gbuffer,
                         const Camera& cam, const TraceOptions& opts, const RasterPlan* raster_plan,
                         TracePlan* plan_out) {
  TracePlan plan = plan_trace(gaussians, bvh, gbuffer, cam, opts, raster_plan);
  IncidentMaps maps = composite_trace(gaussians, plan);
  if (plan_out) *plan_out = std::move(plan);
  return maps;
}

std::vector<GaussianGrad> trace_backward(std::span<const Gaussian> gaussians, const TracePlan& plan,
                                         const IncidentMaps& upstream) {
  const int w = plan.width;
  const std::size_t np = static_cast<std::size_t>(w) * plan.height;
  std::vector<GaussianGrad> hit_grads(plan.hits.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t p = 0; p < static_cast<std::ptrdiff_t>(np); ++p) {
    const int x = static_cast<int>(p % w), y = static_cast<int>(p / w);
    const auto hits = plan.pixel(x, y);
    if (hits.empty()) continue;
    const Vec3 gl(upstream.indirect.at(x, y, 0), upstream.indirect.at(x, y, 1), upstream.indirect.at(x, y, 2));
    composite_hits_backward(gaussians, hits, gl, upstream.occlusion.at(x, y),
                            std::span<GaussianGrad>(hit_grads.data() + plan.offsets[p], hits.size()));
  }
  // Fixed-order gather: hits are visited in pixel order for every Gaussian.
  std::vector<GaussianGrad> grads(gaussians.size());
  for (std::size_t i = 0; i < plan.hits.size(); ++i) grads[plan.hits[i].gaussian] += hit_grads[i];
  return grads;
}

}  // namespace refsplat
