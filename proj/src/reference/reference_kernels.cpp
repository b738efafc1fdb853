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

#include "refsplat/reference.hpp"

#include "refsplat/detail/splat_eval.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace refsplat::reference {

GBuffer splat_forward(std::span<const Gaussian> gaussians, const Camera& cam, const RasterOptions& opts,
                      RasterPlan* plan_out) {
  const int w = cam.width(), h = cam.height();
  GBuffer out(w, h);
  RasterPlan plan;
  plan.width = w;
  plan.height = h;
  plan.offsets.push_back(0);
  plan.depth_valid.assign(static_cast<std::size_t>(w) * h, 0);

  std::vector<detail::SplatGeometry> geom;
  for (const auto& g : gaussians) geom.push_back(detail::make_geometry(g, cam));

  struct Cand {
    double depth;
    std::uint32_t index;
    detail::FragmentSample sample;
  };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      std::vector<Cand> cands;
      for (std::uint32_t i = 0; i < gaussians.size(); ++i) {
        const auto s = detail::sample_candidate(geom[i], cam, x, y, opts);
        if (s) cands.push_back({s->depth, i, *s});
      }
      std::sort(cands.begin(), cands.end(), [&](const Cand& a, const Cand& b) {
        if (a.depth != b.depth) return a.depth < b.depth;
        if (detail::content_less(gaussians[a.index], gaussians[b.index])) return true;
        if (detail::content_less(gaussians[b.index], gaussians[a.index])) return false;
        return a.index < b.index;
      });
      std::array<double, detail::kChannels> acc{};
      double trans = 1.0;
      for (const Cand& c : cands) {
        const auto psi = detail::channel_values(gaussians[c.index], geom[c.index], c.sample);
        const double wt = c.sample.weight * trans;
        for (int k = 0; k < detail::kChannels; ++k) acc[k] += psi[k] * wt;
        plan.fragments.push_back({c.index, static_cast<std::uint8_t>(c.sample.screen ? 1 : 0), wt});
        trans *= 1.0 - c.sample.weight;
        if (trans < opts.transmittance_stop) break;
      }
      plan.offsets.push_back(static_cast<std::uint32_t>(plan.fragments.size()));
      const bool valid = (1.0 - trans) > opts.depth_alpha_threshold;
      plan.depth_valid[static_cast<std::size_t>(y) * w + x] = valid ? 1 : 0;

      for (int c = 0; c < 3; ++c) out.diffuse.at(x, y, c) = acc[detail::kDiffuse + c];
      out.albedo.at(x, y) = acc[detail::kAlbedo];
      out.metallic.at(x, y) = acc[detail::kMetallic];
      out.roughness.at(x, y) = acc[detail::kRoughness];
      out.alpha.at(x, y) = acc[detail::kAlpha];
      out.depth_valid[static_cast<std::size_t>(y) * w + x] = valid ? 1 : 0;
      out.depth.at(x, y) = valid ? acc[detail::kDepth] / acc[detail::kAlpha] : 0.0;
      const Vec3 n(acc[detail::kNormal], acc[detail::kNormal + 1], acc[detail::kNormal + 2]);
      const double len = n.norm();
      for (int c = 0; c < 3; ++c) out.normal.at(x, y, c) = len > 1e-12 ? n[c] / len : 0.0;
    }
  if (plan_out) *plan_out = std::move(plan);
  return out;
}

IncidentMaps trace_image(std::span<const Gaussian> gaussians, const GBuffer& gb, const Camera& cam,
                         const TraceOptions& opts, const RasterPlan* raster_plan) {
  IncidentMaps maps(gb.width, gb.height);
  for (int y = 0; y < gb.height; ++y)
    for (int x = 0; x < gb.width; ++x) {
      if (!gb.valid_depth(x, y)) continue;
      const Vec3 ncam(gb.normal.at(x, y, 0), gb.normal.at(x, y, 1), gb.normal.at(x, y, 2));
      if (!(ncam.squaredNorm() > 0.0)) continue;
      const Vec3 n = cam.rotation().transpose() * ncam;
      const Vec3 surface = cam.to_world(gb.depth.at(x, y) * cam.camera_ray(x, y));
      const Vec3 view = cam.world_ray(x, y).normalized();
      const Vec3 dir = (view - 2.0 * view.dot(n) * n).normalized();
      std::vector<std::uint32_t> excluded;
      if (raster_plan) {
        for (const Fragment& f : raster_plan->pixel(x, y))
          if (f.contribution > opts.self_hit_threshold) excluded.push_back(f.gaussian);
        std::sort(excluded.begin(), excluded.end());
      }
      const RayHitList hits = truncate_hits(
          gaussians,
          intersect_ray_brute_force(gaussians, surface + opts.origin_offset * n, dir, opts.origin_offset, opts, excluded),
          opts);
      const TraceResult r = composite_hits(gaussians, hits);
      for (int c = 0; c < 3; ++c) maps.indirect.at(x, y, c) = r.indirect[c];
      maps.occlusion.at(x, y) = r.occlusion;
    }
  return maps;
}

Image deferred_shade(const GBuffer& gb, const Camera& cam, const EnvironmentCubemap& env, const DfgLut& dfg,
                     const IncidentMaps& incident, const ShadeOptions& opts) {
  Image out(gb.width, gb.height, 3);
  for (int y = 0; y < gb.height; ++y)
    for (int x = 0; x < gb.width; ++x) {
      const double alpha = gb.alpha.at(x, y);
      Vec3 color = Vec3::Zero();
      if (alpha > 1e-6) {
        const Vec3 cd = Vec3(gb.diffuse.at(x, y, 0), gb.diffuse.at(x, y, 1), gb.diffuse.at(x, y, 2)) / alpha;
        const double a = gb.albedo.at(x, y) / alpha, m = gb.metallic.at(x, y) / alpha;
        const double r = gb.roughness.at(x, y) / alpha;
        Vec3 li(incident.indirect.at(x, y, 0), incident.indirect.at(x, y, 1), incident.indirect.at(x, y, 2));
        Vec3 specular = Vec3::Zero();
        const Vec3 ncam(gb.normal.at(x, y, 0), gb.normal.at(x, y, 1), gb.normal.at(x, y, 2));
        if (ncam.squaredNorm() > 0.0) {
          const Vec3 n = cam.rotation().transpose() * ncam;
          const Vec3 wo = -cam.world_ray(x, y).normalized();
          const double ndo = n.dot(wo);
          li += (1.0 - incident.occlusion.at(x, y)) * env.query(2.0 * ndo * n - wo, r);
          const auto lut = dfg.lookup(std::max(ndo, kMinCosine), r);
          specular = (base_reflectance(a, m) * lut.scale + lut.bias) * li;
        }
        color = (1.0 - m) * cd + specular;
      }
      const double ac = std::clamp(alpha, 0.0, 1.0);
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = ac * color[c] + (1.0 - ac) * opts.background[c];
    }
  return out;
}

Image luminance_normalize(const Image& rgb, int window, double floor, const Image* mask) {
  const int r = window / 2;
  Image out(rgb.width, rgb.height, rgb.channels);
  for (int y = 0; y < rgb.height; ++y)
    for (int x = 0; x < rgb.width; ++x) {
      double sum = 0.0;
      int count = 0;
      for (int yy = std::max(0, y - r); yy <= std::min(rgb.height - 1, y + r); ++yy)
        for (int xx = std::max(0, x - r); xx <= std::min(rgb.width - 1, x + r); ++xx) {
          if (mask && !(mask->at(xx, yy) > 0.0)) continue;
          sum += 0.2126 * rgb.at(xx, yy, 0) + 0.7152 * rgb.at(xx, yy, 1) + 0.0722 * rgb.at(xx, yy, 2);
          ++count;
        }
      const double mean = std::max(count ? sum / count : 0.0, floor);
      for (int c = 0; c < rgb.channels; ++c) out.at(x, y, c) = rgb.at(x, y, c) / mean;
    }
  return out;
}

}  // namespace refsplat::reference
