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

#include "refsplat/multiview.hpp"

#include <spdlog/spdlog.h>

#include <cmath>

namespace refsplat {

namespace {

bool co_visible(const Camera& ci, const Camera& cj, const GBuffer& gj, const Vec3& x_cam_i, const WarpOptions& opts) {
  Mat3 r;
  Vec3 t;
  relative_pose(ci, cj, r, t);
  const Vec3 xj = r * x_cam_i + t;
  if (!(xj.z() > 0.0)) return false;
  const int u = static_cast<int>(std::lround(cj.fx() * xj.x() / xj.z() + cj.cx()));
  const int v = static_cast<int>(std::lround(cj.fy() * xj.y() / xj.z() + cj.cy()));
  if (u < 0 || v < 0 || u >= gj.width || v >= gj.height) return false;
  if (!gj.valid_depth(u, v)) return false;
  return std::abs(gj.depth.at(u, v) - xj.z()) <= opts.occlusion_tolerance * xj.z();
}

}  // namespace

MvPlan plan_mv(const MvView& reference, std::span<const MvView> sources, const MvOptions& opts) {
  const Camera& ci = *reference.camera;
  const GBuffer& gi = *reference.gbuffer;
  const int w = gi.width, h = gi.height;
  const int stride = std::max(1, opts.stride);
  std::vector<MvPlan> rows(h);

#pragma omp parallel for schedule(dynamic, 1)
  for (int y = 0; y < h; y += stride) {
    MvPlan& row = rows[y];
    for (int x = 0; x < w; x += stride) {
      const PatchGrid patch{x, y, opts.patch_half};
      if (!patch.inside(w, h) || !gi.valid_depth(x, y)) continue;
      const Vec3 n(gi.normal.at(x, y, 0), gi.normal.at(x, y, 1), gi.normal.at(x, y, 2));
      const double depth = gi.depth.at(x, y);
      const Vec3 xc = depth * ci.camera_ray(x, y);
      for (std::size_t s = 0; s < sources.size(); ++s) {
        const Camera& cj = *sources[s].camera;
        const GBuffer& gj = *sources[s].gbuffer;
        const auto hmat = pixel_homography(ci, cj, x, y, depth, n, opts.warp);
        if (!hmat || !co_visible(ci, cj, gj, xc, opts.warp)) continue;
        std::vector<MvSample> pair;
        pair.reserve(patch.count());
        bool ok = true;
        for (int dy = -patch.half; dy <= patch.half && ok; ++dy)
          for (int dx = -patch.half; dx <= patch.half; ++dx) {
            const Vec2 q = apply_homography(*hmat, x + dx, y + dy);
            const auto tap = bilinear_tap(gj.width, gj.height, q.x(), q.y());
            if (!tap) {
              ok = false;
              break;
            }
            pair.push_back({static_cast<std::uint32_t>((y + dy) * w + x + dx), static_cast<std::uint32_t>(s), *tap});
          }
        if (!ok) continue;
        row.samples.insert(row.samples.end(), pair.begin(), pair.end());
        ++row.valid_pairs;
      }
    }
  }

  MvPlan plan;
  for (auto& r : rows) {
    plan.samples.insert(plan.samples.end(), r.samples.begin(), r.samples.end());
    plan.valid_pairs += r.valid_pairs;
  }
  return plan;
}

MvLoss mv_loss(const MvPlan& plan, const GBuffer& reference, std::span<const GBuffer* const> sources,
               std::span<GBufferGrad*> grads) {
  MvLoss loss;
  const std::size_t n = plan.samples.size();
  if (n == 0) {
    spdlog::warn("multi-view loss: no valid patch pairs");
    return loss;
  }
  auto src_value = [](const Image& img, const BilinearTap& t, int c) { return t.sample(img, c); };

  double sd = 0.0, sr = 0.0, sm = 0.0;
  for (const MvSample& s : plan.samples) {
    const GBuffer& gj = *sources[s.source];
    for (int c = 0; c < 3; ++c) {
      const double d = reference.diffuse.data[s.ref_pixel * 3 + c] - src_value(gj.diffuse, s.tap, c);
      sd += d * d;
    }
    const double dr = reference.roughness.data[s.ref_pixel] - src_value(gj.roughness, s.tap, 0);
    const double dm = reference.metallic.data[s.ref_pixel] - src_value(gj.metallic, s.tap, 0);
    sr += dr * dr;
    sm += dm * dm;
  }
  const double nd = 3.0 * n, nr = static_cast<double>(n);
  loss.diffuse = sd / nd;
  loss.roughness = sr / nr;
  loss.metallic = sm / nr;
  loss.total = (loss.diffuse + loss.roughness + loss.metallic) / 3.0;

  if (grads.empty()) return loss;
  GBufferGrad& gref = *grads[0];
  auto scatter = [](Image& img, const BilinearTap& t, int c, double g) {
    for (int i = 0; i < 4; ++i) img.data[t.index[i] * img.channels + c] += t.weight[i] * g;
  };
  for (const MvSample& s : plan.samples) {
    const GBuffer& gj = *sources[s.source];
    GBufferGrad& gsrc = *grads[1 + s.source];
    for (int c = 0; c < 3; ++c) {
      const double d = reference.diffuse.data[s.ref_pixel * 3 + c] - src_value(gj.diffuse, s.tap, c);
      const double g = 2.0 * d / (3.0 * nd);
      gref.diffuse.data[s.ref_pixel * 3 + c] += g;
      scatter(gsrc.diffuse, s.tap, c, -g);
    }
    const double dr = reference.roughness.data[s.ref_pixel] - src_value(gj.roughness, s.tap, 0);
    const double gr = 2.0 * dr / (3.0 * nr);
    gref.roughness.data[s.ref_pixel] += gr;
    scatter(gsrc.roughness, s.tap, 0, -gr);
    const double dm = reference.metallic.data[s.ref_pixel] - src_value(gj.metallic, s.tap, 0);
    const double gm = 2.0 * dm / (3.0 * nr);
    gref.metallic.data[s.ref_pixel] += gm;
    scatter(gsrc.metallic, s.tap, 0, -gm);
  }
  return loss;
}

}  // namespace refsplat
