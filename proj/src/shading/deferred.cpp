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

#include "refsplat/shading.hpp"

#include <algorithm>
#include <cmath>

namespace refsplat {

namespace {

constexpr double kAlphaEps = 1e-6;

// Per-pixel forward state shared by the forward and backward passes.
struct PixelShade {
  double alpha = 0;
  Vec3 cd = Vec3::Zero();
  double a = 0, m = 0, r = 0;
  bool has_normal = false;
  Vec3 n = Vec3::Zero();   // world
  Vec3 wo = Vec3::Zero();  // world, toward the camera
  double ndo = 0, cv = 0;
  Vec3 wr = Vec3::Zero();
  Vec3 q = Vec3::Zero();
  EnvironmentCubemap::QueryGrad qg{};
  DfgLut::Sample lut{};
  Vec3 lind = Vec3::Zero();
  double occ = 0;
  Vec3 li = Vec3::Zero();
  double f0 = 0, k = 0;
  Vec3 ls = Vec3::Zero();
  Vec3 c = Vec3::Zero();
};

PixelShade shade_pixel(const GBuffer& gb, const Camera& cam, const EnvironmentCubemap& env, const DfgLut& dfg,
                       const IncidentMaps& inc, int x, int y, bool want_grad) {
  PixelShade s;
  s.alpha = gb.alpha.at(x, y);
  if (!(s.alpha > kAlphaEps)) return s;
  const double inv = 1.0 / s.alpha;
  for (int c = 0; c < 3; ++c) s.cd[c] = gb.diffuse.at(x, y, c) * inv;
  s.a = gb.albedo.at(x, y) * inv;
  s.m = gb.metallic.at(x, y) * inv;
  s.r = gb.roughness.at(x, y) * inv;
  if (!inc.indirect.empty()) {
    for (int c = 0; c < 3; ++c) s.lind[c] = inc.indirect.at(x, y, c);
    s.occ = inc.occlusion.at(x, y);
  }
  const Vec3 ncam(gb.normal.at(x, y, 0), gb.normal.at(x, y, 1), gb.normal.at(x, y, 2));
  s.has_normal = ncam.squaredNorm() > 0.0;
  s.f0 = base_reflectance(s.a, s.m);
  s.li = s.lind;
  if (s.has_normal) {
    s.n = cam.rotation().transpose() * ncam;
    s.wo = -cam.world_ray(x, y).normalized();
    s.ndo = s.n.dot(s.wo);
    s.cv = std::max(s.ndo, kMinCosine);
    s.wr = 2.0 * s.ndo * s.n - s.wo;
    s.q = env.query(s.wr, s.r, want_grad ? &s.qg : nullptr);
    s.li += (1.0 - s.occ) * s.q;
    s.lut = dfg.lookup(s.cv, s.r);
    s.k = s.f0 * s.lut.scale + s.lut.bias;
  }
  s.ls = s.k * s.li;
  s.c = (1.0 - s.m) * s.cd + s.ls;
  return s;
}

}  // namespace

Image deferred_shade(const GBuffer& gbuffer, const Camera& cam, const EnvironmentCubemap& env, const DfgLut& dfg,
                     const IncidentMaps& incident, const ShadeOptions& opts, ShadeLayers* layers) {
  const int w = gbuffer.width, h = gbuffer.height;
  Image out(w, h, 3);
  if (layers) {
    layers->diffuse = Image(w, h, 3);
    layers->specular = Image(w, h, 3);
  }
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const PixelShade s = shade_pixel(gbuffer, cam, env, dfg, incident, x, y, false);
      const double alpha = std::clamp(gbuffer.alpha.at(x, y), 0.0, 1.0);
      for (int c = 0; c < 3; ++c) {
        out.at(x, y, c) = alpha * s.c[c] + (1.0 - alpha) * opts.background[c];
        if (layers) {
          layers->diffuse.at(x, y, c) = alpha * (1.0 - s.m) * s.cd[c];
          layers->specular.at(x, y, c) = alpha * s.ls[c];
        }
      }
    }
  if (layers) layers->final = out;
  return out;
}

ShadeGrad deferred_shade_backward(const GBuffer& gbuffer, const Camera& cam, const EnvironmentCubemap& env,
                                  const DfgLut& dfg, const IncidentMaps& incident, const Image& grad_out,
                                  const ShadeOptions& opts) {
  const int w = gbuffer.width, h = gbuffer.height;
  ShadeGrad g;
  g.gbuffer = GBufferGrad(w, h);
  g.incident = IncidentMaps(w, h);
  const std::size_t np = static_cast<std::size_t>(w) * h;
  // Environment queries are replayed serially so the texel accumulation order is fixed.
  std::vector<Vec3> env_dir(np), env_grad(np, Vec3::Zero());
  std::vector<double> env_rough(np, 0.0);

#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * w + x;
      const Vec3 go(grad_out.at(x, y, 0), grad_out.at(x, y, 1), grad_out.at(x, y, 2));
      const PixelShade s = shade_pixel(gbuffer, cam, env, dfg, incident, x, y, true);
      const double raw_alpha = gbuffer.alpha.at(x, y);
      const double alpha = std::clamp(raw_alpha, 0.0, 1.0);
      double g_alpha = (raw_alpha >= 0.0 && raw_alpha <= 1.0) ? go.dot(s.c - opts.background) : 0.0;
      if (!(s.alpha > kAlphaEps)) {
        g.gbuffer.alpha.at(x, y) = g_alpha;
        continue;
      }
      const Vec3 gc = alpha * go;
      const Vec3 g_cd = (1.0 - s.m) * gc;
      const double g_k = gc.dot(s.li);
      double g_m = -gc.dot(s.cd) + g_k * s.lut.scale * (s.a - kDielectricF0);
      const double g_a = g_k * s.lut.scale * s.m;
      const double g_s = g_k * s.f0;
      const double g_b = g_k;
      const Vec3 g_li = s.k * gc;
      double g_r = 0.0;
      Vec3 g_n = Vec3::Zero();
      for (int c = 0; c < 3; ++c) g.incident.indirect.at(x, y, c) = g_li[c];
      if (s.has_normal) {
        g.incident.occlusion.at(x, y) = -g_li.dot(s.q);
        const Vec3 g_q = (1.0 - s.occ) * g_li;
        g_r += g_s * s.lut.d_scale_d_rough + g_b * s.lut.d_bias_d_rough + g_q.dot(s.qg.d_roughness);
        double g_ndo = 0.0;
        if (s.ndo > kMinCosine) g_ndo += g_s * s.lut.d_scale_d_cos + g_b * s.lut.d_bias_d_cos;
        Vec3 g_wr = Vec3::Zero();
        for (int c = 0; c < 3; ++c) g_wr += g_q[c] * s.qg.d_direction[c];
        g_ndo += 2.0 * s.n.dot(g_wr);
        g_n += 2.0 * s.ndo * g_wr + g_ndo * s.wo;
        env_dir[p] = s.wr;
        env_rough[p] = s.r;
        env_grad[p] = g_q;
      }
      const double inv = 1.0 / s.alpha;
      for (int c = 0; c < 3; ++c) {
        g.gbuffer.diffuse.at(x, y, c) = g_cd[c] * inv;
        g_alpha -= g_cd[c] * s.cd[c] * inv;
      }
      g.gbuffer.albedo.at(x, y) = g_a * inv;
      g.gbuffer.metallic.at(x, y) = g_m * inv;
      g.gbuffer.roughness.at(x, y) = g_r * inv;
      g_alpha -= (g_a * s.a + g_m * s.m + g_r * s.r) * inv;
      g.gbuffer.alpha.at(x, y) = g_alpha;
      const Vec3 g_ncam = cam.rotation() * g_n;
      for (int c = 0; c < 3; ++c) g.gbuffer.normal.at(x, y, c) = g_ncam[c];
    }

  auto level_grads = env.make_level_grads();
  for (std::size_t p = 0; p < np; ++p)
    if (!env_grad[p].isZero(0.0)) env.query_backward(env_dir[p], env_rough[p], env_grad[p], level_grads);
  g.env_base = env.collapse_gradients(std::move(level_grads));
  return g;
}

}  // namespace refsplat
