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

#include "refsplat/trainer/pipeline.hpp"

namespace refsplat {

namespace {

void add_scaled(Image& dst, const Image& src, double s) {
  for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += s * src.data[i];
}

void add_scaled(GBufferGrad& dst, const GBufferGrad& src, double s) {
  add_scaled(dst.diffuse, src.diffuse, s);
  add_scaled(dst.albedo, src.albedo, s);
  add_scaled(dst.metallic, src.metallic, s);
  add_scaled(dst.roughness, src.roughness, s);
  add_scaled(dst.depth, src.depth, s);
  add_scaled(dst.normal, src.normal, s);
  add_scaled(dst.alpha, src.alpha, s);
}

Image diffuse_only(const GBuffer& gb, const Vec3& background) {
  Image out(gb.width, gb.height, 3);
  for (int y = 0; y < gb.height; ++y)
    for (int x = 0; x < gb.width; ++x) {
      const double a = gb.alpha.at(x, y);
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = gb.diffuse.at(x, y, c) + (1.0 - a) * background[c];
    }
  return out;
}

void accumulate(std::vector<GaussianGrad>& dst, const std::vector<GaussianGrad>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

FrozenStructure freeze_structure(std::span<const Gaussian> gaussians, const DiskBVH& bvh, const TrainView& view,
                                 std::span<const Camera* const> sources, const StageFlags& flags,
                                 const PipelineOptions& opts) {
  FrozenStructure f;
  const Camera& cam = *view.camera;
  f.plan = plan_splats(gaussians, cam, opts.raster);
  if (flags.pbr && flags.trace) {
    const GBuffer gb = composite_splats(gaussians, cam, f.plan, opts.raster);
    f.trace = plan_trace(gaussians, bvh, gb, cam, opts.trace, &f.plan);
    f.traced = true;
  }
  if (flags.multiview && !sources.empty()) {
    const GBuffer ref = composite_splats(gaussians, cam, f.plan, opts.raster);
    std::vector<GBuffer> src_gb;
    for (const Camera* c : sources) {
      f.sources.push_back(c);
      f.source_plans.push_back(plan_splats(gaussians, *c, opts.raster));
      src_gb.push_back(composite_splats(gaussians, *c, f.source_plans.back(), opts.raster));
    }
    std::vector<MvView> mv_sources;
    for (std::size_t s = 0; s < sources.size(); ++s) mv_sources.push_back({sources[s], &src_gb[s]});
    f.mv = plan_mv({&cam, &ref}, mv_sources, opts.mv);
  }
  return f;
}

LossTerms evaluate_loss(std::span<const Gaussian> gaussians, const EnvironmentCubemap& env, const DfgLut& dfg,
                        const FrozenStructure& frozen, const TrainView& view, const StageFlags& flags,
                        const PipelineOptions& opts, Gradients* grads, Image* render_out) {
  const Camera& cam = *view.camera;
  const LossWeights& lw = opts.weights;
  const bool want = grads != nullptr;
  LossTerms t;

  const GBuffer gb = composite_splats(gaussians, cam, frozen.plan, opts.raster);
  const int w = gb.width, h = gb.height;
  IncidentMaps incident(w, h);
  if (frozen.traced) incident = composite_trace(gaussians, frozen.trace);
  const Image render = flags.pbr ? deferred_shade(gb, cam, env, dfg, incident, opts.shade)
                                 : diffuse_only(gb, opts.shade.background);
  if (render_out) *render_out = render;

  Image g_render;
  if (want) g_render = Image(w, h, 3);
  const PhotometricLoss pl = photometric_loss(render, *view.image, want ? &g_render : nullptr);
  t.photometric = pl.total;
  t.l1 = pl.l1;
  t.dssim = pl.dssim;

  GBufferGrad gg;
  if (want) {
    gg = GBufferGrad(w, h);
    grads->gaussians.assign(gaussians.size(), GaussianGrad{});
    grads->env.clear();
    if (flags.pbr) {
      ShadeGrad sg = deferred_shade_backward(gb, cam, env, dfg, incident, g_render, opts.shade);
      add_scaled(gg, sg.gbuffer, 1.0);
      grads->env = std::move(sg.env_base);
      if (frozen.traced) accumulate(grads->gaussians, trace_backward(gaussians, frozen.trace, sg.incident));
    } else {
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          double ga = 0.0;
          for (int c = 0; c < 3; ++c) {
            gg.diffuse.at(x, y, c) = g_render.at(x, y, c);
            ga -= g_render.at(x, y, c) * opts.shade.background[c];
          }
          gg.alpha.at(x, y) = ga;
        }
    }
  }

  if (lw.depth_normal > 0.0) {
    GBufferGrad tmp;
    if (want) tmp = GBufferGrad(w, h);
    t.depth_normal = depth_normal_loss(gb, cam, want ? &tmp : nullptr);
    if (want) add_scaled(gg, tmp, lw.depth_normal);
  }

  if (flags.normal_prior && lw.normal_prior > 0.0 && view.normal_prior && !view.normal_prior->empty()) {
    Image tmp;
    if (want) tmp = Image(w, h, 3);
    t.normal_prior = normal_prior_loss(gb.normal, *view.normal_prior, want ? &tmp : nullptr);
    if (want) add_scaled(gg.normal, tmp, lw.normal_prior);
  }

  std::vector<GBuffer> src_gb;
  std::vector<GBufferGrad> src_gg;
  if (flags.multiview) {
    if (lw.multiview > 0.0 && !frozen.sources.empty()) {
      std::vector<const GBuffer*> src_ptr;
      for (std::size_t s = 0; s < frozen.sources.size(); ++s)
        src_gb.push_back(composite_splats(gaussians, *frozen.sources[s], frozen.source_plans[s], opts.raster));
      for (const auto& g : src_gb) src_ptr.push_back(&g);
      std::vector<GBufferGrad> tmp;
      std::vector<GBufferGrad*> tmp_ptr;
      if (want) {
        tmp.emplace_back(w, h);
        for (const auto& g : src_gb) tmp.emplace_back(g.width, g.height);
        for (auto& g : tmp) tmp_ptr.push_back(&g);
      }
      t.multiview = mv_loss(frozen.mv, gb, src_ptr, tmp_ptr).total;
      if (want) {
        add_scaled(gg, tmp[0], lw.multiview);
        for (std::size_t s = 0; s < src_gb.size(); ++s) {
          src_gg.emplace_back(src_gb[s].width, src_gb[s].height);
          add_scaled(src_gg.back(), tmp[s + 1], lw.multiview);
        }
      }
    }
    if (lw.reflection > 0.0 && view.reflection) {
      Image tmp;
      if (want) tmp = Image(w, h, 1);
      t.reflection = reflection_loss(gb.metallic, *view.reflection, want ? &tmp : nullptr);
      if (want) add_scaled(gg.metallic, tmp, lw.reflection);
    }
  }

  t.total = t.photometric + lw.depth_normal * t.depth_normal +
            (flags.normal_prior ? lw.normal_prior * t.normal_prior : 0.0) +
            (flags.multiview ? lw.multiview * t.multiview + lw.reflection * t.reflection : 0.0);

  if (want) {
    accumulate(grads->gaussians, splat_backward(gaussians, cam, frozen.plan, gg, opts.raster));
    for (std::size_t s = 0; s < src_gg.size(); ++s)
      accumulate(grads->gaussians,
                 splat_backward(gaussians, *frozen.sources[s], frozen.source_plans[s], src_gg[s], opts.raster));
  }
  return t;
}

RenderLayers render_view(std::span<const Gaussian> gaussians, const EnvironmentCubemap& env, const DfgLut& dfg,
                         const DiskBVH& bvh, const Camera& cam, const StageFlags& flags, const PipelineOptions& opts) {
  RenderLayers r;
  RasterPlan plan;
  r.gbuffer = splat_forward(gaussians, cam, opts.raster, &plan);
  r.incident = IncidentMaps(cam.width(), cam.height());
  if (flags.pbr && flags.trace) r.incident = trace_image(gaussians, bvh, r.gbuffer, cam, opts.trace, &plan);
  if (flags.pbr) {
    r.final = deferred_shade(r.gbuffer, cam, env, dfg, r.incident, opts.shade, &r.shade);
  } else {
    r.final = diffuse_only(r.gbuffer, opts.shade.background);
    r.shade.diffuse = r.gbuffer.diffuse;
    r.shade.specular = Image(cam.width(), cam.height(), 3);
    r.shade.final = r.final;
  }
  return r;
}

}  // namespace refsplat
