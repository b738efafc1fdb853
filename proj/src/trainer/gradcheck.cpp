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

#include "refsplat/trainer/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace refsplat {

GradcheckScene make_gradcheck_scene(int count, int size, int env_resolution, std::uint64_t seed) {
  GradcheckScene s;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  auto u = [&](double lo, double hi) { return lo + (hi - lo) * uni(rng); };

  // Reflective floor disks first, then disks standing above them where the
  // mirrored view rays land.
  for (int i = 0; i < count; ++i) {
    Gaussian g;
    if (i < (count + 1) / 2) {
      g.position = Vec3(u(-0.4, 0.4), u(-0.4, 0.2), u(-0.02, 0.02));
      g.rotation = quat_from_z_to(Vec3(u(-0.1, 0.1), u(-0.1, 0.1), 1.0).normalized());
      g.scale = Vec2(u(0.3, 0.45), u(0.3, 0.45));
      g.metallic = u(0.5, 0.9);
      g.roughness = u(0.15, 0.5);
    } else {
      g.position = Vec3(u(-0.5, 0.5), u(0.6, 1.0), u(0.4, 0.9));
      g.rotation = quat_from_z_to(Vec3(u(-0.3, 0.3), -1.0, u(-0.6, -0.2)).normalized());
      g.scale = Vec2(u(0.25, 0.4), u(0.25, 0.4));
      g.metallic = u(0.1, 0.6);
      g.roughness = u(0.3, 0.8);
    }
    g.opacity = u(0.5, 0.85);
    g.diffuse = Vec3(u(0.2, 0.8), u(0.2, 0.8), u(0.2, 0.8));
    g.albedo = u(0.3, 0.9);
    g.residual = Vec3(u(0.05, 0.3), u(0.05, 0.3), u(0.05, 0.3));
    s.gaussians.push_back(g);
  }

  s.env = EnvironmentCubemap(env_resolution);
  for (int f = 0; f < 6; ++f)
    for (int y = 0; y < env_resolution; ++y)
      for (int x = 0; x < env_resolution; ++x) s.env.set_base_texel(f, x, y, Vec3(u(0.2, 1.0), u(0.2, 1.0), u(0.2, 1.0)));
  s.env.rebuild_mips();

  const Vec3 target(0.0, 0.2, 0.2);
  auto eye_at = [&](double azimuth_deg) -> Vec3 {
    const double a = azimuth_deg * kPi / 180.0;
    return target + 2.2 * Vec3(std::sin(a) * std::cos(0.7), -std::cos(a) * std::cos(0.7), std::sin(0.7));
  };
  s.camera = look_at_camera(eye_at(0.0), target, Vec3::UnitZ(), 50.0, size, size);
  s.sources.push_back(look_at_camera(eye_at(-8.0), target, Vec3::UnitZ(), 50.0, size, size));
  s.sources.push_back(look_at_camera(eye_at(8.0), target, Vec3::UnitZ(), 50.0, size, size));

  s.target = Image(size, size, 3);
  for (double& v : s.target.data) v = u(0.0, 1.0);
  s.normal_prior = Image(size, size, 3);
  for (std::size_t p = 0; p < s.normal_prior.pixel_count(); ++p) {
    const Vec3 n = Vec3(u(-0.5, 0.5), u(-0.5, 0.5), -1.0).normalized();
    for (int c = 0; c < 3; ++c) s.normal_prior.data[3 * p + c] = n[c];
  }
  s.reflection.w_ref = Image(size, size, 1);
  for (double& v : s.reflection.w_ref.data) v = u(0.2, 1.0);
  s.reflection.gate.assign(s.reflection.w_ref.pixel_count(), 1);
  s.reflection.target = Image(size, size, 1, 0.95);
  return s;
}

std::vector<GradcheckCase> default_gradcheck_cases(const LossWeights& w) {
  auto make = [](std::string name, bool pbr, bool trace, bool np, bool mv, LossWeights lw) {
    GradcheckCase c;
    c.name = std::move(name);
    c.flags = StageFlags{pbr, trace, np, mv};
    c.weights = lw;
    return c;
  };
  const LossWeights none{0.0, 0.0, 0.0, 0.0};
  LossWeights dn = none, np = none, mv = none, ref = none;
  dn.depth_normal = w.depth_normal > 0 ? w.depth_normal : 0.05;
  np.normal_prior = w.normal_prior > 0 ? w.normal_prior : 0.05;
  mv.multiview = w.multiview > 0 ? w.multiview : 0.1;
  ref.reflection = w.reflection > 0 ? w.reflection : 0.01;
  LossWeights all{dn.depth_normal, np.normal_prior, mv.multiview, ref.reflection};
  return {
      make("photometric", false, false, false, false, none),
      make("depth_normal", false, false, false, false, dn),
      make("normal_prior", false, false, true, false, np),
      make("multiview", false, false, false, true, mv),
      make("reflection", false, false, false, true, ref),
      make("pbr", true, false, false, false, none),
      make("pbr_trace", true, true, false, false, none),
      make("all", true, true, true, true, all),
  };
}

GradcheckReport check_gradients(const GradcheckScene& scene, const GradcheckCase& c, const GradcheckOptions& opts) {
  GradcheckReport rep;
  rep.name = c.name;
  PipelineOptions po;
  po.weights = c.weights;
  po.mv.patch_half = 1;

  ParameterSet params = encode_parameters(scene.gaussians, scene.env);
  const GaussianSet base = decode_gaussians(params);
  EnvironmentCubemap env = scene.env;
  decode_environment(params, env);

  TrainView view;
  view.camera = &scene.camera;
  view.image = &scene.target;
  view.normal_prior = &scene.normal_prior;
  view.reflection = &scene.reflection;
  std::vector<const Camera*> sources;
  for (const auto& cam : scene.sources) sources.push_back(&cam);
  const DiskBVH bvh = DiskBVH::build(base, po.trace);
  const FrozenStructure frozen = freeze_structure(base, bvh, view, sources, c.flags, po);
  const DfgLut& dfg = shared_dfg();

  Gradients grads;
  rep.loss = evaluate_loss(base, env, dfg, frozen, view, c.flags, po, &grads).total;
  if (opts.corrupt) opts.corrupt(grads);
  const std::vector<double> analytic = raw_gaussian_gradient(params, grads.gaussians);

  auto loss_at = [&](const ParameterSet& p) {
    const GaussianSet g = decode_gaussians(p);
    EnvironmentCubemap e = env;
    decode_environment(p, e);
    return evaluate_loss(g, e, dfg, frozen, view, c.flags, po).total;
  };
  auto compare = [&](ParamClass cls, double a, double f) {
    const double scale = std::max(std::abs(a), std::abs(f));
    if (!(scale > opts.min_grad) && std::isfinite(a)) return;
    ClassError& e = rep.classes[static_cast<int>(cls)];
    ++e.checked;
    const double rel = std::isfinite(a) ? std::abs(a - f) / scale : std::numeric_limits<double>::infinity();
    e.worst = std::max(e.worst, rel);
    if (!(rel <= opts.tolerance)) rep.pass = false;
  };

  const double h = opts.step;
  for (std::size_t i = 0; i < params.gaussians.size(); ++i) {
    ParameterSet p = params;
    p.gaussians[i] = params.gaussians[i] + h;
    const double lp = loss_at(p);
    p.gaussians[i] = params.gaussians[i] - h;
    const double lm = loss_at(p);
    compare(slot_class(static_cast<int>(i % kRawPerGaussian)), analytic[i], (lp - lm) / (2.0 * h));
  }
  if (c.flags.pbr) {
    for (std::size_t i = 0; i < params.env.size(); ++i) {
      ParameterSet p = params;
      p.env[i] = params.env[i] + h;
      const double lp = loss_at(p);
      p.env[i] = params.env[i] - h;
      const double lm = loss_at(p);
      const double a = i < grads.env.size() ? grads.env[i] : 0.0;
      compare(ParamClass::kEnvironment, a, (lp - lm) / (2.0 * h));
    }
  }
  return rep;
}

GradcheckResult run_gradcheck(const GradcheckOptions& opts) {
  GradcheckResult res;
  if (opts.gaussians <= 0) return res;
  const GradcheckScene scene = make_gradcheck_scene(opts.gaussians, opts.size, opts.env_resolution, opts.seed);
  res.parameters = scene.gaussians.size() * kRawPerGaussian + scene.env.base().size();
  for (const auto& c : default_gradcheck_cases(opts.weights)) {
    GradcheckReport r = check_gradients(scene, c, opts);
    for (int k = 0; k < kParamClassCount; ++k) {
      res.classes[k].checked += r.classes[k].checked;
      res.classes[k].worst = std::max(res.classes[k].worst, r.classes[k].worst);
    }
    res.pass = res.pass && r.pass;
    res.cases.push_back(std::move(r));
  }
  return res;
}

}  // namespace refsplat
