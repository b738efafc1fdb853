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

// Acceptance suite: runs every criterion at its stated tolerance and prints
// one PASS/FAIL line each. Arguments select a subset by number ("6 8").

#include "refsplat/multiview.hpp"
#include "refsplat/raytrace.hpp"
#include "refsplat/shading.hpp"
#include "refsplat/toy_scenes.hpp"
#include "refsplat/trainer/config.hpp"
#include "refsplat/trainer/gradcheck.hpp"
#include "refsplat/trainer/metrics.hpp"
#include "refsplat/trainer/trainer.hpp"

#include <omp.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>

namespace refsplat {
namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  return Vec3(n(rng), n(rng), n(rng)).normalized();
}

GaussianSet random_scene(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0), s(-1.0, 1.0);
  GaussianSet out(n);
  for (auto& g : out) {
    g.position = Vec3(s(rng), s(rng), s(rng));
    g.rotation = Vec4(s(rng), s(rng), s(rng), s(rng)).normalized();
    g.scale = Vec2(0.02 + 0.1 * u(rng), 0.02 + 0.1 * u(rng));
    g.opacity = 0.05 + 0.95 * u(rng);
    g.diffuse = Vec3(u(rng), u(rng), u(rng));
    g.residual = 0.3 * Vec3(u(rng), u(rng), u(rng));
  }
  return out;
}

// ---------------------------------------------------------------------------

void criterion_gradients(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const GradcheckResult r = run_gradcheck({.gaussians = 6, .size = 16});
  const double secs = seconds_since(t0);
  o.require(r.pass, "finite-difference agreement");
  o.require(secs <= 60.0, "runtime <= 60 s");
  double worst = 0.0;
  for (int k = 0; k < kParamClassCount; ++k) {
    o.require(r.classes[k].checked > 0, std::string("class checked: ") + std::string(param_class_name(static_cast<ParamClass>(k))));
    worst = std::max(worst, r.classes[k].worst);
  }
  for (const auto& c : r.cases) o.require(c.pass, "case " + c.name);

  // Every loss term must actually be live in the checked scene.
  const GradcheckScene s = make_gradcheck_scene(6, 16, 4, 0);
  const TrainView view{&s.camera, &s.target, &s.normal_prior, &s.reflection};
  std::vector<const Camera*> src;
  for (const auto& c : s.sources) src.push_back(&c);
  const DiskBVH bvh = DiskBVH::build(s.gaussians);
  PipelineOptions po;
  const StageFlags early{true, true, true, false}, late{true, true, false, true};
  const auto fe = freeze_structure(s.gaussians, bvh, view, src, early, po);
  const auto fl = freeze_structure(s.gaussians, bvh, view, src, late, po);
  const LossTerms te = evaluate_loss(s.gaussians, s.env, shared_dfg(), fe, view, early, po);
  const LossTerms tl = evaluate_loss(s.gaussians, s.env, shared_dfg(), fl, view, late, po);
  o.require(te.depth_normal > 0 && te.normal_prior > 0, "depth-normal and normal-prior terms active");
  o.require(fl.mv.valid_pairs > 0 && tl.multiview > 0, "multi-view term active");
  o.require(tl.reflection > 0, "reflection term active");
  o.require(fe.traced && !fe.trace.hits.empty(), "ray-traced path active");
  o.detail << r.cases.size() << " cases, " << r.parameters << " parameters, worst rel err " << worst << ", "
           << secs << " s";
}

void criterion_split_sum(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const Vec3 l0(0.8, 0.6, 0.4);
  const EnvironmentCubemap env(16, l0);
  const Camera cam = look_at_camera(Vec3(0.4, -1.5, 2.0), Vec3::Zero(), Vec3::UnitZ(), 40.0, 5, 5);
  double worst = 0.0;
  for (double r : {0.1, 0.3, 0.5, 0.9}) {
    GBuffer gb(5, 5);
    for (std::size_t p = 0; p < 25; ++p) {
      gb.alpha.data[p] = gb.albedo.data[p] = gb.metallic.data[p] = 1.0;
      gb.roughness.data[p] = r;
      gb.normal.data[3 * p + 2] = -1.0;
      gb.depth.data[p] = 1.0;
      gb.depth_valid[p] = 1;
    }
    const Image img = deferred_shade(gb, cam, env, shared_dfg(), IncidentMaps(5, 5));
    const Vec3 n = cam.rotation().transpose() * Vec3(0, 0, -1);
    const Vec3 wo = -cam.world_ray(2, 2).normalized();
    const Vec3 mc = mc_reference_specular(n, wo, 1.0, 1.0, r, env, 200000, 7);
    for (int c = 0; c < 3; ++c) worst = std::max(worst, std::abs(img.at(2, 2, c) - mc[c]) / mc[c]);
  }
  o.require(worst <= 0.02, "deferred vs Monte Carlo within 2%");

  double worst_d = 0.0;
  for (double r : {0.3, 0.5, 0.9}) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    // Jittered strata in cos(theta): still Monte Carlo, without the variance
    // blow-up of plain uniform sampling around the sharp low-roughness peak.
    const int n = 1000000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      const double z = (i + u(rng)) / n;
      sum += ggx_D(z, r) * z * 2.0 * kPi;
    }
    worst_d = std::max(worst_d, std::abs(sum / n - 1.0));
  }
  o.require(worst_d <= 0.02, "GGX normalization within 2%");
  const double secs = seconds_since(t0);
  o.require(secs <= 120.0, "runtime <= 120 s");
  o.detail << "split-sum rel err " << worst << ", D normalization err " << worst_d << ", " << secs << " s";
}

void criterion_raytrace(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> count(1, 1000);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  std::size_t rays = 0, hits = 0, empty = 0, mismatches = 0;
  bool o_range = true, empty_zero = true;
  for (int scene = 0; scene < 100; ++scene) {
    const GaussianSet gs = random_scene(scene == 0 ? 1000 : static_cast<std::size_t>(count(rng)), rng);
    const DiskBVH bvh = DiskBVH::build(gs);
    for (int i = 0; i < 1000; ++i, ++rays) {
      const Vec3 origin(u(rng), u(rng), u(rng));
      const Vec3 dir = random_unit(rng);
      const RayHitList a = intersect_ray(bvh, gs, origin, dir, 1e-3);
      const RayHitList b = intersect_ray_brute_force(gs, origin, dir, 1e-3);
      bool same = a.size() == b.size();
      for (std::size_t k = 0; same && k < a.size(); ++k)
        same = a[k].gaussian == b[k].gaussian && a[k].t == b[k].t && a[k].weight == b[k].weight;
      const TraceResult ta = trace_indirect(gs, bvh, origin, dir);
      const TraceResult tb = composite_hits(gs, truncate_hits(gs, intersect_ray_brute_force(gs, origin, dir, 1e-3)));
      same = same && ta.indirect == tb.indirect && ta.occlusion == tb.occlusion;
      if (!same) ++mismatches;
      o_range = o_range && ta.occlusion >= 0.0 && ta.occlusion <= 1.0;
      if (a.empty()) {
        ++empty;
        empty_zero = empty_zero && ta.indirect == Vec3::Zero() && ta.occlusion == 0.0;
      }
      hits += a.size();
    }
  }
  const double secs = seconds_since(t0);
  o.require(mismatches == 0, "BVH equals brute force");
  o.require(o_range, "O in [0,1]");
  o.require(empty_zero && empty > 0, "empty rays give exactly (0,0)");
  o.require(secs <= 120.0, "runtime <= 120 s");
  o.detail << rays << " rays, " << hits << " hits, " << empty << " empty rays, " << mismatches << " mismatches, "
           << secs << " s";
}

GBuffer plane_gbuffer(const Camera& cam, const std::function<double(const Vec3&)>& metallic, double shift = 0.0) {
  GBuffer gb(cam.width(), cam.height());
  const Vec3 c = cam.center();
  const Vec3 n = cam.rotation() * Vec3::UnitZ();
  for (int y = 0; y < cam.height(); ++y)
    for (int x = 0; x < cam.width(); ++x) {
      const Vec3 d = cam.world_ray(x, y);
      if (!(d.z() < 0.0)) continue;
      const double s = -c.z() / d.z();
      const Vec3 p = c + s * d;
      const std::size_t i = static_cast<std::size_t>(y) * cam.width() + x;
      gb.alpha.data[i] = 1.0;
      gb.depth.data[i] = s;
      gb.depth_valid[i] = 1;
      for (int k = 0; k < 3; ++k) {
        gb.normal.data[3 * i + k] = n[k];
        gb.diffuse.data[3 * i + k] = 0.4;
      }
      gb.roughness.data[i] = 0.5;
      gb.metallic.data[i] = metallic(p) + shift;
    }
  return gb;
}

Camera random_plane_camera(std::mt19937_64& rng, int size) {
  std::uniform_real_distribution<double> az(0.0, 2 * kPi), el(0.6, 1.3), rad(1.5, 3.0), t(-0.3, 0.3);
  const double a = az(rng), e = el(rng), r = rad(rng);
  const Vec3 eye(r * std::cos(e) * std::cos(a), r * std::cos(e) * std::sin(a), r * std::sin(e));
  return look_at_camera(eye, Vec3(t(rng), t(rng), 0.0), Vec3::UnitZ(), 45.0, size, size);
}

void criterion_homography(Outcome& o) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> px(4.0, 28.0);
  double worst = 0.0, worst_id = 0.0;
  int pairs = 0, attempts = 0;
  while (pairs < 1000 && attempts < 100000) {
    ++attempts;
    const Camera ci = random_plane_camera(rng, 32), cj = random_plane_camera(rng, 32);
    const double u = px(rng), v = px(rng);
    const Vec3 di = ci.world_ray(u, v);
    if (!(di.z() < 0.0)) continue;
    const double depth = -ci.center().z() / di.z();
    const Vec3 world = ci.center() + depth * di;
    const Vec3 pj = cj.project(world);
    if (!(pj.z() > 0.0)) continue;
    const auto hij = pixel_homography(ci, cj, u, v, depth, ci.rotation() * Vec3::UnitZ());
    const auto hji = pixel_homography(cj, ci, pj.x(), pj.y(), pj.z(), cj.rotation() * Vec3::UnitZ());
    if (!hij || !hji) continue;
    worst_id = std::max(worst_id, (homography(ci, ci, 1.5, ci.rotation() * Vec3::UnitZ()) - Mat3::Identity()).cwiseAbs().maxCoeff());
    for (double du : {-3.0, 0.0, 3.0})
      for (double dv : {-3.0, 0.0, 3.0}) {
        const Vec2 a = apply_homography(*hij, u + du, v + dv);
        const Vec2 b = apply_homography(*hji, a.x(), a.y());
        worst = std::max(worst, (b - Vec2(u + du, v + dv)).norm());
      }
    ++pairs;
  }
  o.require(pairs == 1000, "1000 valid camera pairs");
  o.require(worst <= 1e-4, "round trip <= 1e-4 px");
  o.require(worst_id <= 1e-12, "identity for identical cameras");

  const Camera ci = random_plane_camera(rng, 32), cj = random_plane_camera(rng, 32);
  const auto con = [](const Vec3&) { return 0.3; };
  const GBuffer gi = plane_gbuffer(ci, con), gj = plane_gbuffer(cj, con);
  const MvView src[] = {{&cj, &gj}};
  const MvPlan plan = plan_mv({&ci, &gi}, src);
  const GBuffer* sp[] = {&gj};
  const double zero = mv_loss(plan, gi, sp).total;
  const GBuffer li = plane_gbuffer(ci, con), lj = plane_gbuffer(cj, con, 0.5);
  const MvView src2[] = {{&cj, &lj}};
  const MvPlan plan2 = plan_mv({&ci, &li}, src2);
  const GBuffer* sp2[] = {&lj};
  const MvLoss off = mv_loss(plan2, li, sp2);
  o.require(plan.valid_pairs > 0 && zero == 0.0, "zero loss on constant maps");
  o.require(plan2.valid_pairs > 0 && std::abs(off.metallic - 0.25) <= 1e-12 && std::abs(off.total - 0.25 / 3) <= 1e-12,
            "constant offset gives the closed-form MSE");
  o.detail << pairs << " pairs, worst round trip " << worst << " px, constant-map loss " << zero
           << ", offset metallic MSE " << off.metallic << " (" << plan2.valid_pairs << " patch pairs)";
}

// Mean reflection score over pixels of `label` (0 = any foreground) in every
// fourth view, each scored against its four nearest neighbors.
struct ScoreStats {
  double mean = 0.0;
  double scale_err = 0.0;
  std::size_t pixels = 0;
};

ScoreStats toy_scores(const ToyScene& s, const std::vector<Image>& images, std::uint16_t label) {
  std::vector<GBuffer> gbs;
  for (const Camera& c : s.cameras) gbs.push_back(splat_forward(s.gaussians, c));
  ScoreStats st;
  double sum = 0.0;
  for (std::size_t v = 0; v < s.cameras.size(); v += 4) {
    const PriorView ref{&s.cameras[v], &images[v], &gbs[v].depth, &gbs[v].normal};
    std::vector<PriorView> nb, nb_scaled;
    std::vector<Image> scaled;
    scaled.reserve(4);
    for (std::size_t j : nearest_cameras(s.cameras, v, 4)) {
      nb.push_back({&s.cameras[j], &images[j], &gbs[j].depth, &gbs[j].normal});
      scaled.push_back(images[j]);
      for (double& x : scaled.back().data) x *= 2.5;
      nb_scaled.push_back({&s.cameras[j], &scaled.back(), &gbs[j].depth, &gbs[j].normal});
    }
    const Image score = reflection_score(ref, nb), rescored = reflection_score(ref, nb_scaled);
    for (std::size_t p = 0; p < score.pixel_count(); ++p) {
      st.scale_err = std::max(st.scale_err, std::abs(score.data[p] - rescored.data[p]));
      if (!(score.data[p] > 0.0)) continue;
      if (label != 0 && s.labels[v].labels[p] != label) continue;
      sum += score.data[p];
      ++st.pixels;
    }
  }
  st.mean = st.pixels ? sum / st.pixels : 0.0;
  return st;
}

std::vector<Image> diffuse_only_images(const ToyScene& s) {
  std::vector<Image> out;
  for (const Camera& c : s.cameras) {
    const GBuffer gb = splat_forward(s.gaussians, c);
    Image img(c.width(), c.height(), 3);
    for (std::size_t p = 0; p < img.pixel_count(); ++p)
      for (int k = 0; k < 3; ++k) img.data[3 * p + k] = gb.diffuse.data[3 * p + k];
    out.push_back(std::move(img));
  }
  return out;
}

// Bound on the mean score of view-independent (Lambertian) renders. Splat
// alpha ripple, bilinear resampling and windows that mix differently colored
// objects keep it above zero; the mirror plane scores about 0.12.
constexpr double kLambertianBound = 0.03;

void criterion_reflection_prior(Outcome& o) {
  const ToyOptions opts{.image_size = 64, .views = 16, .env_resolution = 16};
  double scale_err = 0.0;
  for (const std::string& name : toy_scene_names()) {
    const ToyScene s = make_toy_scene(name, opts);
    const ScoreStats st = toy_scores(s, diffuse_only_images(s), 0);
    o.require(st.pixels > 0 && st.mean <= kLambertianBound, "Lambertian " + name + " score <= 0.03");
    o.detail << name << " Lambertian " << st.mean << ", ";
  }

  // Mirror plane against the same plane re-rendered matte.
  const ToyScene mirror = make_toy_scene("plane-mirror", opts);
  const ScoreStats ms = toy_scores(mirror, mirror.images, 1);
  scale_err = std::max(scale_err, ms.scale_err);
  GaussianSet matte = mirror.gaussians;
  for (auto& g : matte) {
    g.metallic = 0.0;
    g.roughness = 0.8;
  }
  const DiskBVH bvh = DiskBVH::build(matte);
  std::vector<Image> matte_images;
  for (const Camera& c : mirror.cameras)
    matte_images.push_back(render_view(matte, mirror.environment, shared_dfg(), bvh, c, StageFlags{}, {}).final);
  const ScoreStats mt = toy_scores(mirror, matte_images, 1);
  scale_err = std::max(scale_err, mt.scale_err);
  o.require(ms.mean >= 5.0 * mt.mean, "mirror plane scores >= 5x the matte plane");
  o.require(scale_err <= 1e-6, "luminance scale invariance");

  // {0, 1} two-view construction.
  const Camera c = look_at_camera(Vec3(0.5, -2, 2), Vec3::Zero(), Vec3::UnitZ(), 40.0, 16, 16);
  const GBuffer gb = plane_gbuffer(c, [](const Vec3&) { return 0.0; });
  const Image zero(16, 16, 3, 0.0), one(16, 16, 3, 1.0);
  const PriorView nb01[] = {{&c, &one, &gb.depth, &gb.normal}};
  const double s01 = reflection_score({&c, &zero, &gb.depth, &gb.normal}, nb01).at(8, 8);
  o.require(std::abs(s01 - 0.5) <= 1e-12, "{0,1} score is 0.5");

  // One-sidedness of the reflection loss, pixel by pixel.
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  bool one_sided = true;
  for (int i = 0; i < 10000; ++i) {
    ReflectionPrior pr;
    pr.w_ref = Image(1, 1, 1, u(rng));
    pr.gate = {1};
    pr.target = Image(1, 1, 1, u(rng));
    const double m = pr.target.data[0] + (1.0 - pr.target.data[0]) * u(rng);
    Image g(1, 1, 1);
    one_sided = one_sided && reflection_loss(Image(1, 1, 1, m), pr, &g) == 0.0 && g.data[0] == 0.0;
  }
  o.require(one_sided, "reflection loss exactly 0 when metallic >= target");

  // Permutation invariance of the fusion.
  std::vector<Image> scores, depths;
  std::vector<Camera> cams;
  for (std::size_t v = 0; v < 6; ++v) {
    Image sc(64, 64, 1);
    for (double& x : sc.data) x = u(rng);
    scores.push_back(sc);
    depths.push_back(splat_forward(mirror.gaussians, mirror.cameras[v]).depth);
    cams.push_back(mirror.cameras[v]);
  }
  const FuseOptions fo{.radius = 0.02, .top_k = 8};
  const auto fused = fuse_scores(scores, depths, cams, fo);
  std::vector<std::size_t> perm{3, 5, 0, 2, 4, 1};
  std::vector<Image> ps, pd;
  std::vector<Camera> pc;
  for (std::size_t k : perm) {
    ps.push_back(scores[k]);
    pd.push_back(depths[k]);
    pc.push_back(cams[k]);
  }
  const auto fused_p = fuse_scores(ps, pd, pc, fo);
  bool perm_ok = true;
  for (std::size_t k = 0; k < perm.size(); ++k) perm_ok = perm_ok && fused_p[k].data == fused[perm[k]].data;
  o.require(perm_ok, "fusion permutation invariance");
  o.detail << "mirror " << ms.mean << " vs matte " << mt.mean << ", {0,1} score " << s01 << ", scale err "
           << scale_err;
}

// ---------------------------------------------------------------------------

struct RunSummary {
  TrainResult result;
  double seconds = 0;
};

RunSummary run_toy(const std::string& scene, const std::function<void(TrainConfig&)>& tweak,
                   const IterationHook& hook = {}) {
  TrainConfig cfg;
  cfg.toy = scene;
  if (tweak) tweak(cfg);
  cfg.validate();
  const TrainData data = load_train_data(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  RunSummary s;
  s.result = train(data, cfg, hook);
  s.seconds = seconds_since(t0);
  return s;
}

// Gating checks collected by the instrumented main run.
struct GatingLog {
  long env_checked = 0, env_changed = 0;
  long mv_checked = 0, mv_nonzero = 0;
  long n_checked = 0, n_nonzero = 0;
  long normal_prior_active = 0;
  std::vector<double> env0;
};

// PSNR on pixels whose ground-truth reflected rays are occluded (O > 0.5).
double occluded_psnr(const TrainResult& r, const TrainConfig& cfg, const TrainData& data, const ToyScene& truth,
                     std::size_t* pixels) {
  const GaussianSet gs = decode_gaussians(r.params);
  EnvironmentCubemap env = data.environment;
  decode_environment(r.params, env);
  const auto renders = render_views(gs, env, data, r.test_views, cfg);
  const DiskBVH bvh = DiskBVH::build(truth.gaussians);
  const PipelineOptions po = cfg.pipeline_options();
  double se = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < r.test_views.size(); ++k) {
    const std::size_t v = r.test_views[k];
    const RenderLayers gt = render_view(truth.gaussians, truth.environment, shared_dfg(), bvh, truth.cameras[v],
                                        StageFlags{}, po);
    for (std::size_t p = 0; p < gt.incident.occlusion.pixel_count(); ++p) {
      if (!(gt.incident.occlusion.data[p] > 0.5)) continue;
      for (int c = 0; c < 3; ++c) {
        const double d = renders[k].data[3 * p + c] - data.images[v].data[3 * p + c];
        se += d * d;
      }
      ++n;
    }
  }
  *pixels = n;
  return n ? 10.0 * std::log10(1.0 / (se / (3.0 * n))) : 0.0;
}

struct EndToEnd {
  bool ran = false;
  GatingLog gating;
  std::ostringstream log;
};

void criterion_end_to_end(Outcome& o, EndToEnd& e2e) {
  e2e.ran = true;
  GatingLog& g = e2e.gating;
  TrainConfig probe;
  probe.toy = "plane-mirror";
  probe.validate();
  g.env0 = EnvironmentCubemap(probe.env_resolution, Vec3::Constant(probe.env_init)).base();
  const Schedule sched = probe.schedule;
  const RunSummary full = run_toy("plane-mirror", nullptr, [&](const IterationInfo& info) {
    if (info.iteration < sched.pbr_start) {
      ++g.env_checked;
      if (info.params->env != g.env0) ++g.env_changed;
    }
    if (info.iteration < sched.mv_start) {
      ++g.mv_checked;
      if (info.loss->multiview != 0.0 || info.loss->reflection != 0.0) ++g.mv_nonzero;
      if (info.loss->normal_prior != 0.0) ++g.normal_prior_active;
    } else {
      ++g.n_checked;
      if (info.loss->normal_prior != 0.0) ++g.n_nonzero;
    }
  });
  const double psnr_full = full.result.heldout_psnr;
  o.require(full.result.status == TrainStatus::kCompleted, "full run completed");
  o.require(psnr_full >= 35.0, "plane-mirror held-out PSNR >= 35 dB");
  o.require(full.seconds <= 900.0, "full run <= 15 min");
  std::printf("  plane-mirror full model: %.3f dB in %.0f s (%zu gaussians)\n", psnr_full, full.seconds,
              full.result.params.count());
  std::fflush(stdout);

  const RunSummary ablate = run_toy("plane-mirror", [](TrainConfig& c) {
    c.weights.multiview = 0.0;
    c.weights.reflection = 0.0;
  });
  const double psnr_ablate = ablate.result.heldout_psnr;
  o.require(psnr_ablate < psnr_full, "ablation without multi-view and reflection terms scores lower");
  std::printf("  plane-mirror without L_mv/L_ref: %.3f dB in %.0f s\n", psnr_ablate, ablate.seconds);
  std::fflush(stdout);

  TrainConfig occ_cfg;
  occ_cfg.toy = "occluder-box";
  occ_cfg.validate();
  const TrainData occ_data = load_train_data(occ_cfg);
  const ToyScene truth = make_toy_scene("occluder-box", {.seed = occ_cfg.seed});
  const RunSummary traced = run_toy("occluder-box", nullptr);
  TrainConfig flat_cfg = occ_cfg;
  flat_cfg.use_trace = false;
  const RunSummary flat = run_toy("occluder-box", [](TrainConfig& c) { c.use_trace = false; });
  std::size_t px_t = 0, px_f = 0;
  const double occ_t = occluded_psnr(traced.result, occ_cfg, occ_data, truth, &px_t);
  const double occ_f = occluded_psnr(flat.result, flat_cfg, occ_data, truth, &px_f);
  o.require(px_t > 0, "occluded pixels exist in held-out views");
  o.require(occ_f < occ_t, "no-trace ablation scores lower on occluded pixels");
  std::printf("  occluder-box occluded-pixel PSNR: traced %.3f dB, no trace %.3f dB over %zu px "
              "(full-image %.3f vs %.3f dB)\n",
              occ_t, occ_f, px_t, traced.result.heldout_psnr, flat.result.heldout_psnr);
  o.detail << "full " << psnr_full << " dB, no mv/ref " << psnr_ablate << " dB, occluded px traced " << occ_t
           << " dB vs untraced " << occ_f << " dB";
}

void criterion_gating(Outcome& o, EndToEnd& e2e) {
  if (!e2e.ran) {
    // Criterion 6 was not selected: instrument a dedicated run on the default schedule.
    TrainConfig probe;
    probe.toy = "plane-mirror";
    probe.validate();
    GatingLog& g = e2e.gating;
    g.env0 = EnvironmentCubemap(probe.env_resolution, Vec3::Constant(probe.env_init)).base();
    const Schedule sched = probe.schedule;
    run_toy("plane-mirror", nullptr, [&](const IterationInfo& info) {
      if (info.iteration < sched.pbr_start) {
        ++g.env_checked;
        if (info.params->env != g.env0) ++g.env_changed;
      }
      if (info.iteration < sched.mv_start) {
        ++g.mv_checked;
        if (info.loss->multiview != 0.0 || info.loss->reflection != 0.0) ++g.mv_nonzero;
        if (info.loss->normal_prior != 0.0) ++g.normal_prior_active;
      } else {
        ++g.n_checked;
        if (info.loss->normal_prior != 0.0) ++g.n_nonzero;
      }
    });
  }
  const GatingLog& g = e2e.gating;
  o.require(g.env_checked > 0 && g.env_changed == 0, "env texels bit-unchanged before pbr_start");
  o.require(g.mv_checked > 0 && g.mv_nonzero == 0, "L_mv and L_ref exactly 0 before mv_start");
  o.require(g.n_checked > 0 && g.n_nonzero == 0, "L_n exactly 0 after mv_start");
  o.require(g.normal_prior_active > 0, "L_n live before mv_start (control)");
  o.detail << g.env_checked << " pre-PBR iterations, " << g.mv_checked << " pre-multi-view iterations, "
           << g.n_checked << " post-multi-view iterations checked";
}

void criterion_determinism(Outcome& o) {
  // Repeated single-threaded runs.
  TrainConfig cfg;
  cfg.toy = "occluder-box";
  cfg.schedule.total = 120;
  cfg.schedule.warmup_end = 30;
  cfg.schedule.pbr_start = 30;
  cfg.schedule.mv_start = 60;
  cfg.schedule.prior_rebuild_interval = 40;
  cfg.prune_interval = 50;
  cfg.eval_interval = 0;
  cfg.validate();
  TrainData data = load_train_data(cfg);
  omp_set_num_threads(1);
  std::vector<std::vector<double>> traj;
  const TrainResult a = train(data, cfg, [&](const IterationInfo& i) { traj.push_back(i.params->gaussians); });
  std::size_t k = 0, diverging = 0;
  const TrainResult b = train(data, cfg, [&](const IterationInfo& i) {
    if (k >= traj.size() || traj[k] != i.params->gaussians) ++diverging;
    ++k;
  });
  o.require(k == traj.size() && diverging == 0 && a.params.gaussians == b.params.gaussians &&
                a.params.env == b.params.env,
            "single-threaded runs bit-identical");

  // Forward and backward at 1 vs 4 threads on a scene with every path live.
  const GradcheckScene s = make_gradcheck_scene(10, 32, 8, 3);
  const GaussianSet& gs = s.gaussians;
  const EnvironmentCubemap& env = s.env;
  const TrainView view{&s.camera, &s.target, &s.normal_prior, &s.reflection};
  std::vector<const Camera*> src;
  for (const auto& c : s.sources) src.push_back(&c);
  const DiskBVH bvh = DiskBVH::build(gs);
  const PipelineOptions po = cfg.pipeline_options();
  bool same = true;
  for (const StageFlags& f : {StageFlags{true, true, true, false}, StageFlags{true, true, false, true}}) {
    Gradients g1, g4;
    Image r1, r4;
    omp_set_num_threads(1);
    const auto z1 = freeze_structure(gs, bvh, view, src, f, po);
    const LossTerms l1 = evaluate_loss(gs, env, shared_dfg(), z1, view, f, po, &g1, &r1);
    omp_set_num_threads(4);
    const auto z4 = freeze_structure(gs, bvh, view, src, f, po);
    const LossTerms l4 = evaluate_loss(gs, env, shared_dfg(), z4, view, f, po, &g4, &r4);
    same = same && l1.total == l4.total && r1.data == r4.data && g1.env == g4.env;
    for (std::size_t i = 0; i < g1.gaussians.size(); ++i) {
      const GaussianGrad &x = g1.gaussians[i], &y = g4.gaussians[i];
      same = same && x.position == y.position && x.rotation == y.rotation && x.scale == y.scale &&
             x.opacity == y.opacity && x.diffuse == y.diffuse && x.albedo == y.albedo && x.metallic == y.metallic &&
             x.roughness == y.roughness && x.residual == y.residual;
    }
  }
  omp_set_num_threads(omp_get_num_procs());
  o.require(same, "4-thread forward/backward bit-identical to 1 thread");
  o.detail << traj.size() << " iterations compared, " << diverging << " diverging; threaded forward/backward "
           << (same ? "identical" : "different");
}

}  // namespace
}  // namespace refsplat

int main(int argc, char** argv) {
  using namespace refsplat;
  spdlog::set_level(spdlog::level::warn);
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  EndToEnd e2e;
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria = {
      {"gradient suite", criterion_gradients},
      {"split-sum oracle", criterion_split_sum},
      {"ray-tracing equivalence", criterion_raytrace},
      {"homography suite", criterion_homography},
      {"reflection-prior suite", criterion_reflection_prior},
      {"end-to-end toy reproduction", [&](Outcome& o) { criterion_end_to_end(o, e2e); }},
      {"schedule gating", [&](Outcome& o) { criterion_gating(o, e2e); }},
      {"determinism", criterion_determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    if (!o.pass) ++failed;
    std::printf("%s criterion %d (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(),
                o.detail.str().c_str(), std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
