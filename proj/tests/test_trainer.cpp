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

#include "refsplat/trainer/checkpoint.hpp"
#include "refsplat/trainer/gradcheck.hpp"
#include "refsplat/trainer/losses.hpp"
#include "refsplat/trainer/metrics.hpp"
#include "refsplat/trainer/optimizer.hpp"
#include "test_util.hpp"
#include "trainer_fixture.hpp"

#include <gtest/gtest.h>
#include <omp.h>

#include <fstream>
#include <random>

namespace refsplat {
namespace {

Image noise_image(int w, int h, std::uint64_t seed) {
  Image img(w, h, 3);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& v : img.data) v = u(rng);
  return img;
}

TEST(Photometric, ExamplesAndSymmetry) {
  const Image a = noise_image(16, 12, 1), b = noise_image(16, 12, 2);
  EXPECT_NEAR(photometric_loss(a, a).total, 0.0, 1e-15);
  const PhotometricLoss ab = photometric_loss(a, b), ba = photometric_loss(b, a);
  EXPECT_NEAR(ab.total, ba.total, 1e-15);

  const Image zero(16, 16, 3, 0.0), one(16, 16, 3, 1.0);
  const PhotometricLoss l = photometric_loss(one, zero);
  const double c1 = 0.01 * 0.01;
  const double s = c1 / (1.0 + c1);  // constant images: only the luminance factor survives
  EXPECT_NEAR(l.l1, 1.0, 1e-15);
  EXPECT_NEAR(l.total, 0.8 + 0.2 * (1.0 - s) / 2.0, 1e-12);
}

TEST(Photometric, GradientMatchesFiniteDifferences) {
  const Image a = noise_image(12, 10, 3), b = noise_image(12, 10, 4);
  Image grad(12, 10, 3);
  photometric_loss(a, b, &grad);
  for (std::size_t i = 0; i < a.data.size(); i += 5) {
    Image p = a, m = a;
    p.data[i] += 1e-7;
    m.data[i] -= 1e-7;
    const double fd = (photometric_loss(p, b).total - photometric_loss(m, b).total) / 2e-7;
    EXPECT_NEAR(grad.data[i], fd, 1e-6 + 1e-3 * std::abs(fd));
  }
}

GBuffer slanted_gbuffer(const Camera& cam, const Vec3& n, double offset) {
  GBuffer gb(cam.width(), cam.height());
  for (int y = 0; y < cam.height(); ++y)
    for (int x = 0; x < cam.width(); ++x) {
      gb.depth.at(x, y) = offset / n.dot(cam.camera_ray(x, y));
      gb.alpha.at(x, y) = 1.0;
      gb.depth_valid[y * cam.width() + x] = 1;
      for (int k = 0; k < 3; ++k) gb.normal.at(x, y, k) = n[k];
    }
  return gb;
}

TEST(DepthNormalLoss, AlignedOrthogonalAndSlanted) {
  const Camera cam(30, 30, 11.5, 11.5, Mat3::Identity(), Vec3::Zero(), 24, 24);
  EXPECT_NEAR(depth_normal_loss(slanted_gbuffer(cam, Vec3(0, 0, -1), -2.0), cam), 0.0, 1e-12);
  GBuffer ortho = slanted_gbuffer(cam, Vec3(0, 0, -1), -2.0);
  for (std::size_t p = 0; p < ortho.normal.pixel_count(); ++p) {
    ortho.normal.data[3 * p] = 1.0;
    ortho.normal.data[3 * p + 2] = 0.0;
  }
  EXPECT_NEAR(depth_normal_loss(ortho, cam), 1.0, 1e-12);
  const Vec3 n = Vec3(0.3, 0.5, -0.8).normalized();
  EXPECT_LT(depth_normal_loss(slanted_gbuffer(cam, n, n.dot(Vec3(0, 0, 3))), cam), 1e-3);
  EXPECT_EQ(depth_normal_loss(GBuffer(8, 8), cam), 0.0);
}

TEST(NormalPriorLoss, Examples) {
  Image n(4, 4, 3), p(4, 4, 3);
  for (std::size_t i = 0; i < 16; ++i) {
    n.data[3 * i + 2] = -1.0;
    p.data[3 * i + 2] = -1.0;
  }
  EXPECT_EQ(normal_prior_loss(n, p), 0.0);
  Image anti = p;
  for (double& v : anti.data) v = -v;
  EXPECT_EQ(normal_prior_loss(n, anti), 2.0);
  Image ortho(4, 4, 3);
  for (std::size_t i = 0; i < 16; ++i) ortho.data[3 * i] = 1.0;
  EXPECT_EQ(normal_prior_loss(n, ortho), 1.0);
  EXPECT_EQ(normal_prior_loss(n, Image()), 0.0);
}

TEST(Metrics, ClosedForms) {
  const Image a(8, 8, 3, 0.5);
  EXPECT_EQ(psnr(a, a), 100.0);
  EXPECT_NEAR(psnr(a, Image(8, 8, 3, 0.6)), 20.0, 1e-9);
  Image n(2, 1, 3);
  n.data = {0, 0, 1, 1, 0, 0};
  Image m = n;
  for (double& v : m.data) v = -v;
  EXPECT_NEAR(normal_mae_degrees(n, n), 0.0, 1e-6);
  EXPECT_NEAR(normal_mae_degrees(n, m), 180.0, 1e-9);
  const Image imgs[] = {a};
  const EvalMetrics e = eval_metrics(imgs, imgs);
  EXPECT_EQ(e.psnr, 100.0);
  EXPECT_NEAR(e.ssim, 1.0, 1e-12);
  EXPECT_THROW(eval_metrics({}, {}), std::exception);
}

TEST(Schedule, DeskDefaults) {
  Schedule s;
  s.resolve();
  EXPECT_EQ(s.warmup_end, 300);
  EXPECT_EQ(s.pbr_start, 300);
  EXPECT_EQ(s.mv_start, 1000);
  EXPECT_EQ(s.total, 3000);
  Schedule bad;
  bad.total = 100;
  bad.warmup_end = 50;
  bad.pbr_start = 20;
  EXPECT_THROW(bad.resolve(), InputError);
  const StageFlags early = s.flags_at(10, true), late = s.flags_at(2000, true);
  EXPECT_FALSE(early.pbr);
  EXPECT_TRUE(early.normal_prior);
  EXPECT_FALSE(early.multiview);
  EXPECT_TRUE(late.pbr && late.trace && late.multiview);
  EXPECT_FALSE(late.normal_prior);
}

TEST(Config, ParseRoundTripAndErrors) {
  const TrainConfig c = parse_config("toy = plane-mirror\ntotal_iters = 50 # short\nlambda_mv = 0.3\nbackground = 0.1 0.2 0.3\n");
  EXPECT_EQ(c.toy, "plane-mirror");
  EXPECT_EQ(c.schedule.total, 50);
  EXPECT_EQ(c.weights.multiview, 0.3);
  EXPECT_EQ(c.background, Vec3(0.1, 0.2, 0.3));
  const TrainConfig again = parse_config(config_to_text(c));
  EXPECT_EQ(again.schedule.total, 50);
  EXPECT_EQ(again.weights.multiview, 0.3);
  EXPECT_THROW(parse_config("nonsense = 1\n"), InputError);
  EXPECT_THROW(parse_config("total_iters\n"), InputError);
  EXPECT_THROW(parse_config("lambda_mv = abc\n"), InputError);
  EXPECT_THROW(load_config("/nonexistent/refsplat.cfg"), InputError);
}

TEST(Optimizer, ZeroGradientsAndConstantGradientLimit) {
  const GaussianSet gs = testing::random_disks(3, 1, 0.5);
  ParameterSet params = encode_parameters(gs, EnvironmentCubemap(2));
  const ParameterSet start = params;
  Optimizer opt(LearningRates{}, AdamHyper{});
  std::vector<double> zero(params.gaussians.size(), 0.0);
  opt.step(params, zero, {}, 0, 100);
  EXPECT_EQ(params.gaussians, start.gaussians);
  EXPECT_EQ(params.env, start.env);

  // Fresh state so the bias corrections start at step 1 with the gradient.
  opt = Optimizer(LearningRates{}, AdamHyper{});
  std::vector<double> g(params.gaussians.size(), 0.0);
  g[kSlotOpacity] = 0.3;
  double before = params.gaussians[kSlotOpacity];
  for (int i = 0; i < 200; ++i) {
    before = params.gaussians[kSlotOpacity];
    opt.step(params, g, {}, i + 1, 1000);
  }
  EXPECT_NEAR(before - params.gaussians[kSlotOpacity], LearningRates{}.opacity, 1e-3 * LearningRates{}.opacity);
}

TEST(Optimizer, QuaternionsStayUnitAndNonFiniteGroupsSkipped) {
  const GaussianSet gs = testing::random_disks(5, 2, 0.5);
  ParameterSet params = encode_parameters(gs, EnvironmentCubemap(2));
  Optimizer opt(LearningRates{}, AdamHyper{});
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  for (int it = 0; it < 20; ++it) {
    std::vector<double> g(params.gaussians.size());
    for (double& v : g) v = n(rng);
    opt.step(params, g, {}, it, 20);
    for (std::size_t i = 0; i < params.count(); ++i) {
      const double* r = params.raw(i);
      EXPECT_NEAR(Vec4(r[3], r[4], r[5], r[6]).norm(), 1.0, 1e-6);
    }
  }
  std::vector<double> bad(params.gaussians.size(), 0.1);
  bad[kSlotAlbedo] = std::numeric_limits<double>::quiet_NaN();
  const ParameterSet keep = params;
  const StepReport rep = opt.step(params, bad, {}, 21, 30);
  EXPECT_TRUE(rep.skipped[static_cast<int>(ParamClass::kMaterial)]);
  EXPECT_FALSE(rep.skipped[static_cast<int>(ParamClass::kPosition)]);
  EXPECT_EQ(params.raw(0)[kSlotAlbedo], keep.raw(0)[kSlotAlbedo]);
  EXPECT_NE(params.raw(0)[kSlotPosition], keep.raw(0)[kSlotPosition]);
}

TEST(Parameters, EncodeDecodeRoundTrip) {
  const GaussianSet gs = testing::random_disks(10, 4, 0.5);
  EnvironmentCubemap env(4, Vec3(0.2, 0.4, 0.6));
  const ParameterSet p = encode_parameters(gs, env);
  const GaussianSet back = decode_gaussians(p);
  for (std::size_t i = 0; i < gs.size(); ++i) {
    EXPECT_LE((back[i].position - gs[i].position).norm(), 1e-12);
    EXPECT_NEAR(back[i].scale.x(), gs[i].scale.x(), 1e-12);
    if (gs[i].metallic > 0.011 && gs[i].metallic < 0.989) EXPECT_NEAR(back[i].metallic, gs[i].metallic, 1e-9);
  }
  EnvironmentCubemap out(4);
  decode_environment(p, out);
  EXPECT_EQ(out.base(), env.base());
}

TEST(Checkpoint, RoundTripAndVersionMismatch) {
  const auto dir = testing::scratch_dir("ckpt");
  Checkpoint c;
  c.iteration = 17;
  c.background = Vec3(0.1, 0.2, 0.3);
  c.params = encode_parameters(testing::random_disks(4, 5, 0.5), EnvironmentCubemap(2));
  c.optimizer.gaussians.resize(c.params.gaussians.size());
  c.optimizer.gaussians.m[3] = 0.25;
  c.optimizer.gaussians.step = 9;
  const std::string path = (dir / "c.bin").string();
  save_checkpoint(c, path);
  const Checkpoint r = load_checkpoint(path);
  EXPECT_EQ(r.iteration, 17);
  EXPECT_EQ(r.background, c.background);
  EXPECT_EQ(r.params.gaussians, c.params.gaussians);
  EXPECT_EQ(r.params.env, c.params.env);
  EXPECT_EQ(r.optimizer.gaussians.m, c.optimizer.gaussians.m);
  EXPECT_EQ(r.optimizer.gaussians.step, 9);

  std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
  f.seekp(8);
  const std::uint32_t bogus = 99;
  f.write(reinterpret_cast<const char*>(&bogus), 4);
  f.close();
  EXPECT_THROW(load_checkpoint(path), InputError);
  EXPECT_THROW(load_checkpoint((dir / "missing.bin").string()), InputError);
}

TEST(Gradients, AllCasesMatchFiniteDifferences) {
  const GradcheckResult r = run_gradcheck({.gaussians = 6});
  EXPECT_TRUE(r.pass);
  ASSERT_EQ(r.cases.size(), 8u);
  for (const auto& c : r.cases) {
    EXPECT_TRUE(c.pass) << c.name;
    for (int k = 0; k < kParamClassCount; ++k)
      EXPECT_LE(c.classes[k].worst, 1e-3) << c.name << " " << param_class_name(static_cast<ParamClass>(k));
  }
  for (int k = 0; k < kParamClassCount; ++k)
    EXPECT_GT(r.classes[k].checked, 0u) << param_class_name(static_cast<ParamClass>(k));
}

TEST(Gradients, CorruptedBackwardIsCaught) {
  GradcheckOptions o;
  o.corrupt = [](Gradients& g) {
    for (auto& x : g.gaussians) x.opacity *= 1.5;
  };
  EXPECT_FALSE(run_gradcheck(o).pass);
}

TEST(TotalLoss, ZeroWeightsAndInactiveEnvironment) {
  const GradcheckScene s = make_gradcheck_scene(6, 16, 4, 0);
  const TrainView view{&s.camera, &s.target, &s.normal_prior, &s.reflection};
  const DiskBVH bvh = DiskBVH::build(s.gaussians);
  std::vector<const Camera*> src;
  for (const auto& c : s.sources) src.push_back(&c);
  PipelineOptions opts;
  opts.weights = LossWeights{0, 0, 0, 0};
  const StageFlags all{true, true, true, false};
  const StageFlags mv{true, true, false, true};
  for (const StageFlags& f : {all, mv}) {
    const FrozenStructure fz = freeze_structure(s.gaussians, bvh, view, src, f, opts);
    const LossTerms t = evaluate_loss(s.gaussians, s.env, shared_dfg(), fz, view, f, opts);
    EXPECT_EQ(t.total, t.photometric);
  }
  const StageFlags diffuse{false, false, true, false};
  const FrozenStructure fz = freeze_structure(s.gaussians, bvh, view, src, diffuse, PipelineOptions{});
  Gradients g;
  evaluate_loss(s.gaussians, s.env, shared_dfg(), fz, view, diffuse, PipelineOptions{}, &g);
  for (double v : g.env) EXPECT_EQ(v, 0.0);
}

TEST(Train, ScheduleGatingIsExact) {
  TrainConfig cfg = testing::short_config(40);
  const TrainData data = testing::small_train_data("plane-mirror", 24, 8, cfg);
  const std::vector<double> env0 = EnvironmentCubemap(cfg.env_resolution, Vec3::Constant(cfg.env_init)).base();
  long checked_early = 0, checked_mv = 0;
  train(data, cfg, [&](const IterationInfo& info) {
    if (info.iteration < cfg.schedule.pbr_start) {
      EXPECT_EQ(info.params->env, env0);
      ++checked_early;
    }
    if (info.iteration < cfg.schedule.mv_start) {
      EXPECT_EQ(info.loss->multiview, 0.0);
      EXPECT_EQ(info.loss->reflection, 0.0);
      EXPECT_FALSE(info.flags.multiview);
    } else {
      EXPECT_EQ(info.loss->normal_prior, 0.0);
      EXPECT_TRUE(info.flags.multiview);
      ++checked_mv;
    }
  });
  EXPECT_EQ(checked_early, cfg.schedule.pbr_start);
  EXPECT_EQ(checked_mv, cfg.schedule.total - cfg.schedule.mv_start);
}

TEST(Train, ZeroIterationsReturnsInitialization) {
  TrainConfig cfg = testing::short_config(40);
  cfg.schedule = Schedule{};
  cfg.schedule.total = 0;
  cfg.validate();
  const TrainData data = testing::small_train_data("plane-mirror", 16, 8, cfg);
  const TrainResult r = train(data, cfg);
  EXPECT_EQ(r.iterations, 0);
  EXPECT_EQ(r.params.gaussians, encode_parameters(data.initial, data.environment).gaussians);
}

TEST(Train, SingleThreadedRunsAreBitIdentical) {
  TrainConfig cfg = testing::short_config(100);
  const TrainData data = testing::small_train_data("occluder-box", 20, 8, cfg);
  omp_set_num_threads(1);
  std::vector<std::vector<double>> first;
  const TrainResult a = train(data, cfg, [&](const IterationInfo& i) { first.push_back(i.params->gaussians); });
  std::size_t k = 0;
  bool same = true;
  const TrainResult b = train(data, cfg, [&](const IterationInfo& i) {
    same = same && k < first.size() && first[k] == i.params->gaussians;
    ++k;
  });
  omp_set_num_threads(omp_get_num_procs());
  EXPECT_TRUE(same);
  EXPECT_EQ(k, first.size());
  EXPECT_EQ(a.params.gaussians, b.params.gaussians);
  EXPECT_EQ(a.params.env, b.params.env);
}

TEST(Train, PhotometricLossDecreasesOnEveryToy) {
  for (const std::string& name : toy_scene_names()) {
    TrainConfig cfg = testing::short_config(120);
    cfg.toy = name;
    const TrainData data = testing::small_train_data(name, 24, 8, cfg);
    double at_warmup = 0.0, at_end = 0.0;
    int n_warm = 0, n_end = 0;
    // Average over a few views around each milestone; single views are noisy.
    const TrainResult r = train(data, cfg, [&](const IterationInfo& i) {
      if (i.iteration >= cfg.schedule.warmup_end - 8 && i.iteration < cfg.schedule.warmup_end) {
        at_warmup += i.loss->photometric;
        ++n_warm;
      }
      if (i.iteration >= cfg.schedule.total - 8) {
        at_end += i.loss->photometric;
        ++n_end;
      }
    });
    EXPECT_EQ(r.status, TrainStatus::kCompleted) << name;
    EXPECT_LT(at_end / n_end, at_warmup / n_warm) << name;
  }
}

TEST(Train, HoldoutSplit) {
  std::vector<std::size_t> tr, te;
  holdout_split(17, 8, tr, te);
  EXPECT_EQ(te, (std::vector<std::size_t>{0, 8, 16}));
  EXPECT_EQ(tr.size(), 14u);
}

TEST(Train, MissingInputsNameThePath) {
  TrainConfig cfg;
  cfg.cameras = "/nonexistent/cams.json";
  cfg.points = "/nonexistent/points.txt";
  try {
    load_train_data(cfg);
    FAIL() << "expected InputError";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/"), std::string::npos);
  }
}

}  // namespace
}  // namespace refsplat
