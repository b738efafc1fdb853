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

#include "refsplat/trainer/trainer.hpp"

#include "refsplat/toy_scenes.hpp"
#include "refsplat/trainer/metrics.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

namespace refsplat {

namespace fs = std::filesystem;

namespace {

bool finite_grads(const Gradients& g) {
  for (const auto& x : g.gaussians) {
    const double s = x.position.sum() + x.rotation.sum() + x.scale.sum() + x.opacity + x.diffuse.sum() + x.albedo +
                     x.metallic + x.roughness + x.residual.sum();
    if (!std::isfinite(s)) return false;
  }
  for (double v : g.env)
    if (!std::isfinite(v)) return false;
  return true;
}

double scene_diagonal(std::span<const Gaussian> gaussians) {
  if (gaussians.empty()) return 0.0;
  Vec3 lo = gaussians[0].position, hi = lo;
  for (const auto& g : gaussians) {
    lo = lo.cwiseMin(g.position);
    hi = hi.cwiseMax(g.position);
  }
  return (hi - lo).norm();
}

std::string stem_of(const std::string& path, std::size_t index) {
  const std::string s = fs::path(path).stem().string();
  return s.empty() ? "view_" + std::to_string(index) : s;
}

}  // namespace

void holdout_split(std::size_t views, int every, std::vector<std::size_t>& train, std::vector<std::size_t>& test) {
  train.clear();
  test.clear();
  for (std::size_t i = 0; i < views; ++i) {
    if (every > 0 && i % static_cast<std::size_t>(every) == 0)
      test.push_back(i);
    else
      train.push_back(i);
  }
  // A single view is both trained on and evaluated.
  if (train.empty()) train = test;
}

TrainData load_train_data(const TrainConfig& cfg) {
  TrainData d;
  d.background = cfg.background;
  if (!cfg.toy.empty()) {
    ToyOptions opts;
    opts.seed = cfg.seed;
    ToyScene s = make_toy_scene(cfg.toy, opts);
    d.cameras = s.cameras;
    d.images = std::move(s.images);
    d.normal_priors = std::move(s.normals);
    d.labels = std::move(s.labels);
    for (std::size_t i = 0; i < d.cameras.size(); ++i) d.names.push_back("view_" + std::to_string(i));
    d.initial = perturbed_initialization(s.gaussians, cfg.jitter, cfg.seed);
    d.background = s.background;
  } else {
    if (cfg.cameras.empty() || cfg.points.empty()) throw InputError("config needs either 'toy' or both 'cameras' and 'points'");
    const auto frames = load_cameras(cfg.cameras);
    const fs::path base = fs::path(cfg.cameras).parent_path();
    for (std::size_t i = 0; i < frames.size(); ++i) {
      const auto& f = frames[i];
      const fs::path img = fs::path(f.file_path).is_absolute() ? fs::path(f.file_path) : base / f.file_path;
      if (!fs::exists(img)) throw InputError("missing image: " + img.string());
      Image im = load_image(img.string());
      if (im.width != f.camera.width() || im.height != f.camera.height())
        throw InputError("image size does not match its camera: " + img.string());
      if (im.channels > 3) {
        Image rgb(im.width, im.height, 3);
        for (std::size_t p = 0; p < im.pixel_count(); ++p)
          for (int c = 0; c < 3; ++c) rgb.data[p * 3 + c] = im.data[p * im.channels + c];
        im = std::move(rgb);
      }
      d.cameras.push_back(f.camera);
      d.names.push_back(stem_of(f.file_path, i));
      d.images.push_back(std::move(im));
      Image prior;
      if (!cfg.normal_dir.empty()) {
        const fs::path p = fs::path(cfg.normal_dir) / (d.names.back() + ".pfm");
        if (fs::exists(p)) prior = load_pfm(p.string());
      }
      d.normal_priors.push_back(std::move(prior));
    }
    if (!cfg.label_dir.empty()) {
      for (const auto& name : d.names) {
        const fs::path p = fs::path(cfg.label_dir) / (name + ".png");
        if (!fs::exists(p)) {
          spdlog::warn("label map {} missing, region labels ignored", p.string());
          d.labels.clear();
          break;
        }
        d.labels.push_back(load_labels(p.string()));
      }
    }
    if (!fs::exists(cfg.points)) throw InputError("missing points file: " + cfg.points);
    d.initial = init_gaussians(load_points(cfg.points));
  }
  if (!cfg.environment.empty())
    d.environment = load_environment(cfg.environment);
  else
    d.environment = EnvironmentCubemap(cfg.env_resolution, Vec3::Constant(cfg.env_init));
  return d;
}

void write_metrics_csv(const std::vector<MetricRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write metrics file: " + path);
  out << "iteration,view,total,photometric,l1,dssim,depth_normal,normal_prior,multiview,reflection,heldout_psnr,"
         "gaussians\n";
  out.precision(9);
  for (const auto& r : rows) {
    out << r.iteration << ',' << r.view << ',' << r.loss.total << ',' << r.loss.photometric << ',' << r.loss.l1
        << ',' << r.loss.dssim << ',' << r.loss.depth_normal << ',' << r.loss.normal_prior << ','
        << r.loss.multiview << ',' << r.loss.reflection << ',';
    if (r.heldout_psnr >= 0.0) out << r.heldout_psnr;
    out << ',' << r.gaussians << '\n';
  }
}

const DfgLut& dfg_for(const TrainConfig& cfg, DfgLut& storage) {
  if (cfg.dfg_resolution == 64 && cfg.dfg_samples == 1024) return shared_dfg();
  storage = precompute_dfg(cfg.dfg_resolution, cfg.dfg_samples);
  return storage;
}

std::vector<ReflectionPrior> build_reflection_priors(std::span<const Gaussian> gaussians, const TrainData& data,
                                                     std::span<const std::size_t> views, const TrainConfig& cfg,
                                                     std::vector<RegionStat>* stats) {
  const PipelineOptions po = cfg.pipeline_options();
  const std::size_t n = views.size();
  std::vector<GBuffer> gb(n);
  std::vector<Camera> cams(n);
  for (std::size_t k = 0; k < n; ++k) {
    cams[k] = data.cameras[views[k]];
    gb[k] = splat_forward(gaussians, cams[k], po.raster);
  }
  std::vector<PriorView> pv(n);
  for (std::size_t k = 0; k < n; ++k) pv[k] = {&cams[k], &data.images[views[k]], &gb[k].depth, &gb[k].normal};

  ScoreOptions so;
  so.patch_half = cfg.score_patch / 2;
  std::vector<Image> scores(n), depths(n), metallic(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<PriorView> nb;
    for (std::size_t j : nearest_cameras(cams, k, static_cast<std::size_t>(cfg.score_neighbors))) nb.push_back(pv[j]);
    scores[k] = reflection_score(pv[k], nb, so);
    depths[k] = gb[k].depth;
    metallic[k] = Image(gb[k].width, gb[k].height, 1);
    for (std::size_t p = 0; p < metallic[k].pixel_count(); ++p) {
      const double a = gb[k].alpha.data[p];
      metallic[k].data[p] = a > 1e-6 ? gb[k].metallic.data[p] / a : 0.0;
    }
  }
  FuseOptions fo;
  fo.radius = cfg.fuse_radius * scene_diagonal(gaussians);
  fo.top_k = cfg.fuse_k;
  const std::vector<Image> w_ref = fuse_scores(scores, depths, cams, fo);

  std::vector<LabelMap> labels;
  if (data.labels.size() == data.cameras.size())
    for (std::size_t v : views) labels.push_back(data.labels[v]);
  return derive_gate_and_target(w_ref, labels, metallic, cfg.gate, stats);
}

std::vector<Image> render_views(std::span<const Gaussian> gaussians, const EnvironmentCubemap& env,
                                const TrainData& data, std::span<const std::size_t> views, const TrainConfig& cfg) {
  DfgLut storage;
  const DfgLut& dfg = dfg_for(cfg, storage);
  const PipelineOptions po = cfg.pipeline_options();
  StageFlags flags = cfg.schedule.flags_at(cfg.schedule.total, cfg.use_trace);
  DiskBVH bvh;
  if (flags.trace) bvh = DiskBVH::build(gaussians, po.trace);
  std::vector<Image> out;
  for (std::size_t v : views) out.push_back(render_view(gaussians, env, dfg, bvh, data.cameras[v], flags, po).final);
  return out;
}

TrainResult train(const TrainData& data, const TrainConfig& cfg_in, const IterationHook& hook) {
  TrainConfig cfg = cfg_in;
  cfg.validate();
  const Schedule& sched = cfg.schedule;
  const PipelineOptions po = cfg.pipeline_options();
  DfgLut dfg_storage;
  const DfgLut& dfg = dfg_for(cfg, dfg_storage);

  TrainResult res;
  holdout_split(data.cameras.size(), cfg.holdout_every, res.train_views, res.test_views);
  res.params = encode_parameters(data.initial, data.environment);
  EnvironmentCubemap env = data.environment;
  Optimizer opt(cfg.lr, AdamHyper{});

  spdlog::info("training {} gaussians on {} views ({} held out), {} iterations", res.params.count(),
               res.train_views.size(), res.test_views.size(), sched.total);
  spdlog::info("loss weights: depth_normal={} normal_prior={} multiview={} reflection={}", cfg.weights.depth_normal,
               cfg.weights.normal_prior, cfg.weights.multiview, cfg.weights.reflection);

  // Multi-view sources per training view, among training views.
  std::vector<Camera> train_cams;
  for (std::size_t v : res.train_views) train_cams.push_back(data.cameras[v]);
  std::vector<std::vector<const Camera*>> sources(res.train_views.size());
  for (std::size_t k = 0; k < res.train_views.size(); ++k)
    for (std::size_t j : nearest_cameras(train_cams, k, static_cast<std::size_t>(cfg.mv_sources)))
      sources[k].push_back(&data.cameras[res.train_views[j]]);

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(res.train_views.size());
  std::size_t cursor = order.size();

  DiskBVH bvh;
  long last_bvh_build = std::numeric_limits<long>::min() / 2;
  std::vector<ReflectionPrior> priors;
  long last_prior_build = -1;

  double ema = -1.0, ema_min = std::numeric_limits<double>::infinity();
  long above = 0;
  StageFlags prev_flags = sched.flags_at(0, cfg.use_trace);

  auto evaluate_heldout = [&](std::span<const Gaussian> gs) {
    if (res.test_views.empty()) return 0.0;
    const auto renders = render_views(gs, env, data, res.test_views, cfg);
    double sum = 0.0;
    for (std::size_t k = 0; k < renders.size(); ++k) sum += psnr(renders[k], data.images[res.test_views[k]]);
    return sum / renders.size();
  };

  for (long it = 0; it < sched.total; ++it) {
    const StageFlags flags = sched.flags_at(it, cfg.use_trace);
    GaussianSet gaussians = decode_gaussians(res.params);

    if (flags.multiview && cfg.weights.reflection > 0.0 &&
        (last_prior_build < 0 || it - last_prior_build >= sched.prior_rebuild_interval)) {
      priors = build_reflection_priors(gaussians, data, res.train_views, cfg);
      last_prior_build = it;
    }
    if (flags.trace) {
      if (bvh.primitive_count() != gaussians.size() || it - last_bvh_build >= cfg.bvh_rebuild_interval) {
        bvh = DiskBVH::build(gaussians, po.trace);
        last_bvh_build = it;
      } else {
        bvh.refit(gaussians);
      }
    }

    if (cursor >= order.size()) {
      for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
      std::shuffle(order.begin(), order.end(), rng);
      cursor = 0;
    }
    const std::size_t k = order[cursor++];
    const std::size_t v = res.train_views[k];
    TrainView view;
    view.camera = &data.cameras[v];
    view.image = &data.images[v];
    if (v < data.normal_priors.size() && !data.normal_priors[v].empty()) view.normal_prior = &data.normal_priors[v];
    if (!priors.empty()) view.reflection = &priors[k];

    const FrozenStructure frozen = freeze_structure(gaussians, bvh, view, sources[k], flags, po);
    Gradients grads;
    const LossTerms loss = evaluate_loss(gaussians, env, dfg, frozen, view, flags, po, &grads);

    if (!std::isfinite(loss.total) || !finite_grads(grads)) {
      ++res.nan_aborts;
      spdlog::error("iteration {} aborted: non-finite loss or gradient (view {}, total={}, photometric={}, "
                    "depth_normal={}, normal_prior={}, multiview={}, reflection={}, gaussians={})",
                    it, v, loss.total, loss.photometric, loss.depth_normal, loss.normal_prior, loss.multiview,
                    loss.reflection, gaussians.size());
      continue;
    }

    const std::vector<double> raw = raw_gaussian_gradient(res.params, grads.gaussians);
    const std::span<const double> env_grad = flags.pbr ? std::span<const double>(grads.env) : std::span<const double>();
    opt.step(res.params, raw, env_grad, it, sched.total);
    if (!env_grad.empty()) decode_environment(res.params, env);
    res.iterations = it + 1;

    MetricRow row;
    row.iteration = it;
    row.view = v;
    row.loss = loss;
    row.gaussians = res.params.count();

    if (it + 1 > sched.warmup_end && cfg.prune_interval > 0 && (it + 1) % cfg.prune_interval == 0) {
      std::vector<std::size_t> drop;
      for (std::size_t i = 0; i < res.params.count(); ++i)
        if (decode_gaussian(res.params.raw(i)).opacity < cfg.prune_threshold) drop.push_back(i);
      if (!drop.empty()) {
        erase_gaussians(res.params, drop);
        opt.erase_gaussians(drop);
        spdlog::info("iteration {}: pruned {} gaussians, {} remain", it + 1, drop.size(), res.params.count());
      }
    }

    if (hook) hook({it, v, flags, &loss, &res.params});

    const bool last = it + 1 == sched.total;
    if ((cfg.eval_interval > 0 && (it + 1) % cfg.eval_interval == 0) || last) {
      row.heldout_psnr = evaluate_heldout(decode_gaussians(res.params));
      spdlog::info("iteration {}: L_c={:.5f} held-out PSNR={:.3f} dB", it + 1, loss.photometric, row.heldout_psnr);
    }
    res.metrics.push_back(row);

    // Divergence guard on a smoothed L_c so that per-view variation does not
    // trip it. The reference minimum restarts when the active stages change.
    if (flags.pbr != prev_flags.pbr || flags.multiview != prev_flags.multiview) {
      ema_min = std::numeric_limits<double>::infinity();
      above = 0;
    }
    prev_flags = flags;
    ema = ema < 0.0 ? loss.photometric : 0.95 * ema + 0.05 * loss.photometric;
    ema_min = std::min(ema_min, ema);
    above = ema > cfg.divergence_factor * ema_min ? above + 1 : 0;
    if (above >= cfg.divergence_window) {
      spdlog::error("divergence guard: smoothed L_c {:.6f} above {}x its running minimum {:.6f} for {} iterations",
                    ema, cfg.divergence_factor, ema_min, above);
      res.status = TrainStatus::kDiverged;
      break;
    }
  }

  if (sched.total == 0 || res.metrics.empty() || res.metrics.back().heldout_psnr < 0.0)
    res.heldout_psnr = evaluate_heldout(decode_gaussians(res.params));
  else
    res.heldout_psnr = res.metrics.back().heldout_psnr;
  res.optimizer = opt.state();
  return res;
}

}  // namespace refsplat
