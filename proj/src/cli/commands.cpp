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

#include "refsplat/cli.hpp"

#include "refsplat/raytrace.hpp"
#include "refsplat/toy_scenes.hpp"
#include "refsplat/trainer/checkpoint.hpp"
#include "refsplat/trainer/config.hpp"
#include "refsplat/trainer/gradcheck.hpp"
#include "refsplat/trainer/metrics.hpp"
#include "refsplat/trainer/trainer.hpp"

#include <CLI11.hpp>
#include <omp.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace refsplat {

namespace fs = std::filesystem;

namespace {

struct Globals {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
  std::string out_dir = ".";
};

struct Options {
  std::string checkpoint;
  std::string cameras;
  std::string renders;
  std::string gt;
  std::string normals;
  std::string gt_normals;
  std::string scene = "plane-mirror";
  int view = -1;
  int size = 64;
  int views = 32;
  int env_resolution = 64;
  int gaussians = 6;
  bool no_trace = false;
  bool inject_fault = false;
};

// Builds the parser. Callbacks are not used; the caller dispatches on the
// selected subcommand.
void build_app(CLI::App& app, Globals& g, Options& o) {
  app.description("Reflective Gaussian splatting: training, rendering and diagnostics.");
  app.require_subcommand(1);
  app.fallthrough();
  app.set_help_all_flag("--help-all", "Print help for every subcommand and exit");
  app.option_defaults()->always_capture_default();
  app.add_option("--config", g.config, "Training configuration file (key = value lines)");
  app.add_option("--seed", g.seed, "Random seed; overrides the config seed");
  app.add_option("--threads", g.threads, "Worker threads (0 = all logical cores)")->check(CLI::NonNegativeNumber);
  app.add_option("--out-dir", g.out_dir, "Directory that receives every output file");

  app.add_subcommand("train", "Train a model from the configured scene; writes checkpoint, metrics and held-out renders");

  auto* render = app.add_subcommand("render", "Render a checkpoint from every camera of a camera file");
  render->add_option("--checkpoint", o.checkpoint, "Checkpoint file")->required();
  render->add_option("--cameras", o.cameras, "Camera JSON file")->required();
  render->add_flag("--no-trace", o.no_trace, "Skip ray-traced indirect light");

  auto* eval = app.add_subcommand("eval", "Compare two directories of images with matching names; prints CSV");
  eval->add_option("--renders", o.renders, "Directory of rendered images")->required();
  eval->add_option("--gt", o.gt, "Directory of ground-truth images")->required();
  eval->add_option("--normals", o.normals, "Directory of rendered normal maps (.pfm)");
  eval->add_option("--gt-normals", o.gt_normals, "Directory of reference normal maps (.pfm)");

  auto* decompose = app.add_subcommand("decompose", "Dump material, geometry, lighting and environment layers");
  decompose->add_option("--checkpoint", o.checkpoint, "Checkpoint file")->required();
  decompose->add_option("--cameras", o.cameras, "Camera JSON file")->required();
  decompose->add_option("--view", o.view, "Only this camera index (-1 = all)");
  decompose->add_flag("--no-trace", o.no_trace, "Skip ray-traced indirect light");

  auto* trace = app.add_subcommand("trace-debug", "Dump per-pixel occlusion and indirect radiance of reflected rays");
  trace->add_option("--checkpoint", o.checkpoint, "Checkpoint file")->required();
  trace->add_option("--cameras", o.cameras, "Camera JSON file")->required();
  trace->add_option("--view", o.view, "Only this camera index (-1 = all)");

  auto* toy = app.add_subcommand("make-toy", "Write a synthetic scene with its ground truth and a training config");
  toy->add_option("--scene", o.scene, "plane-mirror, sphere-glossy or occluder-box");
  toy->add_option("--size", o.size, "Image width and height")->check(CLI::PositiveNumber);
  toy->add_option("--views", o.views, "Number of cameras")->check(CLI::PositiveNumber);
  toy->add_option("--env-resolution", o.env_resolution, "Cubemap face resolution (power of two)");

  auto* grad = app.add_subcommand("gradcheck", "Compare analytic gradients with central finite differences");
  grad->add_option("--gaussians", o.gaussians, "Gaussians in the test scene")->check(CLI::NonNegativeNumber);
  grad->add_flag("--inject-fault", o.inject_fault, "Corrupt the analytic opacity gradient (negative control)");
}

fs::path out_path(const Globals& g, const std::string& rel) {
  const fs::path p = fs::path(g.out_dir) / rel;
  fs::create_directories(p.parent_path());
  return p;
}

Checkpoint read_checkpoint(const std::string& path) {
  if (!fs::exists(path)) throw InputError("missing checkpoint: " + path);
  return load_checkpoint(path);
}

std::vector<CameraFrame> read_cameras(const std::string& path, int view) {
  if (!fs::exists(path)) throw InputError("missing camera file: " + path);
  auto frames = load_cameras(path);
  if (view >= 0) {
    if (view >= static_cast<int>(frames.size())) throw InputError("--view " + std::to_string(view) + " out of range");
    frames = {frames[view]};
  }
  return frames;
}

std::string frame_stem(const CameraFrame& f, std::size_t i) {
  const std::string s = fs::path(f.file_path).stem().string();
  return s.empty() ? "view_" + std::to_string(i) : s;
}

TrainConfig read_config(const Globals& g) {
  if (g.config.empty()) throw InputError("--config is required");
  if (!fs::exists(g.config)) throw InputError("missing config file: " + g.config);
  TrainConfig cfg = load_config(g.config);
  if (g.seed_set) cfg.seed = g.seed;
  cfg.validate();
  return cfg;
}

void save_environment_faces(const EnvironmentCubemap& env, const Globals& g, const std::string& prefix) {
  save_environment(env, out_path(g, prefix).string());
}

int cmd_train(const Globals& g) {
  const TrainConfig cfg = read_config(g);
  const TrainData data = load_train_data(cfg);
  const TrainResult res = train(data, cfg);

  Checkpoint ckpt;
  ckpt.iteration = res.iterations;
  ckpt.background = data.background;
  ckpt.params = res.params;
  ckpt.optimizer = res.optimizer;
  const bool diverged = res.status == TrainStatus::kDiverged;
  save_checkpoint(ckpt, out_path(g, diverged ? "checkpoint_diverged.bin" : "checkpoint.bin").string());
  write_metrics_csv(res.metrics, out_path(g, "metrics.csv").string());
  {
    std::ofstream out(out_path(g, "config_used.txt"));
    out << config_to_text(cfg);
  }

  const GaussianSet gs = decode_gaussians(res.params);
  EnvironmentCubemap env = data.environment;
  decode_environment(res.params, env);
  save_environment_faces(env, g, "env/env");
  const auto renders = render_views(gs, env, data, res.test_views, cfg);
  for (std::size_t k = 0; k < renders.size(); ++k) {
    const std::string& name = data.names[res.test_views[k]];
    save_image(renders[k], out_path(g, "heldout/" + name + ".png").string());
    save_image(renders[k], out_path(g, "heldout/" + name + ".pfm").string());
  }
  std::printf("held-out PSNR %.4f dB after %ld iterations (%zu gaussians)\n", res.heldout_psnr, res.iterations,
              res.params.count());
  if (diverged) {
    spdlog::error("training stopped by the divergence guard; state written to checkpoint_diverged.bin");
    return kExitNumerical;
  }
  return kExitOk;
}

struct LoadedModel {
  GaussianSet gaussians;
  EnvironmentCubemap env;
  Vec3 background;
};

LoadedModel load_model(const std::string& path) {
  const Checkpoint ckpt = read_checkpoint(path);
  LoadedModel m;
  m.gaussians = decode_gaussians(ckpt.params);
  m.env = EnvironmentCubemap(ckpt.params.env_resolution);
  decode_environment(ckpt.params, m.env);
  m.background = ckpt.background;
  return m;
}

int cmd_render(const Globals& g, const Options& o) {
  const LoadedModel m = load_model(o.checkpoint);
  const auto frames = read_cameras(o.cameras, -1);
  PipelineOptions po;
  po.shade.background = m.background;
  const StageFlags flags{true, !o.no_trace, false, false};
  const DiskBVH bvh = DiskBVH::build(m.gaussians, po.trace);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const RenderLayers r = render_view(m.gaussians, m.env, shared_dfg(), bvh, frames[i].camera, flags, po);
    const std::string stem = frame_stem(frames[i], i);
    save_image(r.final, out_path(g, stem + ".png").string());
    save_image(r.final, out_path(g, stem + ".pfm").string());
  }
  return kExitOk;
}

std::map<std::string, fs::path> list_images(const std::string& dir) {
  if (!fs::is_directory(dir)) throw InputError("missing directory: " + dir);
  std::map<std::string, fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string ext = e.path().extension().string();
    if (e.is_regular_file() && (ext == ".png" || ext == ".pfm")) files[e.path().filename().string()] = e.path();
  }
  return files;
}

Image rgb_only(Image im) {
  if (im.channels == 3) return im;
  Image out(im.width, im.height, 3);
  for (std::size_t p = 0; p < im.pixel_count(); ++p)
    for (int c = 0; c < 3; ++c) out.data[p * 3 + c] = im.data[p * im.channels + std::min(c, im.channels - 1)];
  return out;
}

int cmd_eval(const Options& o) {
  const auto renders = list_images(o.renders);
  const auto gts = list_images(o.gt);
  for (const auto& [name, p] : renders)
    if (!gts.count(name)) throw InputError("no ground truth for " + p.string());
  for (const auto& [name, p] : gts)
    if (!renders.count(name)) throw InputError("no render for " + p.string());
  if (renders.empty()) throw InputError("no images in " + o.renders);
  const bool with_normals = !o.normals.empty() && !o.gt_normals.empty();

  std::printf(with_normals ? "image,psnr,ssim,mae_degrees\n" : "image,psnr,ssim\n");
  std::vector<Image> all_r, all_g, all_n, all_gn;
  for (const auto& [name, p] : renders) {
    Image r = rgb_only(load_image(p.string()));
    Image t = rgb_only(load_image(gts.at(name).string()));
    if (!r.same_shape(t)) throw InputError("image sizes differ for " + name);
    const EvalMetrics m = eval_metrics(std::span<const Image>(&r, 1), std::span<const Image>(&t, 1));
    if (with_normals) {
      const std::string stem = fs::path(name).stem().string() + ".pfm";
      const fs::path np = fs::path(o.normals) / stem, gp = fs::path(o.gt_normals) / stem;
      if (!fs::exists(np) || !fs::exists(gp)) throw InputError("missing normal map for " + name);
      all_n.push_back(load_pfm(np.string()));
      all_gn.push_back(load_pfm(gp.string()));
      std::printf("%s,%.6f,%.6f,%.6f\n", name.c_str(), m.psnr, m.ssim, normal_mae_degrees(all_n.back(), all_gn.back()));
    } else {
      std::printf("%s,%.6f,%.6f\n", name.c_str(), m.psnr, m.ssim);
    }
    all_r.push_back(std::move(r));
    all_g.push_back(std::move(t));
  }
  const EvalMetrics mean = eval_metrics(all_r, all_g, all_n, all_gn);
  if (with_normals)
    std::printf("mean,%.6f,%.6f,%.6f\n", mean.psnr, mean.ssim, mean.mae_degrees);
  else
    std::printf("mean,%.6f,%.6f\n", mean.psnr, mean.ssim);
  return kExitOk;
}

Image scalar_to_image(const std::vector<std::uint8_t>& mask, int w, int h) {
  Image out(w, h, 1);
  for (std::size_t p = 0; p < mask.size(); ++p) out.data[p] = mask[p];
  return out;
}

int cmd_decompose(const Globals& g, const Options& o) {
  const LoadedModel m = load_model(o.checkpoint);
  const auto frames = read_cameras(o.cameras, o.view);
  PipelineOptions po;
  po.shade.background = m.background;
  const StageFlags flags{true, !o.no_trace, false, false};
  const DiskBVH bvh = DiskBVH::build(m.gaussians, po.trace);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const RenderLayers r = render_view(m.gaussians, m.env, shared_dfg(), bvh, frames[i].camera, flags, po);
    const std::string stem = frame_stem(frames[i], o.view >= 0 ? static_cast<std::size_t>(o.view) : i);
    auto put = [&](const std::string& layer, const Image& img) {
      save_image(img, out_path(g, stem + "_" + layer + ".pfm").string());
    };
    put("diffuse_color", r.gbuffer.diffuse);
    put("albedo", r.gbuffer.albedo);
    put("metallic", r.gbuffer.metallic);
    put("roughness", r.gbuffer.roughness);
    put("normal", r.gbuffer.normal);
    put("depth", r.gbuffer.depth);
    put("alpha", r.gbuffer.alpha);
    put("occlusion", r.incident.occlusion);
    put("indirect", r.incident.indirect);
    put("diffuse", r.shade.diffuse);
    put("specular", r.shade.specular);
    put("final", r.final);
    save_image(r.final, out_path(g, stem + "_final.png").string());
  }
  save_environment_faces(m.env, g, "env");

  // Reflection-prior maps need the ground-truth images of a training config.
  if (!g.config.empty()) {
    const TrainConfig cfg = read_config(g);
    const TrainData data = load_train_data(cfg);
    std::vector<std::size_t> views(data.cameras.size());
    for (std::size_t i = 0; i < views.size(); ++i) views[i] = i;
    std::vector<RegionStat> stats;
    const auto priors = build_reflection_priors(m.gaussians, data, views, cfg, &stats);
    for (std::size_t i = 0; i < priors.size(); ++i) {
      const std::string& name = data.names[i];
      save_image(priors[i].w_ref, out_path(g, "prior/" + name + "_w_ref.pfm").string());
      save_image(scalar_to_image(priors[i].gate, priors[i].w_ref.width, priors[i].w_ref.height),
                 out_path(g, "prior/" + name + "_gate.pfm").string());
      save_image(priors[i].target, out_path(g, "prior/" + name + "_target.pfm").string());
    }
    std::ofstream out(out_path(g, "prior/regions.csv"));
    out << "label,pixels,mean_w_ref,mean_metallic,gated,target\n";
    for (const auto& s : stats)
      out << s.label << ',' << s.pixels << ',' << s.mean_w_ref << ',' << s.mean_metallic << ',' << (s.gated ? 1 : 0)
          << ',' << s.target << '\n';
  }
  return kExitOk;
}

int cmd_trace_debug(const Globals& g, const Options& o) {
  const LoadedModel m = load_model(o.checkpoint);
  const auto frames = read_cameras(o.cameras, o.view);
  const TraceOptions topts;
  const DiskBVH bvh = DiskBVH::build(m.gaussians, topts);
  std::size_t rays = 0, occluded = 0;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    RasterPlan plan;
    const GBuffer gb = splat_forward(m.gaussians, frames[i].camera, {}, &plan);
    TracePlan tp;
    const IncidentMaps inc = trace_image(m.gaussians, bvh, gb, frames[i].camera, topts, &plan, &tp);
    const std::string stem = frame_stem(frames[i], o.view >= 0 ? static_cast<std::size_t>(o.view) : i);
    save_image(inc.occlusion, out_path(g, stem + "_occlusion.pfm").string());
    save_image(inc.indirect, out_path(g, stem + "_indirect.pfm").string());
    for (std::size_t p = 0; p < tp.active.size(); ++p) {
      rays += tp.active[p];
      occluded += tp.active[p] && inc.occlusion.data[p] > 0.5;
    }
  }
  std::printf("traced %zu rays, %zu with occlusion > 0.5\n", rays, occluded);
  return kExitOk;
}

int cmd_make_toy(const Globals& g, const Options& o) {
  ToyOptions opts;
  opts.image_size = o.size;
  opts.views = o.views;
  opts.env_resolution = o.env_resolution;
  opts.seed = g.seed;
  const ToyScene s = make_toy_scene(o.scene, opts);

  std::vector<CameraFrame> frames;
  for (std::size_t i = 0; i < s.cameras.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "view_%03zu", i);
    frames.push_back({std::string("images/") + name + ".pfm", s.cameras[i]});
    save_image(s.images[i], out_path(g, std::string("images/") + name + ".pfm").string());
    save_image(s.images[i], out_path(g, std::string("preview/") + name + ".png").string());
    save_image(s.normals[i], out_path(g, std::string("normals/") + name + ".pfm").string());
    save_labels(s.labels[i], out_path(g, std::string("labels/") + name + ".png").string());
  }
  save_cameras(frames, out_path(g, "cameras.json").string());
  std::vector<SurfacePoint> points;
  for (const auto& gs : s.gaussians) points.push_back({gs.position, disk_frame(gs).normal});
  save_points(points, out_path(g, "points.txt").string());
  save_environment_faces(s.environment, g, "env/sky");

  Checkpoint truth;
  truth.params = encode_parameters(s.gaussians, s.environment);
  truth.background = s.background;
  save_checkpoint(truth, out_path(g, "truth.bin").string());

  std::ofstream cfg(out_path(g, "train.cfg"));
  cfg << "# " << o.scene << " ground truth written by make-toy\n"
      << "cameras = cameras.json\npoints = points.txt\nnormal_dir = normals\nlabel_dir = labels\n";
  std::printf("wrote %s with %zu views and %zu gaussians\n", o.scene.c_str(), s.cameras.size(), s.gaussians.size());
  return kExitOk;
}

int cmd_gradcheck(const Globals& g, const Options& o) {
  GradcheckOptions opts;
  opts.gaussians = o.gaussians;
  opts.seed = g.seed;
  if (!g.config.empty()) opts.weights = read_config(g).weights;
  if (o.inject_fault)
    opts.corrupt = [](Gradients& gr) {
      for (auto& x : gr.gaussians) x.opacity *= 1.5;
    };
  const GradcheckResult res = run_gradcheck(opts);
  if (res.parameters == 0) {
    std::printf("no parameters: empty scene, nothing to check\n");
    return kExitOk;
  }
  std::printf("case,loss,status\n");
  for (const auto& c : res.cases) std::printf("%s,%.9g,%s\n", c.name.c_str(), c.loss, c.pass ? "ok" : "FAIL");
  std::printf("\nclass,checked,worst_relative_error\n");
  for (int k = 0; k < kParamClassCount; ++k)
    std::printf("%s,%zu,%.3e\n", std::string(param_class_name(static_cast<ParamClass>(k))).c_str(),
                res.classes[k].checked, res.classes[k].worst);
  std::printf("\n%s (tolerance %.0e)\n", res.pass ? "all gradients within tolerance" : "gradient mismatch",
              opts.tolerance);
  return res.pass ? kExitOk : kExitNumerical;
}

}  // namespace

std::string full_help_text() {
  Globals g;
  Options o;
  CLI::App app{"", "refsplat"};
  build_app(app, g, o);
  std::string text = app.help();
  for (const auto* sub : app.get_subcommands({})) text += "\n" + sub->help();
  return text;
}

int run_cli(const std::vector<std::string>& args) {
  Globals g;
  Options o;
  CLI::App app{"", "refsplat"};
  build_app(app, g, o);
  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    std::cout << full_help_text();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }
  g.seed_set = app.count("--seed") > 0;

  try {
    if (g.threads > 0) omp_set_num_threads(g.threads);
    const auto subs = app.get_subcommands();
    const std::string cmd = subs.front()->get_name();
    if (cmd == "train") return cmd_train(g);
    if (cmd == "render") return cmd_render(g, o);
    if (cmd == "eval") return cmd_eval(o);
    if (cmd == "decompose") return cmd_decompose(g, o);
    if (cmd == "trace-debug") return cmd_trace_debug(g, o);
    if (cmd == "make-toy") return cmd_make_toy(g, o);
    if (cmd == "gradcheck") return cmd_gradcheck(g, o);
    return kExitUsage;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
}

}  // namespace refsplat
