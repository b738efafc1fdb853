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

#include "refsplat/trainer/config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

namespace refsplat {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || !std::isfinite(d)) throw InputError("config: " + key + ": expected a number, got '" + v + "'");
  return d;
}

long to_long(const std::string& key, const std::string& v) {
  const double d = to_double(key, v);
  if (d != std::floor(d)) throw InputError("config: " + key + ": expected an integer, got '" + v + "'");
  return static_cast<long>(d);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw InputError("config: " + key + ": expected a boolean, got '" + v + "'");
}

std::string resolve_path(const std::string& base, const std::string& v) {
  if (v.empty()) return v;
  const std::filesystem::path p(v);
  return p.is_absolute() ? v : (std::filesystem::path(base) / p).lexically_normal().string();
}

}  // namespace

void Schedule::resolve() {
  auto scaled = [this](long full) { return static_cast<long>(std::lround(full * scale)); };
  if (!(scale >= 0.0)) throw InputError("config: schedule_scale must be >= 0");
  if (total < 0) total = scaled(30000);
  if (warmup_end < 0) warmup_end = std::min(total, scaled(3000));
  if (pbr_start < 0) pbr_start = std::max(warmup_end, std::min(total, scaled(3000)));
  if (mv_start < 0) mv_start = std::max(pbr_start, std::min(total, scaled(10000)));
  if (!(warmup_end <= pbr_start && pbr_start <= mv_start && mv_start <= total))
    throw InputError("config: schedule milestones must satisfy warmup_end <= pbr_start <= mv_start <= total_iters");
  if (prior_rebuild_interval <= 0) throw InputError("config: prior_rebuild_interval must be positive");
}

StageFlags Schedule::flags_at(long iteration, bool use_trace) const {
  StageFlags f;
  f.pbr = iteration >= pbr_start;
  f.trace = f.pbr && use_trace;
  f.normal_prior = iteration < mv_start;
  f.multiview = iteration >= mv_start;
  return f;
}

void TrainConfig::validate() {
  schedule.resolve();
  const double lambdas[] = {weights.depth_normal, weights.normal_prior, weights.multiview, weights.reflection};
  for (double l : lambdas)
    if (!(l >= 0.0)) throw InputError("config: loss weights must be >= 0");
  if (env_resolution < 1 || (env_resolution & (env_resolution - 1)) != 0)
    throw InputError("config: env_resolution must be a power of two");
  if (dfg_resolution < 16) throw InputError("config: dfg_resolution must be >= 16");
  if (mv_patch < 1 || mv_patch % 2 == 0 || score_patch < 1 || score_patch % 2 == 0)
    throw InputError("config: patch sizes must be odd and positive");
  if (holdout_every < 2) throw InputError("config: holdout_every must be >= 2");
  if (fuse_k < 1 || fuse_radius < 0.0) throw InputError("config: invalid ball-query settings");
  if (toy.empty() && (cameras.empty() || points.empty()))
    throw InputError("config: either 'toy' or both 'cameras' and 'points' must be set");
}

PipelineOptions TrainConfig::pipeline_options() const {
  PipelineOptions o;
  o.weights = weights;
  o.shade.background = background;
  o.mv.patch_half = mv_patch / 2;
  o.mv.stride = mv_stride;
  return o;
}

TrainConfig parse_config(const std::string& text, const std::string& base_dir) {
  TrainConfig c;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  auto num = [](double& dst) -> Setter { return [&dst](const std::string& k, const std::string& v) { dst = to_double(k, v); }; };
  auto lng = [](long& dst) -> Setter { return [&dst](const std::string& k, const std::string& v) { dst = to_long(k, v); }; };
  auto integer = [](int& dst) -> Setter {
    return [&dst](const std::string& k, const std::string& v) { dst = static_cast<int>(to_long(k, v)); };
  };
  auto path = [&base_dir](std::string& dst) -> Setter {
    return [&dst, &base_dir](const std::string&, const std::string& v) { dst = resolve_path(base_dir, v); };
  };
  const std::map<std::string, Setter> setters = {
      {"toy", [&c](const std::string&, const std::string& v) { c.toy = v; }},
      {"cameras", path(c.cameras)},
      {"points", path(c.points)},
      {"normal_dir", path(c.normal_dir)},
      {"label_dir", path(c.label_dir)},
      {"environment", path(c.environment)},
      {"jitter", num(c.jitter)},
      {"env_init", num(c.env_init)},
      {"schedule_scale", num(c.schedule.scale)},
      {"total_iters", lng(c.schedule.total)},
      {"warmup_end", lng(c.schedule.warmup_end)},
      {"pbr_start", lng(c.schedule.pbr_start)},
      {"mv_start", lng(c.schedule.mv_start)},
      {"prior_rebuild_interval", lng(c.schedule.prior_rebuild_interval)},
      {"lambda_depth_normal", num(c.weights.depth_normal)},
      {"lambda_normal", num(c.weights.normal_prior)},
      {"lambda_mv", num(c.weights.multiview)},
      {"lambda_ref", num(c.weights.reflection)},
      {"lr_position", num(c.lr.position)},
      {"lr_position_final", num(c.lr.position_final)},
      {"lr_rotation", num(c.lr.rotation)},
      {"lr_scale", num(c.lr.scale)},
      {"lr_opacity", num(c.lr.opacity)},
      {"lr_material", num(c.lr.material)},
      {"lr_env", num(c.lr.environment)},
      {"env_resolution", integer(c.env_resolution)},
      {"dfg_resolution", integer(c.dfg_resolution)},
      {"dfg_samples", integer(c.dfg_samples)},
      {"mv_sources", integer(c.mv_sources)},
      {"mv_patch", integer(c.mv_patch)},
      {"mv_stride", integer(c.mv_stride)},
      {"score_patch", integer(c.score_patch)},
      {"score_neighbors", integer(c.score_neighbors)},
      {"fuse_radius", num(c.fuse_radius)},
      {"fuse_k", integer(c.fuse_k)},
      {"gate_threshold", num(c.gate.threshold)},
      {"gate_delta", num(c.gate.delta)},
      {"gate_floor", num(c.gate.floor)},
      {"prune_threshold", num(c.prune_threshold)},
      {"prune_interval", lng(c.prune_interval)},
      {"bvh_rebuild_interval", lng(c.bvh_rebuild_interval)},
      {"holdout_every", integer(c.holdout_every)},
      {"eval_interval", lng(c.eval_interval)},
      {"use_trace", [&c](const std::string& k, const std::string& v) { c.use_trace = to_bool(k, v); }},
      {"background",
       [&c](const std::string& k, const std::string& v) {
         std::istringstream in(v);
         std::string a, b, d, extra;
         if (!(in >> a >> b >> d) || (in >> extra)) throw InputError("config: " + k + ": expected three numbers");
         c.background = Vec3(to_double(k, a), to_double(k, b), to_double(k, d));
       }},
      {"divergence_factor", num(c.divergence_factor)},
      {"divergence_window", lng(c.divergence_window)},
      {"seed",
       [&c](const std::string& k, const std::string& v) { c.seed = static_cast<std::uint64_t>(to_long(k, v)); }},
  };

  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InputError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end()) throw InputError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    it->second(key, value);
  }
  return c;
}

TrainConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InputError("cannot open config file: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), std::filesystem::path(path).parent_path().string());
}

std::string config_to_text(const TrainConfig& c) {
  std::ostringstream o;
  o.precision(17);
  auto kv = [&o](const char* k, const auto& v) { o << k << " = " << v << "\n"; };
  if (!c.toy.empty()) kv("toy", c.toy);
  if (!c.cameras.empty()) kv("cameras", c.cameras);
  if (!c.points.empty()) kv("points", c.points);
  if (!c.normal_dir.empty()) kv("normal_dir", c.normal_dir);
  if (!c.label_dir.empty()) kv("label_dir", c.label_dir);
  if (!c.environment.empty()) kv("environment", c.environment);
  kv("jitter", c.jitter);
  kv("env_init", c.env_init);
  kv("schedule_scale", c.schedule.scale);
  kv("total_iters", c.schedule.total);
  kv("warmup_end", c.schedule.warmup_end);
  kv("pbr_start", c.schedule.pbr_start);
  kv("mv_start", c.schedule.mv_start);
  kv("prior_rebuild_interval", c.schedule.prior_rebuild_interval);
  kv("lambda_depth_normal", c.weights.depth_normal);
  kv("lambda_normal", c.weights.normal_prior);
  kv("lambda_mv", c.weights.multiview);
  kv("lambda_ref", c.weights.reflection);
  kv("lr_position", c.lr.position);
  kv("lr_position_final", c.lr.position_final);
  kv("lr_rotation", c.lr.rotation);
  kv("lr_scale", c.lr.scale);
  kv("lr_opacity", c.lr.opacity);
  kv("lr_material", c.lr.material);
  kv("lr_env", c.lr.environment);
  kv("env_resolution", c.env_resolution);
  kv("dfg_resolution", c.dfg_resolution);
  kv("dfg_samples", c.dfg_samples);
  kv("mv_sources", c.mv_sources);
  kv("mv_patch", c.mv_patch);
  kv("mv_stride", c.mv_stride);
  kv("score_patch", c.score_patch);
  kv("score_neighbors", c.score_neighbors);
  kv("fuse_radius", c.fuse_radius);
  kv("fuse_k", c.fuse_k);
  kv("gate_threshold", c.gate.threshold);
  kv("gate_delta", c.gate.delta);
  kv("gate_floor", c.gate.floor);
  kv("prune_threshold", c.prune_threshold);
  kv("prune_interval", c.prune_interval);
  kv("bvh_rebuild_interval", c.bvh_rebuild_interval);
  kv("holdout_every", c.holdout_every);
  kv("eval_interval", c.eval_interval);
  kv("use_trace", c.use_trace ? "true" : "false");
  o << "background = " << c.background[0] << " " << c.background[1] << " " << c.background[2] << "\n";
  kv("divergence_factor", c.divergence_factor);
  kv("divergence_window", c.divergence_window);
  kv("seed", c.seed);
  return o.str();
}

}  // namespace refsplat
