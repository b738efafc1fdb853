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

#pragma once

#include "refsplat/multiview.hpp"
#include "refsplat/trainer/optimizer.hpp"
#include "refsplat/trainer/pipeline.hpp"

#include <cstdint>
#include <map>
#include <string>

namespace refsplat {

/// Iteration milestones. Unset fields are derived from the reference
/// milestones (3000 / 3000 / 10000 / 30000) times `scale`.
struct Schedule {
  double scale = 0.1;
  long total = -1;
  long warmup_end = -1;
  long pbr_start = -1;
  long mv_start = -1;
  long prior_rebuild_interval = 1000;

  /// Fills unset milestones and checks their order; throws InputError.
  void resolve();
  StageFlags flags_at(long iteration, bool use_trace) const;
};

struct TrainConfig {
  // Scene source: a toy scene name, or camera/points files.
  std::string toy;
  std::string cameras;
  std::string points;
  std::string normal_dir;  ///< optional <frame stem>.pfm camera-space normal priors
  std::string label_dir;   ///< optional <frame stem>.png 16-bit region labels
  std::string environment; ///< optional face-file prefix for the initial cubemap
  double jitter = 0.05;    ///< toy init: per-axis position noise, fraction of the scene extent
  double env_init = 0.5;

  Schedule schedule;
  LossWeights weights;
  LearningRates lr;

  int env_resolution = 64;
  int dfg_resolution = 64;
  int dfg_samples = 1024;
  int mv_sources = 2;
  int mv_patch = 7;
  int mv_stride = 1;
  int score_patch = 3;
  int score_neighbors = 4;
  double fuse_radius = 0.01;  ///< fraction of the scene bounding-box diagonal
  int fuse_k = 8;
  GateOptions gate;

  double prune_threshold = 0.005;
  long prune_interval = 500;
  long bvh_rebuild_interval = 100;
  int holdout_every = 8;
  long eval_interval = 250;
  bool use_trace = true;
  Vec3 background = Vec3::Zero();
  double divergence_factor = 2.0;
  long divergence_window = 200;
  std::uint64_t seed = 0;

  /// Resolves the schedule and validates ranges; throws InputError.
  void validate();
  PipelineOptions pipeline_options() const;
};

/// "key = value" lines, '#' comments. Relative paths resolve against `base_dir`.
TrainConfig parse_config(const std::string& text, const std::string& base_dir = ".");
TrainConfig load_config(const std::string& path);
std::string config_to_text(const TrainConfig& cfg);

}  // namespace refsplat
