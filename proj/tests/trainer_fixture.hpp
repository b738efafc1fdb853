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

#include "refsplat/toy_scenes.hpp"
#include "refsplat/trainer/config.hpp"
#include "refsplat/trainer/trainer.hpp"

#include <string>

namespace refsplat::testing {

/// Small toy training set so unit tests finish in seconds.
inline TrainData small_train_data(const std::string& scene, int size, int views, const TrainConfig& cfg) {
  ToyScene s = make_toy_scene(scene, {.image_size = size, .views = views, .env_resolution = 16, .seed = cfg.seed});
  TrainData d;
  d.cameras = s.cameras;
  d.images = std::move(s.images);
  d.normal_priors = std::move(s.normals);
  d.labels = std::move(s.labels);
  for (std::size_t i = 0; i < d.cameras.size(); ++i) d.names.push_back("view_" + std::to_string(i));
  d.initial = perturbed_initialization(s.gaussians, cfg.jitter, cfg.seed);
  d.environment = EnvironmentCubemap(cfg.env_resolution, Vec3::Constant(cfg.env_init));
  d.background = s.background;
  return d;
}

/// Short schedule with every stage visited.
inline TrainConfig short_config(long total = 40) {
  TrainConfig cfg;
  cfg.toy = "plane-mirror";
  cfg.schedule.total = total;
  cfg.schedule.warmup_end = total / 4;
  cfg.schedule.pbr_start = total / 4;
  cfg.schedule.mv_start = total / 2;
  cfg.schedule.prior_rebuild_interval = total;
  cfg.env_resolution = 8;
  cfg.eval_interval = total;
  cfg.prune_interval = total / 2;
  cfg.mv_stride = 4;
  cfg.validate();
  return cfg;
}

}  // namespace refsplat::testing
