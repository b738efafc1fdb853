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

#include "refsplat/trainer/checkpoint.hpp"
#include "refsplat/trainer/config.hpp"

#include <functional>
#include <string>
#include <vector>

namespace refsplat {

/// Everything the optimizer reads: views, optional priors and the starting point.
struct TrainData {
  std::vector<Camera> cameras;
  std::vector<std::string> names;     ///< frame stems, used for output files
  std::vector<Image> images;          ///< linear RGB ground truth
  std::vector<Image> normal_priors;   ///< per view; empty image when absent
  std::vector<LabelMap> labels;       ///< empty or one per view
  GaussianSet initial;
  EnvironmentCubemap environment;
  Vec3 background = Vec3::Zero();
};

/// Builds the training data named by the config: a perturbed toy scene or
/// files on disk. Throws InputError naming the offending path.
TrainData load_train_data(const TrainConfig& cfg);

/// Indices of held-out views (every `every`-th frame, starting at 0) and of
/// the remaining training views.
void holdout_split(std::size_t views, int every, std::vector<std::size_t>& train, std::vector<std::size_t>& test);

struct MetricRow {
  long iteration = 0;
  std::size_t view = 0;
  LossTerms loss;
  double heldout_psnr = -1.0;  ///< negative when not evaluated at this iteration
  std::size_t gaussians = 0;
};

void write_metrics_csv(const std::vector<MetricRow>& rows, const std::string& path);

struct IterationInfo {
  long iteration = 0;
  std::size_t view = 0;
  StageFlags flags;
  const LossTerms* loss = nullptr;
  const ParameterSet* params = nullptr;  ///< after the step
};
using IterationHook = std::function<void(const IterationInfo&)>;

enum class TrainStatus { kCompleted, kDiverged };

struct TrainResult {
  TrainStatus status = TrainStatus::kCompleted;
  long iterations = 0;
  ParameterSet params;
  OptimizerState optimizer;
  std::vector<MetricRow> metrics;
  std::vector<std::size_t> train_views;
  std::vector<std::size_t> test_views;
  double heldout_psnr = 0.0;  ///< mean over held-out views at the end
  std::size_t nan_aborts = 0;
};

/// Shared DFG table when the config asks for the default one, otherwise a
/// freshly integrated table kept in `storage`.
const DfgLut& dfg_for(const TrainConfig& cfg, DfgLut& storage);

/// Reflection priors of the given views from their ground-truth images and the
/// geometry rendered from `gaussians`.
std::vector<ReflectionPrior> build_reflection_priors(std::span<const Gaussian> gaussians, const TrainData& data,
                                                     std::span<const std::size_t> views, const TrainConfig& cfg,
                                                     std::vector<RegionStat>* stats = nullptr);

/// Renders each listed view with the final-stage flags.
std::vector<Image> render_views(std::span<const Gaussian> gaussians, const EnvironmentCubemap& env,
                                const TrainData& data, std::span<const std::size_t> views, const TrainConfig& cfg);

/// Runs the staged schedule of `cfg` on `data`. Deterministic for a fixed
/// seed in single-threaded mode.
TrainResult train(const TrainData& data, const TrainConfig& cfg, const IterationHook& hook = {});

}  // namespace refsplat
