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

#include "refsplat/trainer/parameters.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace refsplat {

struct LearningRates {
  double position = 1.6e-4;
  double position_final = 1.6e-6;  ///< exponential decay target at the last iteration
  double rotation = 1e-3;
  double scale = 5e-3;
  double opacity = 0.05;
  double material = 2.5e-3;  ///< diffuse, albedo, metallic, roughness, residual
  double environment = 1e-2;

  double position_at(long iteration, long total) const;
  double for_class(ParamClass c, long iteration, long total) const;
};

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-15;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;

  void resize(std::size_t n) {
    m.resize(n, 0.0);
    v.resize(n, 0.0);
  }
};

struct OptimizerState {
  AdamState gaussians;
  AdamState environment;
};

struct StepReport {
  std::array<bool, kParamClassCount> skipped{};  ///< classes dropped for non-finite gradients
  bool any_skipped() const;
};

class Optimizer {
 public:
  Optimizer() = default;
  Optimizer(const LearningRates& lr, const AdamHyper& hyper) : lr_(lr), hyper_(hyper) {}

  /// One adaptive-moment step. `env_grad` empty leaves the environment and
  /// its moments untouched. Parameters are projected afterwards.
  StepReport step(ParameterSet& params, std::span<const double> gaussian_grad, std::span<const double> env_grad,
                  long iteration, long total_iterations);

  /// Drops the moments of removed Gaussians (sorted indices).
  void erase_gaussians(std::span<const std::size_t> indices);

  OptimizerState& state() { return state_; }
  const OptimizerState& state() const { return state_; }
  const LearningRates& rates() const { return lr_; }

 private:
  LearningRates lr_;
  AdamHyper hyper_;
  OptimizerState state_;
};

}  // namespace refsplat
