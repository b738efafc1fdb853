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

#include "refsplat/trainer/optimizer.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>

namespace refsplat {

double LearningRates::position_at(long iteration, long total) const {
  if (total <= 1) return position;
  const double t = std::clamp(static_cast<double>(iteration) / (total - 1), 0.0, 1.0);
  return std::exp((1.0 - t) * std::log(position) + t * std::log(position_final));
}

double LearningRates::for_class(ParamClass c, long iteration, long total) const {
  switch (c) {
    case ParamClass::kPosition: return position_at(iteration, total);
    case ParamClass::kRotation: return rotation;
    case ParamClass::kScale: return scale;
    case ParamClass::kOpacity: return opacity;
    case ParamClass::kDiffuse:
    case ParamClass::kMaterial:
    case ParamClass::kResidual: return material;
    case ParamClass::kEnvironment: return environment;
  }
  return 0.0;
}

bool StepReport::any_skipped() const {
  for (bool s : skipped)
    if (s) return true;
  return false;
}

namespace {

void adam_element(double& p, double& m, double& v, double g, double lr, double bc1, double bc2, const AdamHyper& h) {
  m = h.beta1 * m + (1.0 - h.beta1) * g;
  v = h.beta2 * v + (1.0 - h.beta2) * g * g;
  p -= lr * (m / bc1) / (std::sqrt(v / bc2) + h.epsilon);
}

}  // namespace

StepReport Optimizer::step(ParameterSet& params, std::span<const double> gaussian_grad,
                           std::span<const double> env_grad, long iteration, long total_iterations) {
  StepReport report;
  const std::size_t n = params.count();
  state_.gaussians.resize(params.gaussians.size());

  std::array<double, kRawPerGaussian> slot_lr{};
  std::array<int, kRawPerGaussian> slot_cls{};
  for (int s = 0; s < kRawPerGaussian; ++s) {
    slot_cls[s] = static_cast<int>(slot_class(s));
    slot_lr[s] = lr_.for_class(slot_class(s), iteration, total_iterations);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (int s = 0; s < kRawPerGaussian; ++s)
      if (!std::isfinite(gaussian_grad[i * kRawPerGaussian + s])) report.skipped[slot_cls[s]] = true;

  AdamState& ga = state_.gaussians;
  ++ga.step;
  const double bc1 = 1.0 - std::pow(hyper_.beta1, static_cast<double>(ga.step));
  const double bc2 = 1.0 - std::pow(hyper_.beta2, static_cast<double>(ga.step));
  for (std::size_t i = 0; i < n; ++i)
    for (int s = 0; s < kRawPerGaussian; ++s) {
      if (report.skipped[slot_cls[s]]) continue;
      const std::size_t k = i * kRawPerGaussian + s;
      adam_element(params.gaussians[k], ga.m[k], ga.v[k], gaussian_grad[k], slot_lr[s], bc1, bc2, hyper_);
    }

  if (!env_grad.empty()) {
    bool finite = true;
    for (double g : env_grad) finite = finite && std::isfinite(g);
    const int env_cls = static_cast<int>(ParamClass::kEnvironment);
    if (!finite) {
      report.skipped[env_cls] = true;
    } else {
      AdamState& ea = state_.environment;
      ea.resize(params.env.size());
      ++ea.step;
      const double ebc1 = 1.0 - std::pow(hyper_.beta1, static_cast<double>(ea.step));
      const double ebc2 = 1.0 - std::pow(hyper_.beta2, static_cast<double>(ea.step));
      const double lr = lr_.environment;
      for (std::size_t k = 0; k < params.env.size(); ++k)
        adam_element(params.env[k], ea.m[k], ea.v[k], env_grad[k], lr, ebc1, ebc2, hyper_);
    }
  }
  for (int c = 0; c < kParamClassCount; ++c)
    if (report.skipped[c])
      spdlog::warn("iteration {}: non-finite {} gradient, group skipped", iteration,
                   param_class_name(static_cast<ParamClass>(c)));
  project_parameters(params);
  return report;
}

void Optimizer::erase_gaussians(std::span<const std::size_t> indices) {
  if (indices.empty()) return;
  auto compact = [&](std::vector<double>& v) {
    std::vector<double> kept;
    kept.reserve(v.size());
    std::size_t next = 0;
    const std::size_t n = v.size() / kRawPerGaussian;
    for (std::size_t i = 0; i < n; ++i) {
      if (next < indices.size() && indices[next] == i) {
        ++next;
        continue;
      }
      kept.insert(kept.end(), v.begin() + i * kRawPerGaussian, v.begin() + (i + 1) * kRawPerGaussian);
    }
    v = std::move(kept);
  };
  compact(state_.gaussians.m);
  compact(state_.gaussians.v);
}

}  // namespace refsplat
