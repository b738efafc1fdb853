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

#include "refsplat/scene.hpp"
#include "refsplat/shading.hpp"

#include <array>
#include <span>
#include <string_view>
#include <vector>

namespace refsplat {

/// Raw (unconstrained) layout of one Gaussian inside ParameterSet::gaussians.
inline constexpr int kRawPerGaussian = 19;
enum RawSlot : int {
  kSlotPosition = 0,   // 3, world units
  kSlotRotation = 3,   // 4, quaternion (w, x, y, z)
  kSlotLogScale = 7,   // 2
  kSlotOpacity = 9,    // logit
  kSlotDiffuse = 10,   // 3 logits
  kSlotAlbedo = 13,    // logit
  kSlotMetallic = 14,  // logit
  kSlotRoughness = 15, // logit
  kSlotResidual = 16,  // 3, clamped >= 0
};

/// Parameter classes used for learning-rate groups and gradient reports.
enum class ParamClass : int { kPosition, kRotation, kScale, kOpacity, kDiffuse, kMaterial, kResidual, kEnvironment };
inline constexpr int kParamClassCount = 8;
std::string_view param_class_name(ParamClass c);
ParamClass slot_class(int slot);

/// Probabilities are kept this far from 0 and 1 when encoded so that the
/// logistic never starts saturated.
inline constexpr double kEncodeMargin = 1e-2;

struct ParameterSet {
  std::vector<double> gaussians;  ///< count() * kRawPerGaussian
  std::vector<double> env;        ///< base texels, layout of EnvironmentCubemap::base()
  int env_resolution = 0;

  std::size_t count() const { return gaussians.size() / kRawPerGaussian; }
  double* raw(std::size_t i) { return gaussians.data() + i * kRawPerGaussian; }
  const double* raw(std::size_t i) const { return gaussians.data() + i * kRawPerGaussian; }
};

ParameterSet encode_parameters(std::span<const Gaussian> gaussians, const EnvironmentCubemap& env);
Gaussian decode_gaussian(const double* raw);
GaussianSet decode_gaussians(const ParameterSet& params);
/// Copies the base texels into `env` and rebuilds its mips.
void decode_environment(const ParameterSet& params, EnvironmentCubemap& env);

/// Chain rule from activated-field gradients to raw-parameter gradients.
std::vector<double> raw_gaussian_gradient(const ParameterSet& params, std::span<const GaussianGrad> grads);

/// Projects parameters back onto their valid sets: unit quaternions,
/// non-negative residual colors and environment texels.
void project_parameters(ParameterSet& params);

/// Removes the listed Gaussians (sorted, unique indices).
void erase_gaussians(ParameterSet& params, std::span<const std::size_t> indices);

}  // namespace refsplat
