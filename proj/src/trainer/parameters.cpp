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

#include "refsplat/trainer/parameters.hpp"

#include <algorithm>
#include <cmath>

namespace refsplat {

namespace {

double encode_unit(double p) { return logit(std::clamp(p, kEncodeMargin, 1.0 - kEncodeMargin)); }

}  // namespace

std::string_view param_class_name(ParamClass c) {
  switch (c) {
    case ParamClass::kPosition: return "position";
    case ParamClass::kRotation: return "rotation";
    case ParamClass::kScale: return "scale";
    case ParamClass::kOpacity: return "opacity";
    case ParamClass::kDiffuse: return "diffuse";
    case ParamClass::kMaterial: return "material";
    case ParamClass::kResidual: return "residual";
    case ParamClass::kEnvironment: return "environment";
  }
  return "unknown";
}

ParamClass slot_class(int slot) {
  if (slot < kSlotRotation) return ParamClass::kPosition;
  if (slot < kSlotLogScale) return ParamClass::kRotation;
  if (slot < kSlotOpacity) return ParamClass::kScale;
  if (slot < kSlotDiffuse) return ParamClass::kOpacity;
  if (slot < kSlotAlbedo) return ParamClass::kDiffuse;
  if (slot < kSlotResidual) return ParamClass::kMaterial;
  return ParamClass::kResidual;
}

ParameterSet encode_parameters(std::span<const Gaussian> gaussians, const EnvironmentCubemap& env) {
  ParameterSet p;
  p.gaussians.resize(gaussians.size() * kRawPerGaussian);
  for (std::size_t i = 0; i < gaussians.size(); ++i) {
    const Gaussian& g = gaussians[i];
    double* r = p.raw(i);
    for (int k = 0; k < 3; ++k) r[kSlotPosition + k] = g.position[k];
    const Vec4 q = g.rotation.normalized();
    for (int k = 0; k < 4; ++k) r[kSlotRotation + k] = q[k];
    for (int k = 0; k < 2; ++k) r[kSlotLogScale + k] = std::log(g.scale[k]);
    r[kSlotOpacity] = encode_unit(g.opacity);
    for (int k = 0; k < 3; ++k) r[kSlotDiffuse + k] = encode_unit(g.diffuse[k]);
    r[kSlotAlbedo] = encode_unit(g.albedo);
    r[kSlotMetallic] = encode_unit(g.metallic);
    r[kSlotRoughness] = encode_unit(g.roughness);
    for (int k = 0; k < 3; ++k) r[kSlotResidual + k] = std::max(0.0, g.residual[k]);
  }
  p.env = env.base();
  p.env_resolution = env.resolution();
  return p;
}

Gaussian decode_gaussian(const double* r) {
  Gaussian g;
  g.position = Vec3(r[kSlotPosition], r[kSlotPosition + 1], r[kSlotPosition + 2]);
  g.rotation = Vec4(r[kSlotRotation], r[kSlotRotation + 1], r[kSlotRotation + 2], r[kSlotRotation + 3]);
  g.scale = Vec2(std::exp(r[kSlotLogScale]), std::exp(r[kSlotLogScale + 1]));
  g.opacity = sigmoid(r[kSlotOpacity]);
  g.diffuse = Vec3(sigmoid(r[kSlotDiffuse]), sigmoid(r[kSlotDiffuse + 1]), sigmoid(r[kSlotDiffuse + 2]));
  g.albedo = sigmoid(r[kSlotAlbedo]);
  g.metallic = sigmoid(r[kSlotMetallic]);
  g.roughness = sigmoid(r[kSlotRoughness]);
  g.residual = Vec3(r[kSlotResidual], r[kSlotResidual + 1], r[kSlotResidual + 2]);
  return g;
}

GaussianSet decode_gaussians(const ParameterSet& params) {
  GaussianSet out(params.count());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = decode_gaussian(params.raw(i));
  return out;
}

void decode_environment(const ParameterSet& params, EnvironmentCubemap& env) {
  if (env.resolution() != params.env_resolution) env = EnvironmentCubemap(params.env_resolution);
  env.base() = params.env;
  env.rebuild_mips();
}

std::vector<double> raw_gaussian_gradient(const ParameterSet& params, std::span<const GaussianGrad> grads) {
  std::vector<double> out(params.gaussians.size(), 0.0);
  for (std::size_t i = 0; i < grads.size(); ++i) {
    const double* r = params.raw(i);
    double* o = out.data() + i * kRawPerGaussian;
    const GaussianGrad& g = grads[i];
    auto dsig = [](double x) {
      const double s = sigmoid(x);
      return s * (1.0 - s);
    };
    for (int k = 0; k < 3; ++k) o[kSlotPosition + k] = g.position[k];
    for (int k = 0; k < 4; ++k) o[kSlotRotation + k] = g.rotation[k];
    for (int k = 0; k < 2; ++k) o[kSlotLogScale + k] = g.scale[k] * std::exp(r[kSlotLogScale + k]);
    o[kSlotOpacity] = g.opacity * dsig(r[kSlotOpacity]);
    for (int k = 0; k < 3; ++k) o[kSlotDiffuse + k] = g.diffuse[k] * dsig(r[kSlotDiffuse + k]);
    o[kSlotAlbedo] = g.albedo * dsig(r[kSlotAlbedo]);
    o[kSlotMetallic] = g.metallic * dsig(r[kSlotMetallic]);
    o[kSlotRoughness] = g.roughness * dsig(r[kSlotRoughness]);
    for (int k = 0; k < 3; ++k) o[kSlotResidual + k] = g.residual[k];
  }
  return out;
}

void project_parameters(ParameterSet& params) {
  for (std::size_t i = 0; i < params.count(); ++i) {
    double* r = params.raw(i);
    Eigen::Map<Vec4> q(r + kSlotRotation);
    const double len = q.norm();
    if (len > 0.0) q /= len;
    else q = Vec4(1, 0, 0, 0);
    for (int k = 0; k < 3; ++k) r[kSlotResidual + k] = std::max(0.0, r[kSlotResidual + k]);
  }
  for (double& t : params.env) t = std::max(0.0, t);
}

void erase_gaussians(ParameterSet& params, std::span<const std::size_t> indices) {
  if (indices.empty()) return;
  std::vector<double> kept;
  kept.reserve(params.gaussians.size());
  std::size_t next = 0;
  for (std::size_t i = 0; i < params.count(); ++i) {
    if (next < indices.size() && indices[next] == i) {
      ++next;
      continue;
    }
    kept.insert(kept.end(), params.raw(i), params.raw(i) + kRawPerGaussian);
  }
  params.gaussians = std::move(kept);
}

}  // namespace refsplat
