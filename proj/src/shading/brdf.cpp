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

#include "refsplat/shading.hpp"

#include <algorithm>
#include <cmath>

namespace refsplat {

double roughness_to_alpha(double roughness) { return std::max(roughness * roughness, kMinAlpha); }

double ggx_D(double n_dot_h, double roughness) {
  const double a = roughness_to_alpha(roughness);
  const double a2 = a * a;
  const double c = std::clamp(n_dot_h, 0.0, 1.0);
  const double d = c * c * (a2 - 1.0) + 1.0;
  return a2 / (kPi * d * d);
}

double smith_G(double n_dot_v, double n_dot_l, double roughness) {
  const double a = roughness_to_alpha(roughness);
  const double a2 = a * a;
  const double nv = std::clamp(n_dot_v, kMinCosine, 1.0);
  const double nl = std::clamp(n_dot_l, kMinCosine, 1.0);
  // Operand order keeps the expression bitwise symmetric in (nv, nl).
  const double lv = nv * std::sqrt(a2 + (1.0 - a2) * (nl * nl));
  const double ll = nl * std::sqrt(a2 + (1.0 - a2) * (nv * nv));
  return 2.0 * (nv * nl) / (lv + ll);
}

Vec3 fresnel_F(double cos_theta, const Vec3& f0) {
  const double c = 1.0 - std::clamp(cos_theta, 0.0, 1.0);
  const double c2 = c * c;
  const double w = c2 * c2 * c;
  return f0 + (Vec3::Ones() - f0) * w;
}

Vec3 brdf_fs(const Vec3& wi, const Vec3& wo, const Vec3& n, double albedo, double metallic, double roughness) {
  const double ci = n.dot(wi);
  const double co = n.dot(wo);
  if (!(ci > 0.0) || !(co > 0.0)) return Vec3::Zero();
  const Vec3 h = (wi + wo).normalized();
  const double hd = 0.5 * (h.dot(wi) + h.dot(wo));
  const Vec3 f = fresnel_F(hd, Vec3::Constant(base_reflectance(albedo, metallic)));
  const double dg = ggx_D(n.dot(h), roughness) * smith_G(co, ci, roughness);
  return f * (dg / (4.0 * (ci * co)));
}

}  // namespace refsplat
