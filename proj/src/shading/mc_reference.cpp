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

#include <cmath>
#include <random>

namespace refsplat {

Vec3 mc_reference_specular(const Vec3& n, const Vec3& wo, double albedo, double metallic, double roughness,
                           const EnvironmentCubemap& env, int samples, std::uint64_t seed,
                           const RadianceFn& radiance) {
  const double nv = n.dot(wo);
  if (!(nv > 0.0) || samples <= 0) return Vec3::Zero();
  const double a = roughness_to_alpha(roughness);
  const double a2 = a * a;
  const Vec3 f0 = Vec3::Constant(base_reflectance(albedo, metallic));

  const Vec3 helper = std::abs(n.z()) < 0.999 ? Vec3(0, 0, 1) : Vec3(1, 0, 0);
  const Vec3 t = helper.cross(n).normalized();
  const Vec3 b = n.cross(t);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Vec3 sum = Vec3::Zero();
  for (int k = 0; k < samples; ++k) {
    const double u1 = uni(rng), u2 = uni(rng);
    const double phi = 2.0 * kPi * u1;
    const double cos_h = std::sqrt((1.0 - u2) / (1.0 + (a2 - 1.0) * u2));
    const double sin_h = std::sqrt(std::max(0.0, 1.0 - cos_h * cos_h));
    const Vec3 h = (sin_h * std::cos(phi)) * t + (sin_h * std::sin(phi)) * b + cos_h * n;
    const double vh = wo.dot(h);
    if (vh <= 0.0) continue;
    const Vec3 l = 2.0 * vh * h - wo;
    const double nl = n.dot(l);
    if (nl <= 0.0) continue;
    const Vec3 li = radiance ? radiance(l) : env.query(l, 0.0);
    // f_s * cos / pdf with pdf = D (n.h) / (4 v.h).
    const double weight = smith_G(nv, nl, roughness) * vh / (cos_h * nv);
    sum += li.cwiseProduct(fresnel_F(vh, f0)) * weight;
  }
  return sum / samples;
}

}  // namespace refsplat
