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

#include "refsplat/image.hpp"
#include "refsplat/math.hpp"
#include "refsplat/rasterizer.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace refsplat {

// ---------------------------------------------------------------------------
// Microfacet terms (GGX, alpha = roughness^2).

inline constexpr double kMinAlpha = 1e-4;
inline constexpr double kMinCosine = 1e-4;
inline constexpr double kDielectricF0 = 0.04;

double roughness_to_alpha(double roughness);

/// GGX normal distribution.
double ggx_D(double n_dot_h, double roughness);

/// Height-correlated Smith masking-shadowing G2.
double smith_G(double n_dot_v, double n_dot_l, double roughness);

/// Base reflectance of the metallic workflow, scalar albedo broadcast.
inline double base_reflectance(double albedo, double metallic) {
  return kDielectricF0 * (1.0 - metallic) + albedo * metallic;
}

/// Schlick Fresnel.
Vec3 fresnel_F(double cos_theta, const Vec3& f0);

/// Specular BRDF D F G / (4 cos_i cos_o); zero below either horizon.
Vec3 brdf_fs(const Vec3& wi, const Vec3& wo, const Vec3& n, double albedo, double metallic, double roughness);

// ---------------------------------------------------------------------------
// Pre-integrated BRDF table.

/// (scale, bias) of the F0-affine split of the specular directional albedo,
/// tabulated over (cos_v, roughness) at texel centers.
class DfgLut {
 public:
  DfgLut() = default;
  DfgLut(int resolution, std::vector<double> scale, std::vector<double> bias);

  int resolution() const { return resolution_; }
  double scale_at(int i_cos, int j_rough) const { return scale_[j_rough * resolution_ + i_cos]; }
  double bias_at(int i_cos, int j_rough) const { return bias_[j_rough * resolution_ + i_cos]; }

  struct Sample {
    double scale = 0, bias = 0;
    double d_scale_d_cos = 0, d_bias_d_cos = 0;
    double d_scale_d_rough = 0, d_bias_d_rough = 0;
  };
  /// Bilinear lookup with clamp-to-edge, plus its partial derivatives.
  Sample lookup(double cos_v, double roughness) const;

  /// 2-channel visualization (scale, bias, 0).
  Image to_image() const;

 private:
  int resolution_ = 0;
  std::vector<double> scale_, bias_;
};

/// Importance-sampled GGX pre-integration with `samples` per texel.
DfgLut precompute_dfg(int resolution = 64, int samples = 1024, std::uint64_t seed = 0);

/// Process-wide default table (64x64, 1024 samples, seed 0), built on first use.
const DfgLut& shared_dfg();

// ---------------------------------------------------------------------------
// Environment cubemap.

/// Face order +x, -x, +y, -y, +z, -z.
inline constexpr int kFaces = 6;

/// Learnable RGB radiance cubemap with a 2x2 box-filtered mip chain. The base
/// level is the parameter set; mips are derived and must be rebuilt with
/// rebuild_mips() after the base texels change.
class EnvironmentCubemap {
 public:
  EnvironmentCubemap() = default;
  explicit EnvironmentCubemap(int resolution, const Vec3& fill = Vec3::Constant(0.5));

  int resolution() const { return resolution_; }
  int levels() const { return static_cast<int>(mips_.size()); }
  int level_size(int level) const { return resolution_ >> level; }

  /// Base texels, laid out [face][y][x][rgb].
  std::vector<double>& base() { return mips_[0]; }
  const std::vector<double>& base() const { return mips_[0]; }
  const std::vector<double>& level(int l) const { return mips_[l]; }

  std::size_t texel_index(int level, int face, int x, int y) const;
  Vec3 texel(int level, int face, int x, int y) const;
  void set_base_texel(int face, int x, int y, const Vec3& rgb);

  void rebuild_mips();

  /// Fills the base level from a radiance function of direction and rebuilds mips.
  void fill(const std::function<Vec3(const Vec3&)>& radiance);

  /// Unit direction through the center of a texel.
  Vec3 texel_direction(int level, int face, int x, int y) const;

  struct QueryGrad {
    Vec3 d_direction[3];  ///< d rgb[c] / d direction
    Vec3 d_roughness;     ///< d rgb / d roughness
  };

  /// Trilinear query (bilinear within a face, linear across mips with
  /// lod = roughness * (levels - 1)).
  Vec3 query(const Vec3& direction, double roughness, QueryGrad* grad = nullptr) const;

  /// Adds d loss / d base texel for a query with upstream gradient g_rgb into
  /// `level_grads` (one buffer per level, same layout as the mips). Call
  /// collapse_gradients() afterwards to fold the mip buffers into the base.
  void query_backward(const Vec3& direction, double roughness, const Vec3& g_rgb,
                      std::vector<std::vector<double>>& level_grads) const;
  std::vector<std::vector<double>> make_level_grads() const;
  /// Pushes per-level gradients down the box filter chain; returns base-level gradient.
  std::vector<double> collapse_gradients(std::vector<std::vector<double>> level_grads) const;

  Image face_image(int face, int level = 0) const;
  void set_face_image(int face, const Image& img);

 private:
  int resolution_ = 0;
  std::vector<std::vector<double>> mips_;
};

/// Maps a direction to (face, u, v) with u, v in [0, 1].
void direction_to_face(const Vec3& d, int& face, double& u, double& v);

void save_environment(const EnvironmentCubemap& env, const std::string& prefix);
EnvironmentCubemap load_environment(const std::string& prefix);

// ---------------------------------------------------------------------------
// Deferred shading.

/// Per-pixel indirect radiance and occlusion from the ray tracer.
struct IncidentMaps {
  Image indirect;   ///< 3 channels
  Image occlusion;  ///< 1 channel
  IncidentMaps() = default;
  IncidentMaps(int w, int h) : indirect(w, h, 3), occlusion(w, h, 1) {}
};

struct ShadeOptions {
  Vec3 background = Vec3::Zero();
};

/// Intermediate per-pixel maps, kept for decomposition dumps.
struct ShadeLayers {
  Image diffuse;   ///< alpha * (1 - m) * c_d
  Image specular;  ///< alpha * L_s
  Image final;     ///< composited against the background
};

Image deferred_shade(const GBuffer& gbuffer, const Camera& cam, const EnvironmentCubemap& env, const DfgLut& dfg,
                     const IncidentMaps& incident, const ShadeOptions& opts = {}, ShadeLayers* layers = nullptr);

struct ShadeGrad {
  GBufferGrad gbuffer;
  IncidentMaps incident;
  std::vector<double> env_base;  ///< gradient on base texels
};

ShadeGrad deferred_shade_backward(const GBuffer& gbuffer, const Camera& cam, const EnvironmentCubemap& env,
                                  const DfgLut& dfg, const IncidentMaps& incident, const Image& grad_out,
                                  const ShadeOptions& opts = {});

// ---------------------------------------------------------------------------
// Monte Carlo oracle.

/// Incident radiance override for the oracle (e.g. traced occluders).
using RadianceFn = std::function<Vec3(const Vec3& direction)>;

/// Importance-sampled estimate of the specular hemisphere integral against
/// the environment's base level (or `radiance` when given).
Vec3 mc_reference_specular(const Vec3& n, const Vec3& wo, double albedo, double metallic, double roughness,
                           const EnvironmentCubemap& env, int samples, std::uint64_t seed,
                           const RadianceFn& radiance = nullptr);

}  // namespace refsplat
