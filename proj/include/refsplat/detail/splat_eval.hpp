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

// Per-fragment ray/disk evaluation shared by the tiled rasterizer, the serial
// reference rasterizer and the ray tracer. Keeping one copy of this math is
// what makes the parallel and reference kernels agree bit for bit.

#pragma once

#include "refsplat/rasterizer.hpp"

#include <array>
#include <cmath>
#include <optional>

namespace refsplat::detail {

/// Number of composited channels: diffuse(3), albedo, metallic, roughness,
/// depth, normal(3), alpha.
inline constexpr int kChannels = 11;
enum Channel : int { kDiffuse = 0, kAlbedo = 3, kMetallic = 4, kRoughness = 5, kDepth = 6, kNormal = 7, kAlpha = 10 };

/// Per-Gaussian quantities that do not depend on the pixel.
struct SplatGeometry {
  DiskFrame frame;
  Vec2 scale;
  double opacity = 0;
  Vec3 center_cam;     ///< disk center in camera space
  Vec2 center_pixel;   ///< projected center
  double facing = 1;   ///< +1 if the normal faces the camera center
  Vec3 normal_cam;     ///< facing * R * normal
};

inline SplatGeometry make_geometry(const Gaussian& g, const Camera& cam) {
  SplatGeometry s;
  s.frame = disk_frame(g);
  s.scale = g.scale;
  s.opacity = g.opacity;
  s.center_cam = cam.to_camera(g.position);
  s.center_pixel = Vec2(cam.fx() * s.center_cam.x() / s.center_cam.z() + cam.cx(),
                        cam.fy() * s.center_cam.y() / s.center_cam.z() + cam.cy());
  s.facing = s.frame.normal.dot(cam.center() - g.position) >= 0 ? 1.0 : -1.0;
  s.normal_cam = s.facing * (cam.rotation() * s.frame.normal);
  return s;
}

/// Ray/plane intersection in the disk's local frame.
struct DiskHit {
  double t = 0;
  double u = 0;  ///< local coordinate along tangent_u, in sigmas
  double v = 0;
  bool valid = false;  ///< false when the ray is parallel to the plane
};

inline DiskHit intersect_disk_plane(const DiskFrame& f, const Vec2& scale, const Vec3& origin, const Vec3& dir) {
  DiskHit h;
  const double b = f.normal.dot(dir);
  if (b == 0.0 || !std::isfinite(b)) return h;
  h.t = f.normal.dot(f.center - origin) / b;
  const Vec3 delta = origin + h.t * dir - f.center;
  h.u = f.tangent_u.dot(delta) / scale[0];
  h.v = f.tangent_v.dot(delta) / scale[1];
  h.valid = std::isfinite(h.t) && std::isfinite(h.u) && std::isfinite(h.v);
  return h;
}

struct FragmentSample {
  double depth = 0;  ///< camera depth of the sample
  double rho2 = 0;   ///< squared Mahalanobis distance
  double weight = 0; ///< opacity * exp(-rho2 / 2)
  bool screen = false;
};

inline FragmentSample sample_screen(const SplatGeometry& s, double px, double py, double sigma) {
  FragmentSample f;
  f.screen = true;
  const double dx = px - s.center_pixel.x();
  const double dy = py - s.center_pixel.y();
  f.rho2 = (dx * dx + dy * dy) / (sigma * sigma);
  f.depth = s.center_cam.z();
  f.weight = s.opacity * std::exp(-0.5 * f.rho2);
  return f;
}

inline FragmentSample sample_disk(const SplatGeometry& s, const DiskHit& h) {
  FragmentSample f;
  f.rho2 = h.u * h.u + h.v * h.v;
  f.depth = h.t;
  f.weight = s.opacity * std::exp(-0.5 * f.rho2);
  return f;
}

/// Full candidate test used while planning: picks the branch with the smaller
/// Mahalanobis distance and applies support, near-plane and weight cutoffs.
inline std::optional<FragmentSample> sample_candidate(const SplatGeometry& s, const Camera& cam, double px,
                                                      double py, const RasterOptions& opts) {
  const double support2 = opts.support * opts.support;
  std::optional<FragmentSample> best;
  const DiskHit h = intersect_disk_plane(s.frame, s.scale, cam.center(), cam.world_ray(px, py));
  if (h.valid && h.t > opts.near_plane && std::abs(h.u) <= opts.support && std::abs(h.v) <= opts.support)
    best = sample_disk(s, h);
  if (s.center_cam.z() > opts.near_plane) {
    const FragmentSample scr = sample_screen(s, px, py, opts.min_screen_sigma);
    if (scr.rho2 <= support2 && (!best || scr.rho2 < best->rho2)) best = scr;
  }
  if (!best || best->weight < opts.weight_cutoff) return std::nullopt;
  return best;
}

/// Re-evaluates a planned fragment on a fixed branch without cutoffs.
inline FragmentSample sample_fixed(const SplatGeometry& s, const Camera& cam, double px, double py, bool screen,
                                   const RasterOptions& opts) {
  if (screen) return sample_screen(s, px, py, opts.min_screen_sigma);
  return sample_disk(s, intersect_disk_plane(s.frame, s.scale, cam.center(), cam.world_ray(px, py)));
}

inline std::array<double, kChannels> channel_values(const Gaussian& g, const SplatGeometry& s,
                                                    const FragmentSample& f) {
  return {g.diffuse[0], g.diffuse[1], g.diffuse[2], g.albedo,          g.metallic,        g.roughness,
          f.depth,      s.normal_cam[0], s.normal_cam[1], s.normal_cam[2], 1.0};
}

/// Strict weak order used for front-to-back sorting. Ties in depth (coplanar
/// disks) are broken by Gaussian content so the result does not depend on the
/// input order.
inline bool content_less(const Gaussian& a, const Gaussian& b) {
  const std::array<double, 19> ka{a.position[0], a.position[1], a.position[2], a.rotation[0], a.rotation[1],
                                  a.rotation[2], a.rotation[3], a.scale[0],    a.scale[1],    a.opacity,
                                  a.diffuse[0],  a.diffuse[1],  a.diffuse[2],  a.albedo,      a.metallic,
                                  a.roughness,   a.residual[0], a.residual[1], a.residual[2]};
  const std::array<double, 19> kb{b.position[0], b.position[1], b.position[2], b.rotation[0], b.rotation[1],
                                  b.rotation[2], b.rotation[3], b.scale[0],    b.scale[1],    b.opacity,
                                  b.diffuse[0],  b.diffuse[1],  b.diffuse[2],  b.albedo,      b.metallic,
                                  b.roughness,   b.residual[0], b.residual[1], b.residual[2]};
  return ka < kb;
}

}  // namespace refsplat::detail
