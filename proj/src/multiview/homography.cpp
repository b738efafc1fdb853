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

#include "refsplat/multiview.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace refsplat {

void relative_pose(const Camera& ci, const Camera& cj, Mat3& r_ij, Vec3& t_ij) {
  r_ij = cj.rotation() * ci.rotation().transpose();
  t_ij = cj.translation() - r_ij * ci.translation();
}

Mat3 homography(const Camera& ci, const Camera& cj, double plane_distance, const Vec3& normal_cam_i) {
  Mat3 r;
  Vec3 t;
  relative_pose(ci, cj, r, t);
  return cj.intrinsics() * (r - t * normal_cam_i.transpose() / plane_distance) * ci.intrinsics_inverse();
}

std::optional<Mat3> pixel_homography(const Camera& ci, const Camera& cj, double u, double v, double depth,
                                     const Vec3& normal_cam_i, const WarpOptions& opts) {
  if (!(depth > 0.0) || !std::isfinite(depth)) return std::nullopt;
  const double len = normal_cam_i.norm();
  if (!(len > 0.0)) return std::nullopt;
  const Vec3 n = normal_cam_i / len;
  const Vec3 ray = ci.camera_ray(u, v);
  if (std::abs(n.dot(ray.normalized())) <= opts.min_incidence) return std::nullopt;
  const double dist = -n.dot(depth * ray);
  if (!(dist > 0.0)) return std::nullopt;
  return homography(ci, cj, dist, n);
}

Vec2 apply_homography(const Mat3& h, double u, double v) {
  const Vec3 p = h * Vec3(u, v, 1.0);
  return Vec2(p.x() / p.z(), p.y() / p.z());
}

std::optional<BilinearTap> bilinear_tap(int width, int height, double x, double y) {
  if (!(x >= 0.0 && y >= 0.0 && x <= width - 1 && y <= height - 1)) return std::nullopt;
  const int x0 = std::min(static_cast<int>(std::floor(x)), std::max(width - 2, 0));
  const int y0 = std::min(static_cast<int>(std::floor(y)), std::max(height - 2, 0));
  const int x1 = std::min(x0 + 1, width - 1), y1 = std::min(y0 + 1, height - 1);
  const double fx = x - x0, fy = y - y0;
  BilinearTap t;
  auto idx = [width](int xx, int yy) { return static_cast<std::uint32_t>(yy * width + xx); };
  t.index = {idx(x0, y0), idx(x1, y0), idx(x0, y1), idx(x1, y1)};
  t.weight = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
  t.fx = fx;
  t.fy = fy;
  return t;
}

bool warp_patch(const Image& src, const Mat3& h, const PatchGrid& patch, std::vector<double>& out) {
  out.assign(static_cast<std::size_t>(patch.count()) * src.channels, 0.0);
  std::size_t k = 0;
  for (int dy = -patch.half; dy <= patch.half; ++dy)
    for (int dx = -patch.half; dx <= patch.half; ++dx) {
      const Vec2 q = apply_homography(h, patch.cx + dx, patch.cy + dy);
      const auto tap = bilinear_tap(src.width, src.height, q.x(), q.y());
      if (!tap) return false;
      for (int c = 0; c < src.channels; ++c, ++k) out[k] = tap->sample(src, c);
    }
  return true;
}

std::vector<std::size_t> nearest_cameras(std::span<const Camera> cameras, std::size_t target, std::size_t k) {
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < cameras.size(); ++i)
    if (i != target) order.push_back(i);
  const Vec3 c = cameras[target].center();
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return (cameras[a].center() - c).squaredNorm() < (cameras[b].center() - c).squaredNorm();
  });
  if (order.size() > k) order.resize(k);
  return order;
}

}  // namespace refsplat
