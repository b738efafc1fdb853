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

#include "refsplat/rasterizer.hpp"

#include <cmath>

namespace refsplat {

namespace {

bool usable(double d) { return std::isfinite(d) && d > 0.0; }

bool neighborhood_valid(const Image& depth, int x, int y) {
  if (x < 1 || y < 1 || x + 1 >= depth.width || y + 1 >= depth.height) return false;
  return usable(depth.at(x, y)) && usable(depth.at(x - 1, y)) && usable(depth.at(x + 1, y)) &&
         usable(depth.at(x, y - 1)) && usable(depth.at(x, y + 1));
}

Vec3 back_project(const Image& depth, const Camera& cam, int x, int y) {
  return depth.at(x, y) * cam.camera_ray(x, y);
}

}  // namespace

Image render_normal_from_depth(const Image& depth, const Camera& cam) {
  Image out(depth.width, depth.height, 3);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < depth.height; ++y) {
    for (int x = 0; x < depth.width; ++x) {
      if (!neighborhood_valid(depth, x, y)) continue;
      const Vec3 dx = back_project(depth, cam, x + 1, y) - back_project(depth, cam, x - 1, y);
      const Vec3 dy = back_project(depth, cam, x, y + 1) - back_project(depth, cam, x, y - 1);
      const Vec3 c = dy.cross(dx);
      const double len = c.norm();
      if (!(len > 0)) continue;
      for (int k = 0; k < 3; ++k) out.at(x, y, k) = c[k] / len;
    }
  }
  return out;
}

Image render_normal_from_depth_backward(const Image& depth, const Camera& cam, const Image& grad_normal) {
  Image grad(depth.width, depth.height, 1);
  // Scatter form; serial so the accumulation order is fixed.
  for (int y = 0; y < depth.height; ++y) {
    for (int x = 0; x < depth.width; ++x) {
      if (!neighborhood_valid(depth, x, y)) continue;
      const Vec3 gn(grad_normal.at(x, y, 0), grad_normal.at(x, y, 1), grad_normal.at(x, y, 2));
      if (gn.isZero(0.0)) continue;
      const Vec3 dx = back_project(depth, cam, x + 1, y) - back_project(depth, cam, x - 1, y);
      const Vec3 dy = back_project(depth, cam, x, y + 1) - back_project(depth, cam, x, y - 1);
      const Vec3 c = dy.cross(dx);
      const double len = c.norm();
      if (!(len > 0)) continue;
      const Vec3 n = c / len;
      const Vec3 gc = (gn - n * n.dot(gn)) / len;
      const Vec3 g_dy = dx.cross(gc);
      const Vec3 g_dx = gc.cross(dy);
      grad.at(x + 1, y) += g_dx.dot(cam.camera_ray(x + 1, y));
      grad.at(x - 1, y) -= g_dx.dot(cam.camera_ray(x - 1, y));
      grad.at(x, y + 1) += g_dy.dot(cam.camera_ray(x, y + 1));
      grad.at(x, y - 1) -= g_dy.dot(cam.camera_ray(x, y - 1));
    }
  }
  return grad;
}

}  // namespace refsplat
