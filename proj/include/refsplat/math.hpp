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

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>

namespace refsplat {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = 3.14159265358979323846;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double logit(double p) {
  constexpr double eps = 1e-6;
  p = p < eps ? eps : (p > 1.0 - eps ? 1.0 - eps : p);
  return std::log(p / (1.0 - p));
}

/// Rotation matrix of the (w, x, y, z) quaternion `q` after normalization.
inline Mat3 quat_to_matrix(const Vec4& q) {
  const Vec4 n = q.normalized();
  const double w = n[0], x = n[1], y = n[2], z = n[3];
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

/// Pulls a gradient on the rotation matrix back to the raw (unnormalized)
/// quaternion, including the normalization Jacobian.
inline Vec4 quat_matrix_backward(const Vec4& q, const Mat3& g) {
  const double len = q.norm();
  const Vec4 n = q / len;
  const double w = n[0], x = n[1], y = n[2], z = n[3];
  Vec4 gn;
  gn[0] = 2 * (-z * g(0, 1) + y * g(0, 2) + z * g(1, 0) - x * g(1, 2) - y * g(2, 0) + x * g(2, 1));
  gn[1] = 2 * (y * g(0, 1) + z * g(0, 2) + y * g(1, 0) - 2 * x * g(1, 1) - w * g(1, 2) + z * g(2, 0) +
               w * g(2, 1) - 2 * x * g(2, 2));
  gn[2] = 2 * (-2 * y * g(0, 0) + x * g(0, 1) + w * g(0, 2) + x * g(1, 0) + z * g(1, 2) - w * g(2, 0) +
               z * g(2, 1) - 2 * y * g(2, 2));
  gn[3] = 2 * (-2 * z * g(0, 0) - w * g(0, 1) + x * g(0, 2) + w * g(1, 0) - 2 * z * g(1, 1) + y * g(1, 2) +
               x * g(2, 0) + y * g(2, 1));
  return (gn - n * n.dot(gn)) / len;
}

/// Shortest-arc quaternion taking +z onto the unit vector `n`.
inline Vec4 quat_from_z_to(const Vec3& n) {
  const Eigen::Quaterniond q = Eigen::Quaterniond::FromTwoVectors(Vec3::UnitZ(), n);
  return Vec4(q.w(), q.x(), q.y(), q.z());
}

inline Vec3 reflect_about(const Vec3& wo, const Vec3& n) { return 2.0 * n.dot(wo) * n - wo; }

inline bool all_finite(const Vec3& v) { return std::isfinite(v[0]) && std::isfinite(v[1]) && std::isfinite(v[2]); }

}  // namespace refsplat
