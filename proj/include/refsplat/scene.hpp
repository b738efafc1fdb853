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

#include <optional>
#include <string>
#include <vector>

namespace refsplat {

/// A 2D Gaussian disk in activated form: every value is already in its valid
/// range. The optimizer works on the raw parameterization in
/// refsplat/trainer/parameters.hpp and decodes into this struct each step.
struct Gaussian {
  Vec3 position = Vec3::Zero();
  Vec4 rotation = Vec4(1, 0, 0, 0);  ///< (w, x, y, z); normalized on use
  Vec2 scale = Vec2(0.1, 0.1);       ///< in-plane 1-sigma extents
  double opacity = 0.5;
  Vec3 diffuse = Vec3::Constant(0.5);
  double albedo = 0.5;
  double metallic = 0.0;
  double roughness = 0.5;
  Vec3 residual = Vec3::Zero();  ///< residual indirect color, >= 0
};

using GaussianSet = std::vector<Gaussian>;

/// Gradient of a scalar with respect to every field of a Gaussian.
struct GaussianGrad {
  Vec3 position = Vec3::Zero();
  Vec4 rotation = Vec4::Zero();
  Vec2 scale = Vec2::Zero();
  double opacity = 0.0;
  Vec3 diffuse = Vec3::Zero();
  double albedo = 0.0;
  double metallic = 0.0;
  double roughness = 0.0;
  Vec3 residual = Vec3::Zero();

  GaussianGrad& operator+=(const GaussianGrad& o) {
    position += o.position;
    rotation += o.rotation;
    scale += o.scale;
    opacity += o.opacity;
    diffuse += o.diffuse;
    albedo += o.albedo;
    metallic += o.metallic;
    roughness += o.roughness;
    residual += o.residual;
    return *this;
  }
};

/// World-space frame of a disk: center, tangent axes and unit normal.
struct DiskFrame {
  Vec3 center;
  Vec3 tangent_u;
  Vec3 tangent_v;
  Vec3 normal;
  Mat3 rotation;
};

DiskFrame disk_frame(const Gaussian& g);

/// Pinhole camera; (R, t) map world to camera coordinates (x right, y down,
/// z forward). Pixel (u, v) has its center at integer coordinates.
class Camera {
 public:
  Camera() = default;
  /// Validates the invariants and throws InputError on violation.
  Camera(double fx, double fy, double cx, double cy, const Mat3& rotation, const Vec3& translation, int width,
         int height);

  double fx() const { return fx_; }
  double fy() const { return fy_; }
  double cx() const { return cx_; }
  double cy() const { return cy_; }
  int width() const { return width_; }
  int height() const { return height_; }
  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  Mat3 intrinsics() const;
  Mat3 intrinsics_inverse() const;
  Vec3 center() const { return -rotation_.transpose() * translation_; }
  Vec3 to_camera(const Vec3& world) const { return rotation_ * world + translation_; }
  Vec3 to_world(const Vec3& cam) const { return rotation_.transpose() * (cam - translation_); }
  /// Camera-space ray through pixel (u, v) with unit z component.
  Vec3 camera_ray(double u, double v) const { return Vec3((u - cx_) / fx_, (v - cy_) / fy_, 1.0); }
  /// World-space direction of camera_ray (not normalized; camera z = 1).
  Vec3 world_ray(double u, double v) const { return rotation_.transpose() * camera_ray(u, v); }
  /// Pixel coordinates and camera depth of a world point.
  Vec3 project(const Vec3& world) const;

 private:
  double fx_ = 1, fy_ = 1, cx_ = 0, cy_ = 0;
  Mat3 rotation_ = Mat3::Identity();
  Vec3 translation_ = Vec3::Zero();
  int width_ = 1, height_ = 1;
};

/// Camera look-at helper used by the toy scenes and tests.
Camera look_at_camera(const Vec3& eye, const Vec3& target, const Vec3& up, double fov_y_deg, int width, int height);

struct CameraFrame {
  std::string file_path;
  Camera camera;
};

/// Parses the JSON camera file; see README for the schema.
std::vector<CameraFrame> load_cameras(const std::string& path);
std::vector<CameraFrame> parse_cameras(const std::string& json_text);
void save_cameras(const std::vector<CameraFrame>& frames, const std::string& path);

struct SurfacePoint {
  Vec3 position;
  Vec3 normal;
};

struct MaterialDefaults {
  double opacity = 0.5;
  double roughness = 0.5;
  double metallic = 0.0;
  double albedo = 0.5;
  Vec3 diffuse = Vec3::Constant(0.5);
  double scale = 0.05;
};

/// One disk per point with its normal aligned to the point normal.
GaussianSet init_gaussians(const std::vector<SurfacePoint>& points, const MaterialDefaults& defaults = {});

/// Reads "x y z nx ny nz" lines ('#' comments allowed).
std::vector<SurfacePoint> load_points(const std::string& path);
void save_points(const std::vector<SurfacePoint>& points, const std::string& path);

}  // namespace refsplat
