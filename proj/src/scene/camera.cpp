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

#include "refsplat/scene.hpp"

#include <json.hpp>

#include <Eigen/SVD>

#include <fstream>
#include <sstream>

namespace refsplat {

namespace {

constexpr double kOrthoTolerance = 1e-6;
constexpr double kOrthoReject = 1e-3;

double orthonormality_drift(const Mat3& r) {
  return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
}

Mat3 nearest_rotation(const Mat3& r) {
  Eigen::JacobiSVD<Mat3> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().transpose();
}

}  // namespace

Camera::Camera(double fx, double fy, double cx, double cy, const Mat3& rotation, const Vec3& translation,
               int width, int height)
    : fx_(fx), fy_(fy), cx_(cx), cy_(cy), rotation_(rotation), translation_(translation), width_(width),
      height_(height) {
  if (width <= 0 || height <= 0) throw InputError("camera: non-positive image size");
  if (!(fx > 0) || !(fy > 0)) throw InputError("camera: focal lengths must be positive");
  if (!(cx >= 0 && cx < width && cy >= 0 && cy < height)) throw InputError("camera: principal point outside image");
  const double det = rotation.determinant();
  if (!std::isfinite(det) || std::abs(det) < 1e-9) throw InputError("camera: non-invertible rotation");
  if (orthonormality_drift(rotation) > kOrthoTolerance) throw InputError("camera: rotation is not orthonormal");
  if (det < 0) throw InputError("camera: improper rotation (determinant -1)");
  if (!all_finite(translation)) throw InputError("camera: non-finite translation");
}

Mat3 Camera::intrinsics() const {
  Mat3 k;
  k << fx_, 0, cx_, 0, fy_, cy_, 0, 0, 1;
  return k;
}

Mat3 Camera::intrinsics_inverse() const {
  Mat3 k;
  k << 1.0 / fx_, 0, -cx_ / fx_, 0, 1.0 / fy_, -cy_ / fy_, 0, 0, 1;
  return k;
}

Vec3 Camera::project(const Vec3& world) const {
  const Vec3 c = to_camera(world);
  return Vec3(fx_ * c.x() / c.z() + cx_, fy_ * c.y() / c.z() + cy_, c.z());
}

Camera look_at_camera(const Vec3& eye, const Vec3& target, const Vec3& up, double fov_y_deg, int width,
                      int height) {
  const Vec3 forward = (target - eye).normalized();
  const Vec3 right = forward.cross(up).normalized();
  const Vec3 down = forward.cross(right);
  Mat3 r;
  r.row(0) = right.transpose();
  r.row(1) = down.transpose();
  r.row(2) = forward.transpose();
  const double f = 0.5 * height / std::tan(0.5 * fov_y_deg * kPi / 180.0);
  return Camera(f, f, 0.5 * (width - 1), 0.5 * (height - 1), r, -r * eye, width, height);
}

std::vector<CameraFrame> parse_cameras(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("cameras: malformed JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("frames") || !doc["frames"].is_array())
    throw InputError("cameras: missing \"frames\" array");
  const auto& frames = doc["frames"];
  if (frames.empty()) throw InputError("cameras: no cameras");

  std::vector<CameraFrame> out;
  out.reserve(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& f = frames[i];
    const std::string where = "cameras: frame " + std::to_string(i) + ": ";
    try {
      const auto r = f.at("R").get<std::vector<double>>();
      const auto t = f.at("t").get<std::vector<double>>();
      if (r.size() != 9) throw InputError(where + "R must have 9 entries");
      if (t.size() != 3) throw InputError(where + "t must have 3 entries");
      Mat3 rot;
      rot << r[0], r[1], r[2], r[3], r[4], r[5], r[6], r[7], r[8];
      const double det = rot.determinant();
      if (!std::isfinite(det) || std::abs(det) < 1e-9) throw InputError(where + "non-invertible rotation");
      const double drift = orthonormality_drift(rot);
      if (drift > kOrthoReject) throw InputError(where + "rotation is not orthonormal");
      if (det < 0) throw InputError(where + "improper rotation (determinant -1)");
      if (drift > kOrthoTolerance) rot = nearest_rotation(rot);
      CameraFrame frame;
      frame.file_path = f.value("file_path", std::string());
      frame.camera = Camera(f.at("fx").get<double>(), f.at("fy").get<double>(), f.at("cx").get<double>(),
                            f.at("cy").get<double>(), rot, Vec3(t[0], t[1], t[2]), f.at("width").get<int>(),
                            f.at("height").get<int>());
      out.push_back(std::move(frame));
    } catch (const nlohmann::json::exception& e) {
      throw InputError(where + "malformed field: " + e.what());
    } catch (const InputError& e) {
      const std::string msg = e.what();
      throw InputError(msg.rfind("cameras:", 0) == 0 ? msg : where + msg);
    }
  }
  return out;
}

std::vector<CameraFrame> load_cameras(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cameras: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_cameras(ss.str());
}

void save_cameras(const std::vector<CameraFrame>& frames, const std::string& path) {
  nlohmann::json doc;
  doc["frames"] = nlohmann::json::array();
  for (const auto& f : frames) {
    const Camera& c = f.camera;
    std::vector<double> r(9);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r[i * 3 + j] = c.rotation()(i, j);
    doc["frames"].push_back({{"file_path", f.file_path},
                             {"width", c.width()},
                             {"height", c.height()},
                             {"fx", c.fx()},
                             {"fy", c.fy()},
                             {"cx", c.cx()},
                             {"cy", c.cy()},
                             {"R", r},
                             {"t", {c.translation().x(), c.translation().y(), c.translation().z()}}});
  }
  std::ofstream out(path);
  if (!out) throw InputError("cameras: cannot write " + path);
  out << doc.dump(2) << "\n";
}

}  // namespace refsplat
