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

#include <fstream>
#include <sstream>

namespace refsplat {

DiskFrame disk_frame(const Gaussian& g) {
  DiskFrame f;
  f.rotation = quat_to_matrix(g.rotation);
  f.center = g.position;
  f.tangent_u = f.rotation.col(0);
  f.tangent_v = f.rotation.col(1);
  f.normal = f.rotation.col(2);
  return f;
}

GaussianSet init_gaussians(const std::vector<SurfacePoint>& points, const MaterialDefaults& defaults) {
  if (points.empty()) throw InputError("init_gaussians: no points");
  GaussianSet out;
  out.reserve(points.size());
  for (const auto& p : points) {
    const double len = p.normal.norm();
    if (!(len > 1e-12)) throw InputError("init_gaussians: zero-length normal");
    Gaussian g;
    g.position = p.position;
    g.rotation = quat_from_z_to(p.normal / len);
    g.scale = Vec2::Constant(defaults.scale);
    g.opacity = defaults.opacity;
    g.diffuse = defaults.diffuse;
    g.albedo = defaults.albedo;
    g.metallic = defaults.metallic;
    g.roughness = defaults.roughness;
    out.push_back(g);
  }
  return out;
}

std::vector<SurfacePoint> load_points(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("points: cannot open " + path);
  std::vector<SurfacePoint> pts;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ss(line);
    SurfacePoint p;
    if (!(ss >> p.position.x())) continue;
    if (!(ss >> p.position.y() >> p.position.z() >> p.normal.x() >> p.normal.y() >> p.normal.z()))
      throw InputError("points: malformed line " + std::to_string(lineno) + " in " + path);
    pts.push_back(p);
  }
  return pts;
}

void save_points(const std::vector<SurfacePoint>& points, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("points: cannot write " + path);
  out.precision(17);
  out << "# x y z nx ny nz\n";
  for (const auto& p : points)
    out << p.position.x() << ' ' << p.position.y() << ' ' << p.position.z() << ' ' << p.normal.x() << ' '
        << p.normal.y() << ' ' << p.normal.z() << '\n';
}

}  // namespace refsplat
