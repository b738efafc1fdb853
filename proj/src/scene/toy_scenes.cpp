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

#include "refsplat/toy_scenes.hpp"

#include "refsplat/raytrace.hpp"
#include "refsplat/trainer/pipeline.hpp"

#include <cmath>
#include <random>

namespace refsplat {

namespace {

Gaussian disk(const Vec3& p, const Vec3& n, double sigma) {
  Gaussian g;
  g.position = p;
  g.rotation = quat_from_z_to(n.normalized());
  g.scale = Vec2::Constant(sigma);
  return g;
}

void add_floor(ToyScene& s, int grid, double half, double sigma, const Gaussian& material, std::uint16_t id) {
  const double step = 2.0 * half / grid;
  for (int j = 0; j < grid; ++j)
    for (int i = 0; i < grid; ++i) {
      Gaussian g = material;
      const Gaussian d = disk(Vec3(-half + (i + 0.5) * step, -half + (j + 0.5) * step, 0.0), Vec3::UnitZ(), sigma);
      g.position = d.position;
      g.rotation = d.rotation;
      g.scale = d.scale;
      s.gaussians.push_back(g);
      s.object_ids.push_back(id);
    }
}

Gaussian material(double opacity, const Vec3& diffuse, double albedo, double metallic, double roughness) {
  Gaussian g;
  g.opacity = opacity;
  g.diffuse = diffuse;
  g.albedo = albedo;
  g.metallic = metallic;
  g.roughness = roughness;
  return g;
}

void add_ring_cameras(ToyScene& s, const ToyOptions& o, const Vec3& target, double distance) {
  for (int k = 0; k < o.views; ++k) {
    const double phi = 2.0 * kPi * k / o.views;
    const double elev = (45.0 + 10.0 * std::sin(3.0 * phi)) * kPi / 180.0;
    const Vec3 eye = target + distance * Vec3(std::cos(elev) * std::cos(phi), std::cos(elev) * std::sin(phi), std::sin(elev));
    s.cameras.push_back(look_at_camera(eye, target, Vec3::UnitZ(), 45.0, o.image_size, o.image_size));
  }
}

void render_ground_truth(ToyScene& s) {
  const DiskBVH bvh = DiskBVH::build(s.gaussians);
  PipelineOptions opts;
  opts.shade.background = s.background;
  StageFlags flags;
  for (const Camera& cam : s.cameras) {
    const RenderLayers r = render_view(s.gaussians, s.environment, shared_dfg(), bvh, cam, flags, opts);
    s.images.push_back(r.final);
    Image n(cam.width(), cam.height(), 3);
    LabelMap labels(cam.width(), cam.height());
    const RasterPlan plan = plan_splats(s.gaussians, cam, opts.raster);
    for (int y = 0; y < cam.height(); ++y)
      for (int x = 0; x < cam.width(); ++x) {
        if (r.gbuffer.valid_depth(x, y))
          for (int c = 0; c < 3; ++c) n.at(x, y, c) = r.gbuffer.normal.at(x, y, c);
        if (r.gbuffer.alpha.at(x, y) < 0.5) continue;
        double best = -1.0;
        std::uint16_t id = 0;
        for (const Fragment& f : plan.pixel(x, y))
          if (f.contribution > best) {
            best = f.contribution;
            id = s.object_ids[f.gaussian];
          }
        labels.at(x, y) = id;
      }
    s.normals.push_back(std::move(n));
    s.labels.push_back(std::move(labels));
  }
}

}  // namespace

Vec3 toy_sky(const Vec3& d) {
  const Vec3 c00(0.9, 0.25, 0.1), c10(0.1, 0.8, 0.25), c01(0.15, 0.3, 0.95), c11(0.95, 0.9, 0.3);
  const Vec3 u = d.normalized();
  const double a = 0.5 * (1.0 + u.x()), b = 0.5 * (1.0 + u.y());
  return (1 - a) * (1 - b) * c00 + a * (1 - b) * c10 + (1 - a) * b * c01 + a * b * c11;
}

std::vector<std::string> toy_scene_names() { return {"plane-mirror", "sphere-glossy", "occluder-box"}; }

ToyScene make_toy_scene(const std::string& name, const ToyOptions& o) {
  ToyScene s;
  s.name = name;
  s.environment = EnvironmentCubemap(o.env_resolution);
  s.environment.fill(toy_sky);
  const Gaussian mirror = material(0.9, Vec3(0.5, 0.5, 0.5), 0.9, 1.0, 0.05);

  if (name == "plane-mirror") {
    add_floor(s, 16, 1.0, 0.08, mirror, 1);
    add_ring_cameras(s, o, Vec3::Zero(), 3.0);
  } else if (name == "sphere-glossy") {
    add_floor(s, 16, 1.0, 0.08, material(0.9, Vec3(0.6, 0.55, 0.45), 0.5, 0.0, 0.8), 1);
    const Gaussian glossy = material(0.95, Vec3(0.5, 0.5, 0.5), 0.8, 1.0, 0.3);
    const int n = 400;
    const double radius = 0.5, golden = kPi * (3.0 - std::sqrt(5.0));
    const Vec3 center(0, 0, 0.6);
    for (int i = 0; i < n; ++i) {
      const double z = 1.0 - 2.0 * (i + 0.5) / n;
      const double r = std::sqrt(1.0 - z * z);
      const Vec3 dir(r * std::cos(golden * i), r * std::sin(golden * i), z);
      Gaussian g = glossy;
      const Gaussian d = disk(center + radius * dir, dir, 0.06);
      g.position = d.position;
      g.rotation = d.rotation;
      g.scale = d.scale;
      s.gaussians.push_back(g);
      s.object_ids.push_back(2);
    }
    add_ring_cameras(s, o, Vec3(0, 0, 0.4), 3.0);
  } else if (name == "occluder-box") {
    add_floor(s, 16, 1.0, 0.08, mirror, 1);
    const Gaussian matte = material(0.95, Vec3(0.8, 0.3, 0.2), 0.5, 0.0, 0.9);
    const double h = 0.3;  // half size
    const Vec3 center(0, 0, h);
    const int grid = 5;
    const double step = 2.0 * h / grid;
    const Vec3 normals[5] = {Vec3::UnitZ(), Vec3::UnitX(), -Vec3::UnitX(), Vec3::UnitY(), -Vec3::UnitY()};
    for (const Vec3& n : normals) {
      const Vec3 t1 = n.cross(std::abs(n.z()) > 0.5 ? Vec3::UnitX() : Vec3::UnitZ()).normalized();
      const Vec3 t2 = n.cross(t1);
      for (int j = 0; j < grid; ++j)
        for (int i = 0; i < grid; ++i) {
          const Vec3 p = center + h * n + (-h + (i + 0.5) * step) * t1 + (-h + (j + 0.5) * step) * t2;
          Gaussian g = matte;
          const Gaussian d = disk(p, n, 0.07);
          g.position = d.position;
          g.rotation = d.rotation;
          g.scale = d.scale;
          s.gaussians.push_back(g);
          s.object_ids.push_back(2);
        }
    }
    add_ring_cameras(s, o, Vec3::Zero(), 3.0);
  } else {
    throw InputError("unknown toy scene '" + name + "' (expected plane-mirror, sphere-glossy or occluder-box)");
  }
  render_ground_truth(s);
  return s;
}

GaussianSet perturbed_initialization(const GaussianSet& truth, double jitter, std::uint64_t seed) {
  GaussianSet out = truth;
  if (truth.empty()) return out;
  Vec3 lo = truth[0].position, hi = truth[0].position;
  for (const auto& g : truth) {
    lo = lo.cwiseMin(g.position);
    hi = hi.cwiseMax(g.position);
  }
  const double amp = jitter * (hi - lo).maxCoeff();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  const MaterialDefaults d;
  for (auto& g : out) {
    for (int k = 0; k < 3; ++k) g.position[k] += amp * uni(rng);
    g.opacity = d.opacity;
    g.diffuse = d.diffuse;
    g.albedo = d.albedo;
    g.metallic = d.metallic;
    g.roughness = d.roughness;
    g.residual = Vec3::Zero();
  }
  return out;
}

}  // namespace refsplat
