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
#include "refsplat/reference.hpp"
#include "test_util.hpp"

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>
#include <omp.h>

#include <algorithm>
#include <random>

namespace refsplat {
namespace {

using testing::make_disk;
using testing::random_disks;

Camera axis_camera(int size = 64, double f = 100.0) {
  return Camera(f, f, 0.5 * (size - 1), 0.5 * (size - 1), Mat3::Identity(), Vec3::Zero(), size, size);
}

Camera oblique_camera(int size = 16) {
  return look_at_camera(Vec3(0.3, -2.2, 1.6), Vec3::Zero(), Vec3::UnitZ(), 50.0, size, size);
}

TEST(Projection, OnAxisDiskMapsToPrincipalPoint) {
  const Camera cam = axis_camera();
  const auto p = project_gaussian(make_disk(Vec3(0, 0, 1), -Vec3::UnitZ(), 0.1), cam);
  ASSERT_TRUE(p.has_value());
  EXPECT_NEAR(p->mean.x(), cam.cx(), 1e-12);
  EXPECT_NEAR(p->mean.y(), cam.cy(), 1e-12);
  EXPECT_NEAR(p->depth, 1.0, 1e-12);
}

TEST(Projection, BehindCameraIsCulled) {
  EXPECT_FALSE(project_gaussian(make_disk(Vec3(0, 0, -1), Vec3::UnitZ(), 0.1), axis_camera()).has_value());
}

TEST(Projection, OneSigmaRadiusBySimilarTriangles) {
  const auto p = project_gaussian(make_disk(Vec3(0, 0, 1), -Vec3::UnitZ(), 0.1), axis_camera());
  ASSERT_TRUE(p.has_value());
  EXPECT_NEAR(p->sigma_radius(), 10.0, 1e-9);
  const Eigen::SelfAdjointEigenSolver<Mat2> es(p->conic);
  EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
}

TEST(Forward, SingleFullWeightFragment) {
  Gaussian g = make_disk(Vec3(0, 0, 1), -Vec3::UnitZ(), 0.1, 1.0);
  g.metallic = 0.7;
  const GBuffer gb = splat_forward(GaussianSet{g}, axis_camera(65));
  EXPECT_NEAR(gb.metallic.at(32, 32), 0.7, 1e-12);
  EXPECT_NEAR(gb.alpha.at(32, 32), 1.0, 1e-12);
}

TEST(Forward, TwoHalfWeightsComposite) {
  GaussianSet gs{make_disk(Vec3(0, 0, 1), -Vec3::UnitZ(), 0.1, 0.5), make_disk(Vec3(0, 0, 2), -Vec3::UnitZ(), 0.2, 0.5)};
  for (auto& g : gs) g.metallic = 1.0;
  const GBuffer gb = splat_forward(gs, axis_camera(65));
  EXPECT_NEAR(gb.metallic.at(32, 32), 0.75, 1e-12);
  EXPECT_NEAR(gb.alpha.at(32, 32), 0.75, 1e-12);
}

TEST(Forward, EmptySceneIsZero) {
  const GBuffer gb = splat_forward(GaussianSet{}, axis_camera(8));
  for (double v : gb.alpha.data) EXPECT_EQ(v, 0.0);
  for (double v : gb.diffuse.data) EXPECT_EQ(v, 0.0);
}

TEST(Forward, BufferInvariants) {
  const GaussianSet gs = random_disks(60, 5, 0.6);
  const GBuffer gb = splat_forward(gs, oblique_camera(32));
  for (std::size_t p = 0; p < gb.alpha.pixel_count(); ++p) {
    const double a = gb.alpha.data[p];
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 1.0);
    for (const Image* m : {&gb.albedo, &gb.metallic, &gb.roughness}) {
      EXPECT_GE(m->data[p], -1e-15);
      EXPECT_LE(m->data[p], a + 1e-12);
    }
    const double len = Vec3(gb.normal.data[3 * p], gb.normal.data[3 * p + 1], gb.normal.data[3 * p + 2]).norm();
    EXPECT_TRUE(len == 0.0 || std::abs(len - 1.0) <= 1e-4);
  }
}

TEST(Forward, WeightsIdenticalAcrossChannels) {
  GaussianSet gs = random_disks(40, 6, 0.6);
  for (auto& g : gs) {
    g.diffuse = Vec3::Ones();
    g.albedo = g.metallic = g.roughness = 1.0;
  }
  const GBuffer gb = splat_forward(gs, oblique_camera(24));
  for (std::size_t p = 0; p < gb.alpha.pixel_count(); ++p) {
    EXPECT_NEAR(gb.metallic.data[p], gb.alpha.data[p], 1e-14);
    EXPECT_NEAR(gb.diffuse.data[3 * p + 1], gb.alpha.data[p], 1e-14);
  }
}

TEST(Forward, ZeroOpacityAndMonotoneAlpha) {
  GaussianSet gs = random_disks(30, 7, 0.6);
  const Camera cam = oblique_camera(24);
  GaussianSet zero = gs;
  for (auto& g : zero) g.opacity = 0.0;
  for (double v : splat_forward(zero, cam).alpha.data) EXPECT_EQ(v, 0.0);

  const GBuffer base = splat_forward(gs, cam);
  for (std::size_t i = 0; i < gs.size(); i += 7) {
    GaussianSet up = gs;
    up[i].opacity = std::min(1.0, up[i].opacity + 0.2);
    const GBuffer gb = splat_forward(up, cam);
    for (std::size_t p = 0; p < gb.alpha.pixel_count(); ++p) EXPECT_GE(gb.alpha.data[p], base.alpha.data[p] - 1e-12);
  }
}

TEST(Forward, PermutationInvariantBitForBit) {
  GaussianSet gs = random_disks(50, 8, 0.6);
  const Camera cam = oblique_camera(24);
  const GBuffer a = splat_forward(gs, cam);
  std::mt19937_64 rng(1);
  std::shuffle(gs.begin(), gs.end(), rng);
  const GBuffer b = splat_forward(gs, cam);
  EXPECT_EQ(a.diffuse.data, b.diffuse.data);
  EXPECT_EQ(a.depth.data, b.depth.data);
  EXPECT_EQ(a.normal.data, b.normal.data);
  EXPECT_EQ(a.alpha.data, b.alpha.data);
}

TEST(Forward, MatchesSerialReference) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const GaussianSet gs = random_disks(80, 100 + seed, 0.7);
    const Camera cam = oblique_camera(40);
    RasterPlan fast_plan, ref_plan;
    const GBuffer fast = splat_forward(gs, cam, {}, &fast_plan);
    const GBuffer ref = reference::splat_forward(gs, cam, {}, &ref_plan);
    EXPECT_EQ(fast.diffuse.data, ref.diffuse.data);
    EXPECT_EQ(fast.depth.data, ref.depth.data);
    EXPECT_EQ(fast.normal.data, ref.normal.data);
    EXPECT_EQ(fast.alpha.data, ref.alpha.data);
    EXPECT_EQ(fast_plan.offsets, ref_plan.offsets);
  }
}

TEST(Forward, ThreadCountDoesNotChangeBits) {
  const GaussianSet gs = random_disks(80, 9, 0.7);
  const Camera cam = oblique_camera(40);
  omp_set_num_threads(1);
  RasterPlan plan;
  const GBuffer a = splat_forward(gs, cam, {}, &plan);
  GBufferGrad up(40, 40);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n;
  for (Image* im : {&up.diffuse, &up.metallic, &up.depth, &up.normal, &up.alpha})
    for (double& v : im->data) v = n(rng);
  const auto ga = splat_backward(gs, cam, plan, up);
  omp_set_num_threads(4);
  const GBuffer b = splat_forward(gs, cam);
  const auto gb = splat_backward(gs, cam, plan, up);
  omp_set_num_threads(omp_get_num_procs());
  EXPECT_EQ(a.diffuse.data, b.diffuse.data);
  for (std::size_t i = 0; i < ga.size(); ++i) {
    EXPECT_EQ(ga[i].position, gb[i].position);
    EXPECT_EQ(ga[i].opacity, gb[i].opacity);
    EXPECT_EQ(ga[i].rotation, gb[i].rotation);
  }
}

TEST(Backward, ZeroUpstreamGivesZeroGradients) {
  const GaussianSet gs = random_disks(10, 10, 0.6);
  const Camera cam = oblique_camera();
  RasterPlan plan;
  splat_forward(gs, cam, {}, &plan);
  for (const auto& g : splat_backward(gs, cam, plan, GBufferGrad(16, 16))) {
    EXPECT_EQ(g.position.norm(), 0.0);
    EXPECT_EQ(g.opacity, 0.0);
    EXPECT_EQ(g.metallic, 0.0);
  }
}

TEST(Backward, MetallicGradientIsContribution) {
  const Gaussian g = make_disk(Vec3(0.01, 0.02, 1), -Vec3::UnitZ(), 0.1, 0.6);
  const Camera cam = axis_camera(33);
  RasterPlan plan;
  splat_forward(GaussianSet{g}, cam, {}, &plan);
  GBufferGrad up(33, 33);
  up.metallic.at(16, 16) = 1.0;
  const auto grads = splat_backward(GaussianSet{g}, cam, plan, up);
  ASSERT_EQ(plan.pixel(16, 16).size(), 1u);
  EXPECT_NEAR(grads[0].metallic, plan.pixel(16, 16)[0].contribution, 1e-14);
}

// Finite differences through a frozen plan on activated fields.
TEST(Backward, MatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    GaussianSet gs = random_disks(6, 200 + seed, 0.4);
    for (auto& g : gs) g.scale *= 4.0;
    const Camera cam = oblique_camera(16);
    RasterPlan plan;
    splat_forward(gs, cam, {}, &plan);
    GBufferGrad up(16, 16);
    for (Image* im : {&up.diffuse, &up.albedo, &up.metallic, &up.roughness, &up.depth, &up.normal, &up.alpha})
      for (double& v : im->data) v = n(rng);
    auto loss = [&](const GaussianSet& g) {
      const GBuffer gb = composite_splats(g, cam, plan);
      double s = 0.0;
      const Image* a[] = {&gb.diffuse, &gb.albedo, &gb.metallic, &gb.roughness, &gb.depth, &gb.normal, &gb.alpha};
      const Image* b[] = {&up.diffuse, &up.albedo, &up.metallic, &up.roughness, &up.depth, &up.normal, &up.alpha};
      for (int k = 0; k < 7; ++k)
        for (std::size_t i = 0; i < a[k]->data.size(); ++i) s += a[k]->data[i] * b[k]->data[i];
      return s;
    };
    const auto grads = splat_backward(gs, cam, plan, up);
    const double h = 1e-6;
    auto check = [&](double analytic, auto&& field) {
      GaussianSet p = gs, m = gs;
      field(p) += h;
      field(m) -= h;
      const double fd = (loss(p) - loss(m)) / (2 * h);
      const double scale = std::max(std::abs(fd), std::abs(analytic));
      if (scale > 1e-6) EXPECT_LE(std::abs(fd - analytic) / scale, 1e-3);
    };
    for (std::size_t i = 0; i < gs.size(); ++i) {
      for (int k = 0; k < 3; ++k) {
        check(grads[i].position[k], [&](GaussianSet& g) -> double& { return g[i].position[k]; });
        check(grads[i].diffuse[k], [&](GaussianSet& g) -> double& { return g[i].diffuse[k]; });
      }
      for (int k = 0; k < 4; ++k) check(grads[i].rotation[k], [&](GaussianSet& g) -> double& { return g[i].rotation[k]; });
      for (int k = 0; k < 2; ++k) check(grads[i].scale[k], [&](GaussianSet& g) -> double& { return g[i].scale[k]; });
      check(grads[i].opacity, [&](GaussianSet& g) -> double& { return g[i].opacity; });
      check(grads[i].albedo, [&](GaussianSet& g) -> double& { return g[i].albedo; });
      check(grads[i].metallic, [&](GaussianSet& g) -> double& { return g[i].metallic; });
      check(grads[i].roughness, [&](GaussianSet& g) -> double& { return g[i].roughness; });
    }
  }
}

Image plane_depth(const Camera& cam, const Vec3& n, double offset) {
  // Depth of the plane n . X = offset (camera space) along each pixel ray.
  Image d(cam.width(), cam.height(), 1);
  for (int y = 0; y < cam.height(); ++y)
    for (int x = 0; x < cam.width(); ++x) d.at(x, y) = offset / n.dot(cam.camera_ray(x, y));
  return d;
}

TEST(DepthNormals, FrontoParallelPlane) {
  const Camera cam = axis_camera(16);
  const Image n = render_normal_from_depth(Image(16, 16, 1, 2.0), cam);
  for (int y = 1; y < 15; ++y)
    for (int x = 1; x < 15; ++x) {
      EXPECT_NEAR(n.at(x, y, 0), 0.0, 1e-12);
      EXPECT_NEAR(n.at(x, y, 1), 0.0, 1e-12);
      EXPECT_NEAR(n.at(x, y, 2), -1.0, 1e-12);
    }
}

TEST(DepthNormals, InvalidNeighborGivesZero) {
  Image d(8, 8, 1, 1.0);
  d.at(4, 3) = std::numeric_limits<double>::quiet_NaN();
  const Image n = render_normal_from_depth(d, axis_camera(8));
  EXPECT_EQ(n.at(4, 4, 2), 0.0);
  EXPECT_EQ(n.at(4, 3, 2), 0.0);
  EXPECT_NE(n.at(1, 6, 2), 0.0);
}

TEST(DepthNormals, SlantedPlaneWithinHalfDegree) {
  const Camera cam = axis_camera(32, 40.0);
  const Vec3 normal = Vec3(0, std::sin(kPi / 4), -std::cos(kPi / 4));
  const Image n = render_normal_from_depth(plane_depth(cam, normal, normal.dot(Vec3(0, 0, 3))), cam);
  for (int y = 1; y < 31; ++y)
    for (int x = 1; x < 31; ++x) {
      const Vec3 v(n.at(x, y, 0), n.at(x, y, 1), n.at(x, y, 2));
      EXPECT_LT(std::acos(std::clamp(v.dot(normal), -1.0, 1.0)) * 180.0 / kPi, 0.5);
    }
}

TEST(DepthNormals, BackwardMatchesFiniteDifferences) {
  const Camera cam = axis_camera(10, 12.0);
  Image d(10, 10, 1);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x) d.at(x, y) = 2.0 + 0.1 * x - 0.05 * y + 0.02 * u(rng);
  Image g(10, 10, 3);
  for (double& v : g.data) v = u(rng) - 0.5;
  const Image analytic = render_normal_from_depth_backward(d, cam, g);
  auto loss = [&](const Image& depth) {
    const Image n = render_normal_from_depth(depth, cam);
    double s = 0.0;
    for (std::size_t i = 0; i < n.data.size(); ++i) s += n.data[i] * g.data[i];
    return s;
  };
  for (std::size_t i = 0; i < d.data.size(); ++i) {
    Image p = d, m = d;
    p.data[i] += 1e-6;
    m.data[i] -= 1e-6;
    const double fd = (loss(p) - loss(m)) / 2e-6;
    EXPECT_NEAR(analytic.data[i], fd, 1e-6 + 1e-4 * std::abs(fd));
  }
}

}  // namespace
}  // namespace refsplat
