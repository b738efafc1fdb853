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

#include "refsplat/detail/splat_eval.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace refsplat {

using detail::kChannels;
using detail::SplatGeometry;

GBuffer::GBuffer(int w, int h)
    : width(w), height(h), diffuse(w, h, 3), albedo(w, h, 1), metallic(w, h, 1), roughness(w, h, 1),
      depth(w, h, 1), normal(w, h, 3), alpha(w, h, 1), depth_valid(static_cast<std::size_t>(w) * h, 0) {}

double ProjectedSplat::sigma_radius() const {
  Eigen::SelfAdjointEigenSolver<Mat2> es(covariance);
  return std::sqrt(es.eigenvalues().maxCoeff());
}

std::optional<ProjectedSplat> project_gaussian(const Gaussian& g, const Camera& cam, const RasterOptions& opts) {
  const SplatGeometry s = detail::make_geometry(g, cam);
  const double z = s.center_cam.z();
  if (!(z > opts.near_plane)) return std::nullopt;

  ProjectedSplat p;
  p.mean = s.center_pixel;
  p.depth = z;
  p.plane_normal = s.normal_cam;
  p.plane_offset = s.normal_cam.dot(s.center_cam);

  // Affine footprint: projection Jacobian applied to the scaled tangent axes.
  Eigen::Matrix<double, 2, 3> jac;
  jac << cam.fx() / z, 0, -cam.fx() * s.center_cam.x() / (z * z), 0, cam.fy() / z,
      -cam.fy() * s.center_cam.y() / (z * z);
  Eigen::Matrix<double, 3, 2> axes;
  axes.col(0) = cam.rotation() * s.frame.tangent_u * g.scale[0];
  axes.col(1) = cam.rotation() * s.frame.tangent_v * g.scale[1];
  const Mat2 m = jac * axes;
  Eigen::SelfAdjointEigenSolver<Mat2> es(m * m.transpose());
  const double floor2 = opts.min_screen_sigma * opts.min_screen_sigma;
  const Vec2 ev = es.eigenvalues().cwiseMax(floor2);
  p.covariance = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  p.conic = es.eigenvectors() * ev.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();

  // Bounds of the +-support square, unioned with the low-pass footprint.
  double xmin = p.mean.x() - opts.support * opts.min_screen_sigma;
  double xmax = p.mean.x() + opts.support * opts.min_screen_sigma;
  double ymin = p.mean.y() - opts.support * opts.min_screen_sigma;
  double ymax = p.mean.y() + opts.support * opts.min_screen_sigma;
  bool unbounded = false;
  for (int cu = -1; cu <= 1; cu += 2) {
    for (int cv = -1; cv <= 1; cv += 2) {
      const Vec3 corner = g.position + opts.support * (cu * g.scale[0] * s.frame.tangent_u +
                                                       cv * g.scale[1] * s.frame.tangent_v);
      const Vec3 c = cam.to_camera(corner);
      if (!(c.z() > opts.near_plane)) {
        unbounded = true;
        continue;
      }
      const double u = cam.fx() * c.x() / c.z() + cam.cx();
      const double v = cam.fy() * c.y() / c.z() + cam.cy();
      xmin = std::min(xmin, u);
      xmax = std::max(xmax, u);
      ymin = std::min(ymin, v);
      ymax = std::max(ymax, v);
    }
  }
  if (unbounded) {
    p.x0 = 0;
    p.y0 = 0;
    p.x1 = cam.width() - 1;
    p.y1 = cam.height() - 1;
  } else {
    p.x0 = std::max(0, static_cast<int>(std::ceil(xmin)));
    p.y0 = std::max(0, static_cast<int>(std::ceil(ymin)));
    p.x1 = std::min(cam.width() - 1, static_cast<int>(std::floor(xmax)));
    p.y1 = std::min(cam.height() - 1, static_cast<int>(std::floor(ymax)));
  }
  if (p.x0 > p.x1 || p.y0 > p.y1) return std::nullopt;
  return p;
}

namespace {

struct Candidate {
  double depth;
  std::uint32_t index;
  double weight;
  bool screen;
};

void write_pixel(GBuffer& out, int x, int y, const std::array<double, kChannels>& acc, bool depth_valid) {
  for (int c = 0; c < 3; ++c) out.diffuse.at(x, y, c) = acc[detail::kDiffuse + c];
  out.albedo.at(x, y) = acc[detail::kAlbedo];
  out.metallic.at(x, y) = acc[detail::kMetallic];
  out.roughness.at(x, y) = acc[detail::kRoughness];
  const double alpha = acc[detail::kAlpha];
  out.alpha.at(x, y) = alpha;
  out.depth_valid[static_cast<std::size_t>(y) * out.width + x] = depth_valid ? 1 : 0;
  out.depth.at(x, y) = depth_valid ? acc[detail::kDepth] / alpha : 0.0;
  const Vec3 n(acc[detail::kNormal], acc[detail::kNormal + 1], acc[detail::kNormal + 2]);
  const double len = n.norm();
  const Vec3 unit = len > 1e-12 ? Vec3(n / len) : Vec3::Zero();
  for (int c = 0; c < 3; ++c) out.normal.at(x, y, c) = unit[c];
}

}  // namespace

RasterPlan plan_splats(std::span<const Gaussian> gaussians, const Camera& cam, const RasterOptions& opts) {
  const int w = cam.width(), h = cam.height();
  const int ts = opts.tile_size;
  const int tiles_x = (w + ts - 1) / ts, tiles_y = (h + ts - 1) / ts;
  const std::size_t n = gaussians.size();

  std::vector<SplatGeometry> geom(n);
  std::vector<std::optional<ProjectedSplat>> proj(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    geom[i] = detail::make_geometry(gaussians[i], cam);
    proj[i] = project_gaussian(gaussians[i], cam, opts);
  }

  // Tile binning in Gaussian index order.
  std::vector<std::vector<std::uint32_t>> tiles(static_cast<std::size_t>(tiles_x) * tiles_y);
  for (std::size_t i = 0; i < n; ++i) {
    if (!proj[i]) continue;
    const auto& p = *proj[i];
    for (int ty = p.y0 / ts; ty <= p.y1 / ts; ++ty)
      for (int tx = p.x0 / ts; tx <= p.x1 / ts; ++tx) tiles[ty * tiles_x + tx].push_back(static_cast<std::uint32_t>(i));
  }

  std::vector<std::vector<Fragment>> per_pixel(static_cast<std::size_t>(w) * h);
  std::vector<std::uint8_t> depth_valid(static_cast<std::size_t>(w) * h, 0);

#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(tiles.size()); ++t) {
    const int tx = static_cast<int>(t % tiles_x), ty = static_cast<int>(t / tiles_x);
    const auto& list = tiles[t];
    std::vector<Candidate> cands;
    for (int y = ty * ts; y < std::min(h, (ty + 1) * ts); ++y) {
      for (int x = tx * ts; x < std::min(w, (tx + 1) * ts); ++x) {
        cands.clear();
        for (std::uint32_t gi : list) {
          const auto& p = *proj[gi];
          if (x < p.x0 || x > p.x1 || y < p.y0 || y > p.y1) continue;
          const auto s = detail::sample_candidate(geom[gi], cam, x, y, opts);
          if (s) cands.push_back({s->depth, gi, s->weight, s->screen});
        }
        std::sort(cands.begin(), cands.end(), [&](const Candidate& a, const Candidate& b) {
          if (a.depth != b.depth) return a.depth < b.depth;
          if (detail::content_less(gaussians[a.index], gaussians[b.index])) return true;
          if (detail::content_less(gaussians[b.index], gaussians[a.index])) return false;
          return a.index < b.index;
        });
        auto& frags = per_pixel[static_cast<std::size_t>(y) * w + x];
        double trans = 1.0;
        for (const auto& c : cands) {
          frags.push_back({c.index, static_cast<std::uint8_t>(c.screen ? 1 : 0), c.weight * trans});
          trans *= 1.0 - c.weight;
          if (trans < opts.transmittance_stop) break;
        }
        depth_valid[static_cast<std::size_t>(y) * w + x] = (1.0 - trans) > opts.depth_alpha_threshold ? 1 : 0;
      }
    }
  }

  RasterPlan plan;
  plan.width = w;
  plan.height = h;
  plan.depth_valid = std::move(depth_valid);
  plan.offsets.resize(per_pixel.size() + 1, 0);
  for (std::size_t p = 0; p < per_pixel.size(); ++p)
    plan.offsets[p + 1] = plan.offsets[p] + static_cast<std::uint32_t>(per_pixel[p].size());
  plan.fragments.reserve(plan.offsets.back());
  for (auto& v : per_pixel) plan.fragments.insert(plan.fragments.end(), v.begin(), v.end());
  return plan;
}

GBuffer composite_splats(std::span<const Gaussian> gaussians, const Camera& cam, const RasterPlan& plan,
                         const RasterOptions& opts) {
  const int w = plan.width, h = plan.height;
  GBuffer out(w, h);
  std::vector<SplatGeometry> geom(gaussians.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(gaussians.size()); ++i)
    geom[i] = detail::make_geometry(gaussians[i], cam);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < static_cast<std::ptrdiff_t>(w) * h; ++p) {
    const int x = static_cast<int>(p % w), y = static_cast<int>(p / w);
    std::array<double, kChannels> acc{};
    double trans = 1.0;
    for (const Fragment& f : plan.pixel(x, y)) {
      const auto& s = geom[f.gaussian];
      const auto sample = detail::sample_fixed(s, cam, x, y, f.screen_branch != 0, opts);
      const auto psi = detail::channel_values(gaussians[f.gaussian], s, sample);
      const double wt = sample.weight * trans;
      for (int c = 0; c < kChannels; ++c) acc[c] += psi[c] * wt;
      trans *= 1.0 - sample.weight;
    }
    write_pixel(out, x, y, acc, plan.depth_valid[p] != 0);
  }
  return out;
}

GBuffer splat_forward(std::span<const Gaussian> gaussians, const Camera& cam, const RasterOptions& opts,
                      RasterPlan* plan_out) {
  RasterPlan plan = plan_splats(gaussians, cam, opts);
  GBuffer g = composite_splats(gaussians, cam, plan, opts);
  if (plan_out) *plan_out = std::move(plan);
  return g;
}

namespace {

// Pulls per-fragment gradients (weight, depth, camera normal) back to the
// Gaussian's geometric parameters.
void geometry_backward(const Gaussian& g, const SplatGeometry& s, const Camera& cam, double px, double py,
                       bool screen, const RasterOptions& opts, double g_rho2, double g_depth, const Vec3& g_normal_cam,
                       GaussianGrad& out) {
  Vec3 g_n = s.facing * (cam.rotation().transpose() * g_normal_cam);
  Vec3 g_tu = Vec3::Zero(), g_tv = Vec3::Zero();
  if (screen) {
    const double sigma2 = opts.min_screen_sigma * opts.min_screen_sigma;
    const Vec3& pc = s.center_cam;
    const double gmx = -2.0 * (px - s.center_pixel.x()) / sigma2 * g_rho2;
    const double gmy = -2.0 * (py - s.center_pixel.y()) / sigma2 * g_rho2;
    const double z = pc.z();
    const Vec3 g_pc(gmx * cam.fx() / z, gmy * cam.fy() / z,
                    -gmx * cam.fx() * pc.x() / (z * z) - gmy * cam.fy() * pc.y() / (z * z) + g_depth);
    out.position += cam.rotation().transpose() * g_pc;
  } else {
    const Vec3 origin = cam.center();
    const Vec3 dir = cam.world_ray(px, py);
    const DiskFrame& f = s.frame;
    const double a = f.normal.dot(f.center - origin);
    const double b = f.normal.dot(dir);
    const double t = a / b;
    const Vec3 delta = origin + t * dir - f.center;
    const double u = f.tangent_u.dot(delta) / g.scale[0];
    const double v = f.tangent_v.dot(delta) / g.scale[1];
    const double g_u = 2.0 * u * g_rho2;
    const double g_v = 2.0 * v * g_rho2;
    g_tu = (g_u / g.scale[0]) * delta;
    g_tv = (g_v / g.scale[1]) * delta;
    out.scale[0] += -g_u * u / g.scale[0];
    out.scale[1] += -g_v * v / g.scale[1];
    const Vec3 g_delta = (g_u / g.scale[0]) * f.tangent_u + (g_v / g.scale[1]) * f.tangent_v;
    const double g_t = g_depth + g_delta.dot(dir);
    Vec3 g_p = -g_delta;
    const double g_a = g_t / b;
    const double g_b = -g_t * t / b;
    g_n += g_a * (f.center - origin) + g_b * dir;
    g_p += g_a * f.normal;
    out.position += g_p;
  }
  Mat3 g_r;
  g_r.col(0) = g_tu;
  g_r.col(1) = g_tv;
  g_r.col(2) = g_n;
  out.rotation += quat_matrix_backward(g.rotation, g_r);
}

}  // namespace

std::vector<GaussianGrad> splat_backward(std::span<const Gaussian> gaussians, const Camera& cam,
                                         const RasterPlan& plan, const GBufferGrad& upstream,
                                         const RasterOptions& opts) {
  const int w = plan.width, h = plan.height;
  const std::size_t n = gaussians.size();
  std::vector<SplatGeometry> geom(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
    geom[i] = detail::make_geometry(gaussians[i], cam);

  std::vector<GaussianGrad> frag_grads(plan.fragments.size());

#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t p = 0; p < static_cast<std::ptrdiff_t>(w) * h; ++p) {
    const int x = static_cast<int>(p % w), y = static_cast<int>(p / w);
    const auto frags = plan.pixel(x, y);
    if (frags.empty()) continue;
    const std::size_t base = plan.offsets[p];
    const std::size_t k = frags.size();

    std::vector<detail::FragmentSample> samples(k);
    std::vector<std::array<double, kChannels>> psi(k);
    std::vector<double> trans(k);
    std::array<double, kChannels> acc{};
    double tr = 1.0;
    for (std::size_t i = 0; i < k; ++i) {
      const auto& s = geom[frags[i].gaussian];
      samples[i] = detail::sample_fixed(s, cam, x, y, frags[i].screen_branch != 0, opts);
      psi[i] = detail::channel_values(gaussians[frags[i].gaussian], s, samples[i]);
      trans[i] = tr;
      for (int c = 0; c < kChannels; ++c) acc[c] += psi[i][c] * samples[i].weight * tr;
      tr *= 1.0 - samples[i].weight;
    }

    // Upstream gradient on the accumulated channel sums.
    std::array<double, kChannels> g{};
    for (int c = 0; c < 3; ++c) g[detail::kDiffuse + c] = upstream.diffuse.at(x, y, c);
    g[detail::kAlbedo] = upstream.albedo.at(x, y);
    g[detail::kMetallic] = upstream.metallic.at(x, y);
    g[detail::kRoughness] = upstream.roughness.at(x, y);
    g[detail::kAlpha] = upstream.alpha.at(x, y);
    const double alpha = acc[detail::kAlpha];
    if (plan.depth_valid[p]) {
      const double gd = upstream.depth.at(x, y);
      g[detail::kDepth] = gd / alpha;
      g[detail::kAlpha] += -gd * acc[detail::kDepth] / (alpha * alpha);
    }
    const Vec3 a(acc[detail::kNormal], acc[detail::kNormal + 1], acc[detail::kNormal + 2]);
    const double len = a.norm();
    if (len > 1e-12) {
      const Vec3 nrm = a / len;
      const Vec3 gn(upstream.normal.at(x, y, 0), upstream.normal.at(x, y, 1), upstream.normal.at(x, y, 2));
      const Vec3 ga = (gn - nrm * nrm.dot(gn)) / len;
      for (int c = 0; c < 3; ++c) g[detail::kNormal + c] = ga[c];
    }

    std::array<double, kChannels> back{};
    for (std::size_t ii = k; ii-- > 0;) {
      const double wi = samples[ii].weight;
      const double ti = trans[ii];
      double g_w = 0.0;
      std::array<double, kChannels> g_psi;
      for (int c = 0; c < kChannels; ++c) {
        g_w += g[c] * (psi[ii][c] - back[c]);
        g_psi[c] = g[c] * wi * ti;
      }
      g_w *= ti;
      for (int c = 0; c < kChannels; ++c) back[c] = psi[ii][c] * wi + (1.0 - wi) * back[c];

      const std::uint32_t gi = frags[ii].gaussian;
      const Gaussian& gs = gaussians[gi];
      GaussianGrad& out = frag_grads[base + ii];
      out.diffuse = Vec3(g_psi[0], g_psi[1], g_psi[2]);
      out.albedo = g_psi[detail::kAlbedo];
      out.metallic = g_psi[detail::kMetallic];
      out.roughness = g_psi[detail::kRoughness];
      const double falloff = std::exp(-0.5 * samples[ii].rho2);
      out.opacity = g_w * falloff;
      const double g_rho2 = -0.5 * wi * g_w;
      const Vec3 g_ncam(g_psi[detail::kNormal], g_psi[detail::kNormal + 1], g_psi[detail::kNormal + 2]);
      geometry_backward(gs, geom[gi], cam, x, y, frags[ii].screen_branch != 0, opts, g_rho2, g_psi[detail::kDepth],
                        g_ncam, out);
    }
  }

  // Deterministic gather: each Gaussian sums its fragments in pixel order.
  std::vector<std::uint32_t> counts(n + 1, 0);
  for (const auto& f : plan.fragments) ++counts[f.gaussian + 1];
  for (std::size_t i = 0; i < n; ++i) counts[i + 1] += counts[i];
  std::vector<std::uint32_t> order(plan.fragments.size());
  {
    std::vector<std::uint32_t> cursor(counts.begin(), counts.end() - 1);
    for (std::size_t fi = 0; fi < plan.fragments.size(); ++fi)
      order[cursor[plan.fragments[fi].gaussian]++] = static_cast<std::uint32_t>(fi);
  }
  std::vector<GaussianGrad> grads(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
    for (std::uint32_t j = counts[i]; j < counts[i + 1]; ++j) grads[i] += frag_grads[order[j]];
  return grads;
}

}  // namespace refsplat
