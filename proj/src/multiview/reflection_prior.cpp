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

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <unordered_map>

namespace refsplat {

namespace {

double luminance(const Image& img, int x, int y) {
  return 0.2126 * img.at(x, y, 0) + 0.7152 * img.at(x, y, 1) + 0.0722 * img.at(x, y, 2);
}

bool depth_co_visible(const Camera& ci, const Camera& cj, const Image& depth_j, const Vec3& x_cam_i,
                      const WarpOptions& opts) {
  Mat3 r;
  Vec3 t;
  relative_pose(ci, cj, r, t);
  const Vec3 xj = r * x_cam_i + t;
  if (!(xj.z() > 0.0)) return false;
  const int u = static_cast<int>(std::lround(cj.fx() * xj.x() / xj.z() + cj.cx()));
  const int v = static_cast<int>(std::lround(cj.fy() * xj.y() / xj.z() + cj.cy()));
  if (u < 0 || v < 0 || u >= depth_j.width || v >= depth_j.height) return false;
  const double d = depth_j.at(u, v);
  if (!(d > 0.0)) return false;
  return std::abs(d - xj.z()) <= opts.occlusion_tolerance * xj.z();
}

struct CellKey {
  std::int64_t x, y, z;
  bool operator==(const CellKey& o) const { return x == o.x && y == o.y && z == o.z; }
};

struct CellHash {
  std::size_t operator()(const CellKey& k) const {
    std::size_t h = std::hash<std::int64_t>{}(k.x);
    h = h * 1000003u ^ std::hash<std::int64_t>{}(k.y);
    h = h * 1000003u ^ std::hash<std::int64_t>{}(k.z);
    return h;
  }
};

}  // namespace

Image luminance_normalize(const Image& rgb, int window, double floor, const Image* mask) {
  const int w = rgb.width, h = rgb.height, r = window / 2;
  // Summed-area tables of (masked) luminance and of the pixel count.
  const std::size_t stride = static_cast<std::size_t>(w) + 1;
  std::vector<double> sat(stride * (h + 1), 0.0), cnt(stride * (h + 1), 0.0);
  for (int y = 0; y < h; ++y) {
    double row = 0.0, row_n = 0.0;
    for (int x = 0; x < w; ++x) {
      if (!mask || mask->at(x, y) > 0.0) {
        row += luminance(rgb, x, y);
        row_n += 1.0;
      }
      sat[(y + 1) * stride + x + 1] = sat[y * stride + x + 1] + row;
      cnt[(y + 1) * stride + x + 1] = cnt[y * stride + x + 1] + row_n;
    }
  }
  auto box = [&](const std::vector<double>& t, int x0, int y0, int x1, int y1) {
    return t[(y1 + 1) * stride + x1 + 1] - t[y0 * stride + x1 + 1] - t[(y1 + 1) * stride + x0] + t[y0 * stride + x0];
  };
  Image out(w, h, rgb.channels);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int x0 = std::max(0, x - r), x1 = std::min(w - 1, x + r);
      const int y0 = std::max(0, y - r), y1 = std::min(h - 1, y + r);
      const double n = box(cnt, x0, y0, x1, y1);
      const double mean = n > 0.0 ? box(sat, x0, y0, x1, y1) / n : 0.0;
      const double inv = 1.0 / std::max(mean, floor);
      for (int c = 0; c < rgb.channels; ++c) out.at(x, y, c) = rgb.at(x, y, c) * inv;
    }
  return out;
}

Image reflection_score(const PriorView& reference, std::span<const PriorView> neighbors, const ScoreOptions& opts) {
  const Camera& ci = *reference.camera;
  const Image ref = luminance_normalize(*reference.image, 31, 1e-3, reference.depth);
  std::vector<Image> nb;
  nb.reserve(neighbors.size());
  for (const auto& v : neighbors) nb.push_back(luminance_normalize(*v.image, 31, 1e-3, v.depth));
  const int w = ref.width, h = ref.height;
  const std::size_t views = neighbors.size() + 1;
  Image score(w, h, 1);

#pragma omp parallel for schedule(dynamic, 1)
  for (int y = 0; y < h; ++y) {
    std::vector<std::vector<double>> patches(views);
    for (int x = 0; x < w; ++x) {
      const PatchGrid patch{x, y, opts.patch_half};
      const double depth = reference.depth->at(x, y);
      if (!patch.inside(w, h) || !(depth > 0.0)) continue;
      const Vec3 n(reference.normal->at(x, y, 0), reference.normal->at(x, y, 1), reference.normal->at(x, y, 2));
      const Vec3 xc = depth * ci.camera_ray(x, y);
      bool ok = true;
      for (std::size_t m = 0; m < neighbors.size() && ok; ++m) {
        const auto hmat = pixel_homography(ci, *neighbors[m].camera, x, y, depth, n, opts.warp);
        ok = hmat && depth_co_visible(ci, *neighbors[m].camera, *neighbors[m].depth, xc, opts.warp) &&
             warp_patch(nb[m], *hmat, patch, patches[m + 1]);
      }
      if (!ok) continue;
      patches[0].clear();
      for (int dy = -patch.half; dy <= patch.half; ++dy)
        for (int dx = -patch.half; dx <= patch.half; ++dx)
          for (int c = 0; c < 3; ++c) patches[0].push_back(ref.at(x + dx, y + dy, c));

      double total = 0.0;
      for (int k = 0; k < patch.count(); ++k) {
        double pixel_std = 0.0;
        for (int c = 0; c < 3; ++c) {
          double mean = 0.0;
          for (std::size_t v = 0; v < views; ++v) mean += patches[v][k * 3 + c];
          mean /= views;
          double var = 0.0;
          for (std::size_t v = 0; v < views; ++v) {
            const double d = patches[v][k * 3 + c] - mean;
            var += d * d;
          }
          pixel_std += std::sqrt(var / views);
        }
        total += pixel_std / 3.0;
      }
      score.at(x, y) = total / patch.count();
    }
  }
  return score;
}

std::vector<Image> fuse_scores(std::span<const Image> scores, std::span<const Image> depths,
                               std::span<const Camera> cameras, const FuseOptions& opts) {
  struct Point {
    Vec3 p;
    double score;
  };
  std::vector<Point> cloud;
  std::vector<std::vector<std::int64_t>> point_of(scores.size());
  for (std::size_t v = 0; v < scores.size(); ++v) {
    const Image& d = depths[v];
    point_of[v].assign(d.pixel_count(), -1);
    for (int y = 0; y < d.height; ++y)
      for (int x = 0; x < d.width; ++x) {
        const double z = d.at(x, y);
        if (!(z > 0.0) || !std::isfinite(z)) continue;
        point_of[v][static_cast<std::size_t>(y) * d.width + x] = static_cast<std::int64_t>(cloud.size());
        cloud.push_back({cameras[v].to_world(z * cameras[v].camera_ray(x, y)), scores[v].at(x, y)});
      }
  }

  const double cell = opts.radius > 0.0 ? opts.radius : 1e-9;
  auto key_of = [cell](const Vec3& p) {
    return CellKey{static_cast<std::int64_t>(std::floor(p.x() / cell)), static_cast<std::int64_t>(std::floor(p.y() / cell)),
                   static_cast<std::int64_t>(std::floor(p.z() / cell))};
  };
  std::unordered_map<CellKey, std::vector<std::uint32_t>, CellHash> grid;
  for (std::size_t i = 0; i < cloud.size(); ++i) grid[key_of(cloud[i].p)].push_back(static_cast<std::uint32_t>(i));

  std::vector<double> fused(cloud.size(), 0.0);
  const double r2 = opts.radius * opts.radius;
  const std::size_t k = static_cast<std::size_t>(std::max(1, opts.top_k));
#pragma omp parallel for schedule(dynamic, 256)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(cloud.size()); ++i) {
    const CellKey c = key_of(cloud[i].p);
    std::vector<double> found;
    for (std::int64_t dz = -1; dz <= 1; ++dz)
      for (std::int64_t dy = -1; dy <= 1; ++dy)
        for (std::int64_t dx = -1; dx <= 1; ++dx) {
          const auto it = grid.find(CellKey{c.x + dx, c.y + dy, c.z + dz});
          if (it == grid.end()) continue;
          for (std::uint32_t j : it->second)
            if ((cloud[j].p - cloud[i].p).squaredNorm() <= r2) found.push_back(cloud[j].score);
        }
    if (found.empty()) continue;
    std::sort(found.begin(), found.end(), std::greater<>());
    const std::size_t m = std::min(k, found.size());
    double sum = 0.0;
    for (std::size_t j = 0; j < m; ++j) sum += found[j];
    fused[i] = sum / m;
  }

  std::vector<Image> out;
  out.reserve(scores.size());
  for (std::size_t v = 0; v < scores.size(); ++v) {
    Image img(scores[v].width, scores[v].height, 1);
    for (std::size_t p = 0; p < img.pixel_count(); ++p)
      if (point_of[v][p] >= 0) img.data[p] = fused[point_of[v][p]];
    out.push_back(std::move(img));
  }
  return out;
}

std::vector<ReflectionPrior> derive_gate_and_target(std::span<const Image> w_ref, std::span<const LabelMap> labels,
                                                    std::span<const Image> metallic, const GateOptions& opts,
                                                    std::vector<RegionStat>* stats) {
  std::vector<ReflectionPrior> out(w_ref.size());
  for (std::size_t v = 0; v < w_ref.size(); ++v) {
    out[v].w_ref = w_ref[v];
    out[v].gate.assign(w_ref[v].pixel_count(), 0);
    out[v].target = Image(w_ref[v].width, w_ref[v].height, 1);
  }
  if (labels.size() != w_ref.size()) {
    spdlog::warn("reflection prior: region labels missing, reflection loss disabled");
    if (stats) stats->clear();
    return out;
  }

  std::map<std::uint16_t, RegionStat> regions;
  for (std::size_t v = 0; v < w_ref.size(); ++v) {
    const LabelMap& lm = labels[v];
    for (std::size_t p = 0; p < lm.labels.size(); ++p) {
      const std::uint16_t l = lm.labels[p];
      if (l == 0) continue;
      RegionStat& r = regions[l];
      r.label = l;
      ++r.pixels;
      r.mean_w_ref += w_ref[v].data[p];
      r.mean_metallic += metallic[v].data[p];
    }
  }
  for (auto& [l, r] : regions) {
    r.mean_w_ref /= r.pixels;
    r.mean_metallic /= r.pixels;
    r.gated = r.mean_w_ref > opts.threshold;
    r.target = std::clamp(r.mean_metallic + opts.delta, opts.floor, 1.0);
  }
  for (std::size_t v = 0; v < w_ref.size(); ++v) {
    const LabelMap& lm = labels[v];
    for (std::size_t p = 0; p < lm.labels.size(); ++p) {
      const auto it = regions.find(lm.labels[p]);
      if (it == regions.end()) continue;
      out[v].gate[p] = it->second.gated ? 1 : 0;
      out[v].target.data[p] = it->second.target;
    }
  }
  if (stats) {
    stats->clear();
    for (const auto& [l, r] : regions) stats->push_back(r);
  }
  return out;
}

double reflection_loss(const Image& metallic, const ReflectionPrior& prior, Image* grad_metallic) {
  const std::size_t n = metallic.pixel_count();
  if (n == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    if (!prior.gate[p]) continue;
    const double gap = prior.target.data[p] - metallic.data[p];
    if (!(gap > 0.0)) continue;
    const double w = prior.w_ref.data[p];
    sum += w * gap;
    if (grad_metallic) grad_metallic->data[p] -= w / n;
  }
  return sum / n;
}

}  // namespace refsplat
