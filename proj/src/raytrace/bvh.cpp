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

#include "refsplat/raytrace.hpp"

#include "refsplat/detail/splat_eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace refsplat {

namespace {

constexpr std::uint32_t kLeafSize = 4;

bool hit_less(const RayHit& a, const RayHit& b) {
  if (a.t != b.t) return a.t < b.t;
  return a.gaussian < b.gaussian;
}

bool is_excluded(std::span<const std::uint32_t> excluded, std::uint32_t i) {
  return !excluded.empty() && std::binary_search(excluded.begin(), excluded.end(), i);
}

// Slab test against [t_min, inf).
bool ray_box(const Box3& box, const Vec3& o, const Vec3& d, double t_min) {
  double t0 = t_min, t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < box.min()[a] || o[a] > box.max()[a]) return false;
      continue;
    }
    const double inv = 1.0 / d[a];
    double lo = (box.min()[a] - o[a]) * inv;
    double hi = (box.max()[a] - o[a]) * inv;
    if (lo > hi) std::swap(lo, hi);
    t0 = std::max(t0, lo);
    t1 = std::min(t1, hi);
    if (t0 > t1) return false;
  }
  return true;
}

}  // namespace

Box3 proxy_box(const Gaussian& g, double support) {
  const DiskFrame f = disk_frame(g);
  const Vec3 eu = support * g.scale[0] * f.tangent_u;
  const Vec3 ev = support * g.scale[1] * f.tangent_v;
  Box3 box;
  box.extend(f.center + eu + ev);
  box.extend(f.center + eu - ev);
  box.extend(f.center - eu + ev);
  box.extend(f.center - eu - ev);
  const double pad = 1e-7 * (1.0 + box.diagonal().norm() + f.center.cwiseAbs().maxCoeff());
  box.min().array() -= pad;
  box.max().array() += pad;
  return box;
}

DiskBVH DiskBVH::build(std::span<const Gaussian> gaussians, const TraceOptions& opts) {
  DiskBVH bvh;
  bvh.support_ = opts.support;
  const auto n = static_cast<std::uint32_t>(gaussians.size());
  if (n == 0) return bvh;
  bvh.indices_.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) bvh.indices_[i] = i;
  std::vector<Vec3> centroids(n);
  for (std::uint32_t i = 0; i < n; ++i) centroids[i] = gaussians[i].position;
  bvh.nodes_.reserve(2 * (n / kLeafSize + 1));
  bvh.build_node(gaussians, centroids, 0, n);
  return bvh;
}

std::int32_t DiskBVH::build_node(std::span<const Gaussian> gaussians, std::vector<Vec3>& centroids,
                                 std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.emplace_back();
  Box3 box, cbox;
  for (std::uint32_t i = begin; i < end; ++i) {
    box.extend(proxy_box(gaussians[indices_[i]], support_));
    cbox.extend(centroids[indices_[i]]);
  }
  nodes_[id].box = box;
  if (end - begin <= kLeafSize) {
    nodes_[id].first = begin;
    nodes_[id].count = end - begin;
    return id;
  }
  int axis;
  cbox.diagonal().maxCoeff(&axis);
  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(indices_.begin() + begin, indices_.begin() + mid, indices_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     if (centroids[a][axis] != centroids[b][axis]) return centroids[a][axis] < centroids[b][axis];
                     return a < b;
                   });
  const std::int32_t left = build_node(gaussians, centroids, begin, mid);
  const std::int32_t right = build_node(gaussians, centroids, mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void DiskBVH::refit(std::span<const Gaussian> gaussians) {
  // Children always follow their parent in nodes_, so a reverse sweep is bottom-up.
  for (std::size_t k = nodes_.size(); k-- > 0;) {
    Node& node = nodes_[k];
    Box3 box;
    if (node.leaf()) {
      for (std::uint32_t i = node.first; i < node.first + node.count; ++i)
        box.extend(proxy_box(gaussians[indices_[i]], support_));
    } else {
      box.extend(nodes_[node.left].box);
      box.extend(nodes_[node.right].box);
    }
    node.box = box;
  }
}

std::optional<RayHit> intersect_disk(const Gaussian& g, std::uint32_t index, const Vec3& origin, const Vec3& dir,
                                     double t_min, const TraceOptions& opts) {
  const DiskFrame f = disk_frame(g);
  const detail::DiskHit h = detail::intersect_disk_plane(f, g.scale, origin, dir);
  if (!h.valid || !(h.t > t_min)) return std::nullopt;
  if (std::abs(h.u) > opts.support || std::abs(h.v) > opts.support) return std::nullopt;
  RayHit hit;
  hit.t = h.t;
  hit.gaussian = index;
  hit.falloff = std::exp(-0.5 * (h.u * h.u + h.v * h.v));
  hit.weight = g.opacity * hit.falloff;
  if (!(hit.weight >= opts.weight_cutoff)) return std::nullopt;
  return hit;
}

RayHitList intersect_ray(const DiskBVH& bvh, std::span<const Gaussian> gaussians, const Vec3& origin,
                         const Vec3& dir, double t_min, const TraceOptions& opts,
                         std::span<const std::uint32_t> excluded) {
  RayHitList hits;
  if (bvh.empty()) return hits;
  const auto& nodes = bvh.nodes();
  const auto& idx = bvh.indices();
  std::int32_t stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const DiskBVH::Node& node = nodes[stack[--top]];
    if (!ray_box(node.box, origin, dir, t_min)) continue;
    if (node.leaf()) {
      for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
        const std::uint32_t g = idx[i];
        if (is_excluded(excluded, g)) continue;
        if (auto h = intersect_disk(gaussians[g], g, origin, dir, t_min, opts)) hits.push_back(*h);
      }
    } else {
      stack[top++] = node.right;
      stack[top++] = node.left;
    }
  }
  std::sort(hits.begin(), hits.end(), hit_less);
  return hits;
}

RayHitList intersect_ray_brute_force(std::span<const Gaussian> gaussians, const Vec3& origin, const Vec3& dir,
                                     double t_min, const TraceOptions& opts,
                                     std::span<const std::uint32_t> excluded) {
  RayHitList hits;
  for (std::uint32_t g = 0; g < gaussians.size(); ++g) {
    if (is_excluded(excluded, g)) continue;
    if (auto h = intersect_disk(gaussians[g], g, origin, dir, t_min, opts)) hits.push_back(*h);
  }
  std::sort(hits.begin(), hits.end(), hit_less);
  return hits;
}

}  // namespace refsplat
