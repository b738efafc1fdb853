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
#include "refsplat/rasterizer.hpp"
#include "refsplat/scene.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace refsplat {

// ---------------------------------------------------------------------------
// Plane-induced homographies and patch warping.

struct WarpOptions {
  double min_incidence = 0.05;        ///< |n . ray| below this marks the plane degenerate
  double occlusion_tolerance = 0.02;  ///< relative depth disagreement that rejects a pair
};

/// Relative pose taking camera-i coordinates to camera-j coordinates.
void relative_pose(const Camera& ci, const Camera& cj, Mat3& r_ij, Vec3& t_ij);

/// Homography of the plane n . X = -plane_distance (camera-i coordinates).
Mat3 homography(const Camera& ci, const Camera& cj, double plane_distance, const Vec3& normal_cam_i);

/// Tangent-plane homography at pixel (u, v) of view i with the given depth and
/// camera-space normal; nullopt when the plane is degenerate.
std::optional<Mat3> pixel_homography(const Camera& ci, const Camera& cj, double u, double v, double depth,
                                     const Vec3& normal_cam_i, const WarpOptions& opts = {});

Vec2 apply_homography(const Mat3& h, double u, double v);

/// Square patch of side 2*half+1 centered on an integer pixel.
struct PatchGrid {
  int cx = 0;
  int cy = 0;
  int half = 3;
  int side() const { return 2 * half + 1; }
  int count() const { return side() * side(); }
  bool inside(int width, int height) const {
    return cx - half >= 0 && cy - half >= 0 && cx + half < width && cy + half < height;
  }
};

/// Bilinear taps of one sample; all four indices are in bounds.
struct BilinearTap {
  std::array<std::uint32_t, 4> index{};  ///< (x0,y0), (x1,y0), (x0,y1), (x1,y1)
  std::array<double, 4> weight{};
  double fx = 0, fy = 0;

  /// Interpolated channel c, in lerp form so constant maps come back exactly.
  double sample(const Image& img, int c) const {
    auto at = [&](int i) { return img.data[static_cast<std::size_t>(index[i]) * img.channels + c]; };
    const double top = at(0) + fx * (at(1) - at(0));
    const double bot = at(2) + fx * (at(3) - at(2));
    return top + fy * (bot - top);
  }
};

/// nullopt when (x, y) falls outside [0, w-1] x [0, h-1].
std::optional<BilinearTap> bilinear_tap(int width, int height, double x, double y);

/// Samples `src` at the H-warped positions of the patch pixels, row-major,
/// channel-interleaved. Returns false when any tap leaves the image.
bool warp_patch(const Image& src, const Mat3& h, const PatchGrid& patch, std::vector<double>& out);

// ---------------------------------------------------------------------------
// Multi-view material consistency.

struct MvOptions {
  int patch_half = 3;  ///< 7x7 patches
  int stride = 1;      ///< reference patch centers every `stride` pixels
  WarpOptions warp;
};

struct MvView {
  const Camera* camera = nullptr;
  const GBuffer* gbuffer = nullptr;
};

/// One reference pixel matched to a bilinear location in a source view.
struct MvSample {
  std::uint32_t ref_pixel = 0;
  std::uint32_t source = 0;  ///< index into the source list
  BilinearTap tap;
};

/// Frozen warp structure: which samples are compared. Depth and normal enter
/// only here, so the loss is a smooth function of the material maps.
struct MvPlan {
  std::vector<MvSample> samples;
  std::size_t valid_pairs = 0;  ///< (patch, source) pairs that survived all checks
};

MvPlan plan_mv(const MvView& reference, std::span<const MvView> sources, const MvOptions& opts = {});

struct MvLoss {
  double total = 0;  ///< mean of the three per-type terms
  double diffuse = 0;
  double roughness = 0;
  double metallic = 0;
};

/// Evaluates the loss on the premultiplied material maps. When `grads` is
/// non-null it must hold 1 + sources.size() buffers (reference first) and the
/// gradient is added into their diffuse/roughness/metallic channels.
MvLoss mv_loss(const MvPlan& plan, const GBuffer& reference, std::span<const GBuffer* const> sources,
               std::span<GBufferGrad*> grads = {});

/// Indices of the k cameras with the nearest optical centers to `target`, excluding itself.
std::vector<std::size_t> nearest_cameras(std::span<const Camera> cameras, std::size_t target, std::size_t k);

// ---------------------------------------------------------------------------
// Reflection-strength prior.

/// Divides each pixel by the clipped 31x31 mean of Rec.709 luminance (>= 1e-3).
/// With `mask`, the mean runs over window pixels where mask > 0 only, so an
/// object's normalization does not depend on how much background is in view.
Image luminance_normalize(const Image& rgb, int window = 31, double floor = 1e-3, const Image* mask = nullptr);

/// Geometry and ground-truth color of one view as used by the prior.
struct PriorView {
  const Camera* camera = nullptr;
  const Image* image = nullptr;   ///< linear RGB
  const Image* depth = nullptr;   ///< camera depth, <= 0 where invalid
  const Image* normal = nullptr;  ///< camera-space, facing the camera
};

struct ScoreOptions {
  int patch_half = 1;  ///< 3x3 patches
  WarpOptions warp;
};

/// Mean over the patch of the per-pixel population standard deviation (averaged
/// over RGB) across the reference and the warped neighbor patches. Images are
/// luminance-normalized first. Zero where any warp is invalid.
Image reflection_score(const PriorView& reference, std::span<const PriorView> neighbors,
                       const ScoreOptions& opts = {});

struct FuseOptions {
  double radius = 0.0;  ///< ball radius in world units
  int top_k = 8;
};

/// Back-projects all score maps into one point cloud and replaces each pixel's
/// score by the mean of the top-K scores within the ball around it.
std::vector<Image> fuse_scores(std::span<const Image> scores, std::span<const Image> depths,
                               std::span<const Camera> cameras, const FuseOptions& opts);

struct GateOptions {
  double threshold = 0.1;
  double delta = 0.2;
  double floor = 0.5;
};

struct ReflectionPrior {
  Image w_ref;                      ///< 1 channel
  std::vector<std::uint8_t> gate;   ///< per pixel
  Image target;                     ///< 1 channel, M0 of the pixel's region
};

struct RegionStat {
  std::uint16_t label = 0;
  std::size_t pixels = 0;
  double mean_w_ref = 0;
  double mean_metallic = 0;
  bool gated = false;
  double target = 0;
};

/// Region statistics are pooled over all views, so the gate and target of a
/// region are the same in every view. Label 0 is never gated.
std::vector<ReflectionPrior> derive_gate_and_target(std::span<const Image> w_ref, std::span<const LabelMap> labels,
                                                    std::span<const Image> metallic, const GateOptions& opts = {},
                                                    std::vector<RegionStat>* stats = nullptr);

/// One-sided mean of w_ref * gate * (M0 - metallic) over pixels where metallic < M0.
/// Adds d loss / d metallic into `grad_metallic` when given.
double reflection_loss(const Image& metallic, const ReflectionPrior& prior, Image* grad_metallic = nullptr);

}  // namespace refsplat
