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

#include <span>

namespace refsplat {

struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double c1 = 0.01 * 0.01;
  double c2 = 0.03 * 0.03;
};

/// Mean SSIM over pixels and channels with a truncated Gaussian window that is
/// renormalized at the borders. `grad_a` receives d mean-SSIM / d a.
double ssim(const Image& a, const Image& b, Image* grad_a = nullptr, const SsimOptions& opts = {});

struct PhotometricLoss {
  double total = 0;  ///< 0.8 * l1 + 0.2 * dssim
  double l1 = 0;
  double dssim = 0;  ///< (1 - SSIM) / 2
};

/// L_c of `render` against `gt`; adds d L_c / d render into `grad` when given.
PhotometricLoss photometric_loss(const Image& render, const Image& gt, Image* grad = nullptr);

/// Mean of 1 - <n_splat, n_depth> over pixels where both normals exist. Adds
/// gradients into grad->normal and grad->depth when given.
double depth_normal_loss(const GBuffer& gbuffer, const Camera& cam, GBufferGrad* grad = nullptr);

/// Mean of 1 - <n, n_prior> over pixels where both are non-zero.
double normal_prior_loss(const Image& normal, const Image& prior, Image* grad_normal = nullptr);

}  // namespace refsplat
