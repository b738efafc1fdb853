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

#include <span>

namespace refsplat {

/// 10 log10(1 / MSE) for images on [0, 1]; 100 dB when identical.
double psnr(const Image& a, const Image& b);

/// PSNR restricted to pixels where mask is non-zero; 100 dB when identical.
double masked_psnr(const Image& a, const Image& b, std::span<const std::uint8_t> mask);

/// Mean angular error in degrees over pixels where both normals are non-zero.
double normal_mae_degrees(const Image& n, const Image& reference);

struct EvalMetrics {
  double psnr = 0;
  double ssim = 0;
  double mae_degrees = 0;  ///< NaN when no normals were given
};

/// Averages per-pair metrics over matched sets; throws on empty or mismatched input.
EvalMetrics eval_metrics(std::span<const Image> renders, std::span<const Image> gts,
                         std::span<const Image> normals = {}, std::span<const Image> gt_normals = {});

}  // namespace refsplat
