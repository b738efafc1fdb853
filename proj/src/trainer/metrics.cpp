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

#include "refsplat/trainer/metrics.hpp"

#include "refsplat/math.hpp"
#include "refsplat/trainer/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace refsplat {

namespace {

double psnr_from_mse(double mse) { return mse > 0.0 ? std::min(100.0, 10.0 * std::log10(1.0 / mse)) : 100.0; }

}  // namespace

double psnr(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("psnr: image shapes differ");
  if (a.empty()) throw std::invalid_argument("psnr: empty image");
  double se = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    se += d * d;
  }
  return psnr_from_mse(se / a.data.size());
}

double masked_psnr(const Image& a, const Image& b, std::span<const std::uint8_t> mask) {
  if (!a.same_shape(b) || mask.size() != a.pixel_count()) throw std::invalid_argument("masked_psnr: shape mismatch");
  double se = 0.0;
  std::size_t n = 0;
  for (std::size_t p = 0; p < mask.size(); ++p) {
    if (!mask[p]) continue;
    for (int c = 0; c < a.channels; ++c) {
      const double d = a.data[p * a.channels + c] - b.data[p * a.channels + c];
      se += d * d;
      ++n;
    }
  }
  if (n == 0) throw std::invalid_argument("masked_psnr: empty mask");
  return psnr_from_mse(se / n);
}

double normal_mae_degrees(const Image& n, const Image& reference) {
  if (!n.same_shape(reference)) throw std::invalid_argument("normal_mae_degrees: shape mismatch");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t p = 0; p < n.pixel_count(); ++p) {
    const Vec3 a(n.data[3 * p], n.data[3 * p + 1], n.data[3 * p + 2]);
    const Vec3 b(reference.data[3 * p], reference.data[3 * p + 1], reference.data[3 * p + 2]);
    if (!(a.squaredNorm() > 0.0 && b.squaredNorm() > 0.0)) continue;
    sum += std::acos(std::clamp(a.normalized().dot(b.normalized()), -1.0, 1.0)) * 180.0 / kPi;
    ++count;
  }
  return count ? sum / count : std::numeric_limits<double>::quiet_NaN();
}

EvalMetrics eval_metrics(std::span<const Image> renders, std::span<const Image> gts, std::span<const Image> normals,
                         std::span<const Image> gt_normals) {
  if (renders.empty()) throw std::invalid_argument("eval_metrics: empty set");
  if (renders.size() != gts.size() || normals.size() != gt_normals.size())
    throw std::invalid_argument("eval_metrics: unmatched sets");
  EvalMetrics m;
  for (std::size_t i = 0; i < renders.size(); ++i) {
    m.psnr += psnr(renders[i], gts[i]);
    m.ssim += ssim(renders[i], gts[i]);
  }
  m.psnr /= renders.size();
  m.ssim /= renders.size();
  if (normals.empty()) {
    m.mae_degrees = std::numeric_limits<double>::quiet_NaN();
  } else {
    for (std::size_t i = 0; i < normals.size(); ++i) m.mae_degrees += normal_mae_degrees(normals[i], gt_normals[i]);
    m.mae_degrees /= normals.size();
  }
  return m;
}

}  // namespace refsplat
