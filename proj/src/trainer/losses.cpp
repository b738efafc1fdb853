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

#include "refsplat/trainer/losses.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace refsplat {

namespace {

using Plane = std::vector<double>;

// Separable window with per-pixel renormalization over in-bounds taps.
class GaussianBlur {
 public:
  GaussianBlur(int w, int h, const SsimOptions& opts) : w_(w), h_(h), r_(opts.window / 2) {
    kernel_.resize(2 * r_ + 1);
    for (int i = -r_; i <= r_; ++i) kernel_[i + r_] = std::exp(-0.5 * i * i / (opts.sigma * opts.sigma));
    zx_ = norms(w);
    zy_ = norms(h);
  }

  Plane forward(const Plane& x) const {
    Plane t = conv(x, true);
    divide(t, zx_, true);
    Plane out = conv(t, false);
    divide(out, zy_, false);
    return out;
  }

  Plane transpose(Plane a) const {
    divide(a, zy_, false);
    Plane t = conv(a, false);
    divide(t, zx_, true);
    return conv(t, true);
  }

 private:
  std::vector<double> norms(int n) const {
    std::vector<double> z(n, 0.0);
    for (int i = 0; i < n; ++i)
      for (int k = -r_; k <= r_; ++k)
        if (i + k >= 0 && i + k < n) z[i] += kernel_[k + r_];
    return z;
  }

  void divide(Plane& p, const std::vector<double>& z, bool along_x) const {
    for (int y = 0; y < h_; ++y)
      for (int x = 0; x < w_; ++x) p[y * w_ + x] /= along_x ? z[x] : z[y];
  }

  Plane conv(const Plane& in, bool along_x) const {
    Plane out(in.size(), 0.0);
    for (int y = 0; y < h_; ++y)
      for (int x = 0; x < w_; ++x) {
        double s = 0.0;
        for (int k = -r_; k <= r_; ++k) {
          const int xx = along_x ? x + k : x, yy = along_x ? y : y + k;
          if (xx < 0 || yy < 0 || xx >= w_ || yy >= h_) continue;
          s += kernel_[k + r_] * in[yy * w_ + xx];
        }
        out[y * w_ + x] = s;
      }
    return out;
  }

  int w_, h_, r_;
  std::vector<double> kernel_, zx_, zy_;
};

Plane channel(const Image& img, int c) {
  Plane p(img.pixel_count());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = img.data[i * img.channels + c];
  return p;
}

Plane product(const Plane& a, const Plane& b) {
  Plane p(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) p[i] = a[i] * b[i];
  return p;
}

}  // namespace

double ssim(const Image& a, const Image& b, Image* grad_a, const SsimOptions& opts) {
  if (!a.same_shape(b)) throw std::invalid_argument("ssim: image shapes differ");
  if (a.empty()) return 1.0;
  const GaussianBlur blur(a.width, a.height, opts);
  const std::size_t n = a.pixel_count();
  const double count = static_cast<double>(n) * a.channels;
  double total = 0.0;
  for (int c = 0; c < a.channels; ++c) {
    const Plane x = channel(a, c), y = channel(b, c);
    const Plane mx = blur.forward(x), my = blur.forward(y);
    const Plane exx = blur.forward(product(x, x)), eyy = blur.forward(product(y, y)),
                exy = blur.forward(product(x, y));
    Plane g_mu(n), g_exx(n), g_exy(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double sxx = exx[i] - mx[i] * mx[i];
      const double syy = eyy[i] - my[i] * my[i];
      const double sxy = exy[i] - mx[i] * my[i];
      const double a1 = 2.0 * mx[i] * my[i] + opts.c1;
      const double a2 = 2.0 * sxy + opts.c2;
      const double b1 = mx[i] * mx[i] + my[i] * my[i] + opts.c1;
      const double b2 = sxx + syy + opts.c2;
      const double s = (a1 * a2) / (b1 * b2);
      total += s;
      if (grad_a) {
        g_mu[i] = s * (2.0 * my[i] / a1 - 2.0 * my[i] / a2 - 2.0 * mx[i] / b1 + 2.0 * mx[i] / b2) / count;
        g_exx[i] = -s / b2 / count;
        g_exy[i] = 2.0 * s / a2 / count;
      }
    }
    if (grad_a) {
      const Plane t_mu = blur.transpose(std::move(g_mu));
      const Plane t_exx = blur.transpose(std::move(g_exx));
      const Plane t_exy = blur.transpose(std::move(g_exy));
      for (std::size_t i = 0; i < n; ++i)
        grad_a->data[i * a.channels + c] += t_mu[i] + 2.0 * x[i] * t_exx[i] + y[i] * t_exy[i];
    }
  }
  return total / count;
}

PhotometricLoss photometric_loss(const Image& render, const Image& gt, Image* grad) {
  if (!render.same_shape(gt)) throw std::invalid_argument("photometric_loss: image shapes differ");
  PhotometricLoss loss;
  const std::size_t n = render.data.size();
  if (n == 0) return loss;
  double l1 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = render.data[i] - gt.data[i];
    l1 += std::abs(d);
    if (grad && d != 0.0) grad->data[i] += 0.8 * (d > 0 ? 1.0 : -1.0) / n;
  }
  loss.l1 = l1 / n;
  Image g_ssim;
  if (grad) g_ssim = Image(render.width, render.height, render.channels);
  const double s = ssim(render, gt, grad ? &g_ssim : nullptr);
  loss.dssim = 0.5 * (1.0 - s);
  if (grad)
    for (std::size_t i = 0; i < n; ++i) grad->data[i] += -0.1 * g_ssim.data[i];
  loss.total = 0.8 * loss.l1 + 0.2 * loss.dssim;
  return loss;
}

double depth_normal_loss(const GBuffer& gbuffer, const Camera& cam, GBufferGrad* grad) {
  const Image nd = render_normal_from_depth(gbuffer.depth, cam);
  const std::size_t np = nd.pixel_count();
  std::vector<std::uint8_t> mask(np, 0);
  std::size_t count = 0;
  for (std::size_t p = 0; p < np; ++p) {
    const Vec3 a(nd.data[3 * p], nd.data[3 * p + 1], nd.data[3 * p + 2]);
    const Vec3 b(gbuffer.normal.data[3 * p], gbuffer.normal.data[3 * p + 1], gbuffer.normal.data[3 * p + 2]);
    if (a.squaredNorm() > 0.0 && b.squaredNorm() > 0.0) {
      mask[p] = 1;
      ++count;
    }
  }
  if (count == 0) return 0.0;
  double sum = 0.0;
  Image g_nd;
  if (grad) g_nd = Image(nd.width, nd.height, 3);
  for (std::size_t p = 0; p < np; ++p) {
    if (!mask[p]) continue;
    double dot = 0.0;
    for (int c = 0; c < 3; ++c) dot += nd.data[3 * p + c] * gbuffer.normal.data[3 * p + c];
    sum += 1.0 - dot;
    if (grad)
      for (int c = 0; c < 3; ++c) {
        grad->normal.data[3 * p + c] -= nd.data[3 * p + c] / count;
        g_nd.data[3 * p + c] = -gbuffer.normal.data[3 * p + c] / count;
      }
  }
  if (grad) {
    const Image g_depth = render_normal_from_depth_backward(gbuffer.depth, cam, g_nd);
    for (std::size_t p = 0; p < np; ++p) grad->depth.data[p] += g_depth.data[p];
  }
  return sum / count;
}

double normal_prior_loss(const Image& normal, const Image& prior, Image* grad_normal) {
  if (prior.empty()) return 0.0;
  if (!normal.same_shape(prior)) throw std::invalid_argument("normal_prior_loss: map shapes differ");
  const std::size_t np = normal.pixel_count();
  std::size_t count = 0;
  for (std::size_t p = 0; p < np; ++p) {
    const Vec3 a(normal.data[3 * p], normal.data[3 * p + 1], normal.data[3 * p + 2]);
    const Vec3 b(prior.data[3 * p], prior.data[3 * p + 1], prior.data[3 * p + 2]);
    if (a.squaredNorm() > 0.0 && b.squaredNorm() > 0.0) ++count;
  }
  if (count == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t p = 0; p < np; ++p) {
    const Vec3 a(normal.data[3 * p], normal.data[3 * p + 1], normal.data[3 * p + 2]);
    const Vec3 b(prior.data[3 * p], prior.data[3 * p + 1], prior.data[3 * p + 2]);
    if (!(a.squaredNorm() > 0.0 && b.squaredNorm() > 0.0)) continue;
    sum += 1.0 - a.dot(b);
    if (grad_normal)
      for (int c = 0; c < 3; ++c) grad_normal->data[3 * p + c] -= b[c] / count;
  }
  return sum / count;
}

}  // namespace refsplat
