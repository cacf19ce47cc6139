// Copyright (c) 2026 Deflicker Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <vector>

#include "deflicker/core/ops.hpp"
#include "deflicker/flow/flow_field.hpp"

namespace deflicker {

/// Precomputed bilinear sampling plan for one flow field: per target pixel,
/// four source indices and weights. Continuous sample coordinates are clamped
/// to the frame (border clamping), keeping the warp linear in frame values.
template <typename S>
struct WarpPlan {
  int h = 0, w = 0;
  std::vector<int> idx;  // 4 per pixel, plane-relative flat indices
  std::vector<S> wt;     // 4 per pixel

  WarpPlan(const FlowField<S>& flow) : h(flow.h()), w(flow.w()) {
    idx.resize(std::size_t(h) * w * 4);
    wt.resize(std::size_t(h) * w * 4);
    std::size_t o = 0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x, o += 4) {
        double cx = x + double(flow.dx(y, x));
        double cy = y + double(flow.dy(y, x));
        cx = std::min(std::max(cx, 0.0), double(w - 1));
        cy = std::min(std::max(cy, 0.0), double(h - 1));
        const int x0 = int(cx), y0 = int(cy);
        const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
        const S fx = S(cx - x0), fy = S(cy - y0);
        idx[o] = y0 * w + x0;
        idx[o + 1] = y0 * w + x1;
        idx[o + 2] = y1 * w + x0;
        idx[o + 3] = y1 * w + x1;
        wt[o] = (S(1) - fy) * (S(1) - fx);
        wt[o + 1] = (S(1) - fy) * fx;
        wt[o + 2] = fy * (S(1) - fx);
        wt[o + 3] = fy * fx;
      }
  }

  Tensor<S> apply(const Tensor<S>& x) const {
    if (x.h != h || x.w != w)
      throw DimensionMismatchError("warp: frame " + x.shape_str() + " vs flow " +
                                   std::to_string(h) + "x" + std::to_string(w));
    Tensor<S> y(x.c, h, w);
    const int n = h * w;
    for (int c = 0; c < x.c; ++c) {
      const S* src = x.data.data() + std::ptrdiff_t(c) * n;
      S* dst = y.data.data() + std::ptrdiff_t(c) * n;
      std::size_t o = 0;
      for (int i = 0; i < n; ++i, o += 4)
        dst[i] = wt[o] * src[idx[o]] + wt[o + 1] * src[idx[o + 1]] + wt[o + 2] * src[idx[o + 2]] +
                 wt[o + 3] * src[idx[o + 3]];
    }
    return y;
  }

  /// Transpose of apply: scatters target-pixel gradients back to sources.
  Tensor<S> apply_transpose(const Tensor<S>& gy) const {
    Tensor<S> gx(gy.c, h, w);
    const int n = h * w;
    for (int c = 0; c < gy.c; ++c) {
      const S* g = gy.data.data() + std::ptrdiff_t(c) * n;
      S* dst = gx.data.data() + std::ptrdiff_t(c) * n;
      std::size_t o = 0;
      for (int i = 0; i < n; ++i, o += 4) {
        dst[idx[o]] += wt[o] * g[i];
        dst[idx[o + 1]] += wt[o + 1] * g[i];
        dst[idx[o + 2]] += wt[o + 2] * g[i];
        dst[idx[o + 3]] += wt[o + 3] * g[i];
      }
    }
    return gx;
  }
};

/// Backward warp of any (C,H,W) tensor: out(x) = bilinear sample of `x` at
/// x + flow(x). Differentiable with respect to `x` (tape variant below).
template <typename S>
Tensor<S> warp(const Tensor<S>& x, const FlowField<S>& flow) {
  return WarpPlan<S>(flow).apply(x);
}

namespace ops {

template <typename S>
int warp(Tape<S>& tp, int x, const FlowField<S>& flow) {
  auto plan = std::make_shared<const WarpPlan<S>>(flow);
  Tensor<S> y = plan->apply(tp.val(x));
  auto* t = &tp;
  const int id = tp.size();
  return tp.make(std::move(y), [t, x, id, plan] {
    t->add_grad(x, plan->apply_transpose(t->grad(id)).data);
  });
}

}  // namespace ops

/// Continuous training mask M = exp(-alpha * ||frame_t - warp(frame_prev)||^2)
/// with the squared norm over the RGB channels; values in (0,1].
template <typename S>
Tensor<S> visibility_mask(const Frame<S>& frame_t, const Frame<S>& frame_prev,
                          const FlowField<S>& flow, S alpha = S(50)) {
  require_same_shape(frame_t, frame_prev, "visibility_mask");
  Frame<S> warped = warp(frame_prev, flow);
  Tensor<S> mask(1, frame_t.h, frame_t.w);
  mask.data = ((frame_t.plane(0) - warped.plane(0)).square() +
               (frame_t.plane(1) - warped.plane(1)).square() +
               (frame_t.plane(2) - warped.plane(2)).square());
  mask.data = (-alpha * mask.data).exp();
  return mask;
}

/// Binary non-occlusion mask from the backward-forward consistency check.
/// `forward` is anchored at t pointing into t+1 (F_{t,t+1}); `backward` is
/// anchored at t+1 pointing into t (F_{t+1,t}). A pixel is occluded when
///   (a) ||F_fwd + warp(F_bwd, F_fwd)||^2 > c1*(||F_fwd||^2 + ||warp(F_bwd)||^2) + c2,
///   (b) its flow target x + F_fwd(x) falls outside the frame, or
///   (c) it sits on a motion boundary: ||grad F_fwd||^2 > 0.01*||F_fwd||^2 + 0.002.
/// Constants c1 = 0.01, c2 = 0.5 per the standard consistency-check method.
template <typename S>
Tensor<S> occlusion_mask(const FlowField<S>& forward, const FlowField<S>& backward, S c1 = S(0.01),
                         S c2 = S(0.5)) {
  require_same_shape(forward.d, backward.d, "occlusion_mask");
  const int h = forward.h(), w = forward.w();
  Tensor<S> bwd_at_t = warp(backward.d, forward);  // sample backward flow at x + F_fwd(x)
  Tensor<S> mask(1, h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const S fx = forward.dx(y, x), fy = forward.dy(y, x);
      const S bx = bwd_at_t(0, y, x), by = bwd_at_t(1, y, x);
      const S res = (fx + bx) * (fx + bx) + (fy + by) * (fy + by);
      const S mag = fx * fx + fy * fy + bx * bx + by * by;
      bool occluded = res > c1 * mag + c2;
      const double tx = x + double(fx), ty = y + double(fy);
      if (tx < 0 || tx > w - 1 || ty < 0 || ty > h - 1) occluded = true;  // target off-frame
      if (!occluded) {
        auto d = [&](int c, int yy, int xx, bool horiz) {
          const int y0 = std::max(0, horiz ? yy : yy - 1), y1 = std::min(h - 1, horiz ? yy : yy + 1);
          const int x0 = std::max(0, horiz ? xx - 1 : xx), x1 = std::min(w - 1, horiz ? xx + 1 : xx);
          const int span = horiz ? (x1 - x0) : (y1 - y0);
          return span == 0 ? S(0) : (forward.d(c, y1, x1) - forward.d(c, y0, x0)) / S(span);
        };
        const S gux = d(0, y, x, true), guy = d(0, y, x, false);
        const S gvx = d(1, y, x, true), gvy = d(1, y, x, false);
        const S grad2 = gux * gux + guy * guy + gvx * gvx + gvy * gvy;
        if (grad2 > S(0.01) * (fx * fx + fy * fy) + S(0.002)) occluded = true;
      }
      mask(0, y, x) = occluded ? S(0) : S(1);
    }
  return mask;
}

/// Continuous visibility mask + binary non-occlusion mask for one frame pair.
template <typename S>
struct MaskPair {
  Tensor<S> visibility;     // (1,H,W), values in (0,1]
  Tensor<S> non_occlusion;  // (1,H,W), values in {0,1}
  S alpha = S(50);
};

/// (1/M) * sum_i mask(i) * ||a(i) - b(i)||^2 over pixels, squared norm over
/// RGB, M = sum of mask. All-zero mask -> EmptyMaskError (caller skips pair).
template <typename S>
S mean_nonoccluded_error(const Frame<S>& a, const Frame<S>& b_warped, const Tensor<S>& mask) {
  require_same_shape(a, b_warped, "mean_nonoccluded_error");
  if (mask.c != 1 || mask.h != a.h || mask.w != a.w)
    throw DimensionMismatchError("mask " + mask.shape_str() + " vs frame " + a.shape_str());
  const S m = mask.data.sum();
  if (m <= S(0)) throw EmptyMaskError("occlusion mask is entirely zero");
  typename Tensor<S>::Array err = (a.plane(0) - b_warped.plane(0)).square() +
                                  (a.plane(1) - b_warped.plane(1)).square() +
                                  (a.plane(2) - b_warped.plane(2)).square();
  return (err * mask.data).sum() / m;
}

}  // namespace deflicker
