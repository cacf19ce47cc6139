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
#include <utility>
#include <vector>

#include "deflicker/core/conv.hpp"
#include "deflicker/core/tape.hpp"

namespace deflicker {
namespace ops {

// Differentiable primitives over Tape<S>. Each op appends one node whose
// backward closure scatters the node's gradient into its inputs. Closures
// capture the tape by pointer; a tape must stay put once ops reference it.
// The new node's id equals tape.size() at creation time, so closures can
// capture it before make() runs.

template <typename S>
int relu(Tape<S>& tp, int x) {
  Tensor<S> y = tp.val(x);
  y.data = y.data.max(S(0));
  auto* t = &tp;
  const int id = tp.size();
  return tp.make(std::move(y), [t, x, id] {
    t->add_grad(x, (t->val(x).data > S(0)).template cast<S>() * t->grad(id).data);
  });
}

template <typename S>
int sigmoid(Tape<S>& tp, int x) {
  Tensor<S> y = tp.val(x);
  y.data = S(1) / (S(1) + (-y.data).exp());
  auto* t = &tp;
  const int id = tp.size();
  return tp.make(std::move(y), [t, x, id] {
    const auto& s = t->val(id).data;
    t->add_grad(x, s * (S(1) - s) * t->grad(id).data);
  });
}

template <typename S>
int tanh(Tape<S>& tp, int x) {
  Tensor<S> y = tp.val(x);
  y.data = y.data.tanh();
  auto* t = &tp;
  const int id = tp.size();
  return tp.make(std::move(y), [t, x, id] {
    const auto& v = t->val(id).data;
    t->add_grad(x, (S(1) - v * v) * t->grad(id).data);
  });
}

template <typename S>
int add(Tape<S>& tp, int a, int b) {
  require_same_shape(tp.val(a), tp.val(b), "add");
  Tensor<S> y = tp.val(a);
  y.data += tp.val(b).data;
  auto* t = &tp;
  const int id = tp.size();
  return tp.make(std::move(y), [t, a, b, id] {
    t->add_grad(a, t->grad(id).data);
    t->add_grad(b, t->grad(id).data);
  });
}

template <typename S>
int sub(Tape<S>& tp, int a, int b) {
  require_same_shape(tp.val(a), tp.val(b), "sub");
  Tensor<S> y = tp.val(a);
  y.data -= tp.val(b).data;
  auto* t = &tp;
  const int id = tp.size();
  return tp.make(std::move(y), [t, a, b, id] {
    t->add_grad(a, t->grad(id).data);
    t->add_grad(b, -t->grad(id).data);
  });
}

template <typename S>
int mul(Tape<S>& tp, int a, int b) {
  require_same_shape(tp.val(a), tp.val(b), "mul");
  Tensor<S> y = tp.val(a);
  y.data *= tp.val(b).data;
  auto* t = &tp;
  const int id = tp.size();
  return tp.make(std::move(y), [t, a, b, id] {
    t->add_grad(a, t->val(b).data * t->grad(id).data);
    t->add_grad(b, t->val(a).data * t->grad(id).data);
  });
}

template <typename S>
int scale(Tape<S>& tp, int x, S a) {
  Tensor<S> y = tp.val(x);
  y.data *= a;
  auto* t = &tp;
  const int id = tp.size();
  return tp.make(std::move(y), [t, x, a, id] { t->add_grad(x, a * t->grad(id).data); });
}

template <typename S>
int square(Tape<S>& tp, int x) {
  Tensor<S> y = tp.val(x);
  y.data = y.data.square();
  auto* t = &tp;
  const int id = tp.size();
  return tp.make(std::move(y), [t, x, id] {
    t->add_grad(x, S(2) * t->val(x).data * t->grad(id).data);
  });
}

/// Elementwise product with a constant (non-differentiated) tensor of the
/// same shape, e.g. a precomputed mask.
template <typename S>
int mul_const(Tape<S>& tp, int x, Tensor<S> m) {
  require_same_shape(tp.val(x), m, "mul_const");
  Tensor<S> y = tp.val(x);
  y.data *= m.data;
  auto* t = &tp;
  const int id = tp.size();
  return tp.make(std::move(y), [t, x, id, m = std::move(m)] {
    t->add_grad(x, m.data * t->grad(id).data);
  });
}

/// Channel concatenation; plane-major layout makes this a flat append.
template <typename S>
int concat_c(Tape<S>& tp, const std::vector<int>& xs) {
  if (xs.empty()) throw ShapeError("concat_c of nothing");
  const int h = tp.val(xs[0]).h, w = tp.val(xs[0]).w;
  int c = 0;
  for (int x : xs) {
    if (tp.val(x).h != h || tp.val(x).w != w)
      throw DimensionMismatchError("concat_c spatial mismatch");
    c += tp.val(x).c;
  }
  Tensor<S> y(c, h, w);
  std::ptrdiff_t off = 0;
  for (int x : xs) {
    y.data.segment(off, tp.val(x).size()) = tp.val(x).data;
    off += tp.val(x).size();
  }
  auto* t = &tp;
  const int id = tp.size();
  return tp.make(std::move(y), [t, xs, id] {
    std::ptrdiff_t off = 0;
    for (int x : xs) {
      const std::ptrdiff_t n = t->val(x).size();
      t->add_grad(x, t->grad(id).data.segment(off, n));
      off += n;
    }
  });
}

template <typename S>
int slice_c(Tape<S>& tp, int x, int c0, int n) {
  const Tensor<S>& xv = tp.val(x);
  if (c0 < 0 || n < 1 || c0 + n > xv.c)
    throw ShapeError("slice_c [" + std::to_string(c0) + "," + std::to_string(c0 + n) +
                     ") of " + xv.shape_str());
  Tensor<S> y(n, xv.h, xv.w);
  const std::ptrdiff_t ps = xv.plane_size();
  y.data = xv.data.segment(std::ptrdiff_t(c0) * ps, std::ptrdiff_t(n) * ps);
  auto* t = &tp;
  const int id = tp.size();
  return tp.make(std::move(y), [t, x, c0, n, id] {
    const std::ptrdiff_t ps = t->val(x).plane_size();
    typename Tensor<S>::Array g = Tensor<S>::Array::Zero(t->val(x).size());
    g.segment(std::ptrdiff_t(c0) * ps, std::ptrdiff_t(n) * ps) = t->grad(id).data;
    t->add_grad(x, g);
  });
}

/// Convolution with optional bias (pass bias = -1 for none).
template <typename S>
int conv2d(Tape<S>& tp, int x, int w, int bias, int kh, int kw, int stride, int pad) {
  const Tensor<S> empty;
  Tensor<S> y = conv_forward(tp.val(x), tp.val(w), bias >= 0 ? tp.val(bias) : empty, kh, kw,
                             stride, pad);
  auto* t = &tp;
  const int id = tp.size();
  return tp.make(std::move(y), [t, x, w, bias, kh, kw, stride, pad, id] {
    const Tensor<S>& gy = t->grad(id);
    t->add_grad(x, conv_backward_data(gy, t->val(w), kh, kw, stride, pad, t->val(x).h,
                                      t->val(x).w)
                       .data);
    t->add_grad(w, conv_backward_weight(t->val(x), gy, kh, kw, stride, pad).data);
    if (bias >= 0) t->add_grad(bias, conv_backward_bias(gy).data);
  });
}

/// Transposed convolution: forward pass is conv_backward_data, so the weight
/// is shaped (c_in, c_out*kh, kw) — the roles of the conv kernels swap in the
/// backward pass. Target spatial dims are explicit (stride > 1 is ambiguous).
template <typename S>
int conv_transpose2d(Tape<S>& tp, int x, int w, int bias, int kh, int kw, int stride, int pad,
                     int th, int tw) {
  Tensor<S> y = conv_backward_data(tp.val(x), tp.val(w), kh, kw, stride, pad, th, tw);
  if (bias >= 0) {
    const Tensor<S>& b = tp.val(bias);
    if (b.c != y.c)
      throw DimensionMismatchError("conv_transpose bias " + b.shape_str() + " vs Co=" +
                                   std::to_string(y.c));
    for (int co = 0; co < y.c; ++co) y.plane(co) += b.data[co];
  }
  auto* t = &tp;
  const int id = tp.size();
  return tp.make(std::move(y), [t, x, w, bias, kh, kw, stride, pad, id] {
    const Tensor<S>& gy = t->grad(id);
    const Tensor<S> empty;
    t->add_grad(x, conv_forward(gy, t->val(w), empty, kh, kw, stride, pad).data);
    t->add_grad(w, conv_backward_weight(gy, t->val(x), kh, kw, stride, pad).data);
    if (bias >= 0) t->add_grad(bias, conv_backward_bias(gy).data);
  });
}

/// Instance normalization with learned per-channel affine (gamma, beta as
/// (C,1,1) leaves). Population statistics over spatial positions.
template <typename S>
int instance_norm(Tape<S>& tp, int x, int gamma, int beta, S eps = S(1e-5)) {
  const Tensor<S>& xv = tp.val(x);
  if (tp.val(gamma).c != xv.c || tp.val(beta).c != xv.c)
    throw DimensionMismatchError("instance_norm affine params vs " + xv.shape_str());
  const int n = xv.plane_size();
  Tensor<S> y(xv.c, xv.h, xv.w);
  Tensor<S> mean(xv.c, 1, 1), istd(xv.c, 1, 1);
  for (int c = 0; c < xv.c; ++c) {
    const S m = xv.plane(c).mean();
    const S v = (xv.plane(c) - m).square().mean();
    const S is = S(1) / std::sqrt(v + eps);
    mean.data[c] = m;
    istd.data[c] = is;
    y.plane(c) = (xv.plane(c) - m) * is * tp.val(gamma).data[c] + tp.val(beta).data[c];
  }
  auto* t = &tp;
  const int id = tp.size();
  return tp.make(std::move(y),
                 [t, x, gamma, beta, id, mean = std::move(mean), istd = std::move(istd), n] {
    const Tensor<S>& xv = t->val(x);
    const Tensor<S>& gy = t->grad(id);
    typename Tensor<S>::Array dx(xv.size());
    Tensor<S> dgamma(xv.c, 1, 1), dbeta(xv.c, 1, 1);
    for (int c = 0; c < xv.c; ++c) {
      const auto xhat = ((xv.plane(c) - mean.data[c]) * istd.data[c]).eval();
      const auto g = gy.plane(c);
      dgamma.data[c] = (g * xhat).sum();
      dbeta.data[c] = g.sum();
      const S gmean = g.mean();
      const S gx = dgamma.data[c] / S(n);
      dx.segment(std::ptrdiff_t(c) * n, n) =
          t->val(gamma).data[c] * istd.data[c] * (g - gmean - xhat * gx);
    }
    t->add_grad(x, dx);
    t->add_grad(gamma, dgamma.data);
    t->add_grad(beta, dbeta.data);
  });
}

/// 2x2 max pooling, stride 2, floor mode (odd trailing row/col dropped).
template <typename S>
int maxpool2(Tape<S>& tp, int x) {
  const Tensor<S>& xv = tp.val(x);
  const int oh = xv.h / 2, ow = xv.w / 2;
  if (oh < 1 || ow < 1) throw ShapeError("maxpool2 on " + xv.shape_str());
  Tensor<S> y(xv.c, oh, ow);
  std::vector<std::ptrdiff_t> argmax(std::size_t(xv.c) * oh * ow);
  std::ptrdiff_t o = 0;
  for (int c = 0; c < xv.c; ++c)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox, ++o) {
        S best = xv(c, 2 * oy, 2 * ox);
        std::ptrdiff_t bi = (std::ptrdiff_t(c) * xv.h + 2 * oy) * xv.w + 2 * ox;
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            const S v = xv(c, 2 * oy + dy, 2 * ox + dx);
            if (v > best) {
              best = v;
              bi = (std::ptrdiff_t(c) * xv.h + 2 * oy + dy) * xv.w + 2 * ox + dx;
            }
          }
        y.data[o] = best;
        argmax[std::size_t(o)] = bi;
      }
  auto* t = &tp;
  const int id = tp.size();
  return tp.make(std::move(y), [t, x, id, argmax = std::move(argmax)] {
    typename Tensor<S>::Array g = Tensor<S>::Array::Zero(t->val(x).size());
    const auto& gy = t->grad(id).data;
    for (std::ptrdiff_t i = 0; i < gy.size(); ++i) g[argmax[std::size_t(i)]] += gy[i];
    t->add_grad(x, g);
  });
}

// ---- reductions (scalar-valued nodes) ----

template <typename S>
int sum_all(Tape<S>& tp, int x) {
  Tensor<S> y = Tensor<S>::scalar(tp.val(x).data.sum());
  auto* t = &tp;
  const int id = tp.size();
  return tp.make(std::move(y), [t, x, id] {
    t->add_grad(x, Tensor<S>::Array::Constant(t->val(x).size(), t->grad(id).data[0]));
  });
}

template <typename S>
int mean_all(Tape<S>& tp, int x) {
  const S inv = S(1) / S(tp.val(x).size());
  Tensor<S> y = Tensor<S>::scalar(tp.val(x).data.sum() * inv);
  auto* t = &tp;
  const int id = tp.size();
  return tp.make(std::move(y), [t, x, id, inv] {
    t->add_grad(x, Tensor<S>::Array::Constant(t->val(x).size(), t->grad(id).data[0] * inv));
  });
}

template <typename S>
int abs_sum(Tape<S>& tp, int x) {
  Tensor<S> y = Tensor<S>::scalar(tp.val(x).data.abs().sum());
  auto* t = &tp;
  const int id = tp.size();
  return tp.make(std::move(y), [t, x, id] {
    t->add_grad(x, t->val(x).data.sign() * t->grad(id).data[0]);
  });
}

template <typename S>
int abs_mean(Tape<S>& tp, int x) {
  const S inv = S(1) / S(tp.val(x).size());
  Tensor<S> y = Tensor<S>::scalar(tp.val(x).data.abs().sum() * inv);
  auto* t = &tp;
  const int id = tp.size();
  return tp.make(std::move(y), [t, x, id, inv] {
    t->add_grad(x, t->val(x).data.sign() * (t->grad(id).data[0] * inv));
  });
}

template <typename S>
int sq_sum(Tape<S>& tp, int x) {
  Tensor<S> y = Tensor<S>::scalar(tp.val(x).data.square().sum());
  auto* t = &tp;
  const int id = tp.size();
  return tp.make(std::move(y), [t, x, id] {
    t->add_grad(x, S(2) * t->val(x).data * t->grad(id).data[0]);
  });
}

/// Frobenius (elementwise L2) norm. Subgradient 0 at the origin.
template <typename S>
int frob_norm(Tape<S>& tp, int x) {
  const S nrm = std::sqrt(tp.val(x).data.square().sum());
  Tensor<S> y = Tensor<S>::scalar(nrm);
  auto* t = &tp;
  const int id = tp.size();
  return tp.make(std::move(y), [t, x, id, nrm] {
    if (nrm <= S(0)) return;
    t->add_grad(x, t->val(x).data * (t->grad(id).data[0] / nrm));
  });
}

/// sum_i mask(i) * sum_c |x(c,i)| with a (1,H,W) mask broadcast over channels.
template <typename S>
int masked_abs_sum(Tape<S>& tp, int x, Tensor<S> mask) {
  const Tensor<S>& xv = tp.val(x);
  if (mask.c != 1 || mask.h != xv.h || mask.w != xv.w)
    throw DimensionMismatchError("masked_abs_sum mask " + mask.shape_str() + " vs " +
                                 xv.shape_str());
  S v = 0;
  for (int c = 0; c < xv.c; ++c) v += (xv.plane(c).abs() * mask.data).sum();
  Tensor<S> y = Tensor<S>::scalar(v);
  auto* t = &tp;
  const int id = tp.size();
  return tp.make(std::move(y), [t, x, id, mask = std::move(mask)] {
    const Tensor<S>& xv = t->val(x);
    typename Tensor<S>::Array g(xv.size());
    const S go = t->grad(id).data[0];
    const int n = xv.plane_size();
    for (int c = 0; c < xv.c; ++c)
      g.segment(std::ptrdiff_t(c) * n, n) = xv.plane(c).sign() * mask.data * go;
    t->add_grad(x, g);
  });
}

/// Per-channel spatial mean, output (C,1,1).
template <typename S>
int channel_mean(Tape<S>& tp, int x) {
  const Tensor<S>& xv = tp.val(x);
  Tensor<S> y(xv.c, 1, 1);
  for (int c = 0; c < xv.c; ++c) y.data[c] = xv.plane(c).mean();
  auto* t = &tp;
  const int id = tp.size();
  return tp.make(std::move(y), [t, x, id] {
    const Tensor<S>& xv = t->val(x);
    const int n = xv.plane_size();
    typename Tensor<S>::Array g(xv.size());
    for (int c = 0; c < xv.c; ++c)
      g.segment(std::ptrdiff_t(c) * n, n).setConstant(t->grad(id).data[c] / S(n));
    t->add_grad(x, g);
  });
}

/// Per-channel population std with eps under the root, output (C,1,1).
template <typename S>
int channel_std(Tape<S>& tp, int x, S eps = S(1e-8)) {
  const Tensor<S>& xv = tp.val(x);
  const int n = xv.plane_size();
  Tensor<S> y(xv.c, 1, 1), mean(xv.c, 1, 1);
  for (int c = 0; c < xv.c; ++c) {
    mean.data[c] = xv.plane(c).mean();
    y.data[c] = std::sqrt((xv.plane(c) - mean.data[c]).square().mean() + eps);
  }
  auto* t = &tp;
  const int id = tp.size();
  return tp.make(std::move(y), [t, x, id, mean = std::move(mean), n] {
    const Tensor<S>& xv = t->val(x);
    typename Tensor<S>::Array g(xv.size());
    for (int c = 0; c < xv.c; ++c) {
      const S s = t->val(id).data[c];
      g.segment(std::ptrdiff_t(c) * n, n) =
          (xv.plane(c) - mean.data[c]) * (t->grad(id).data[c] / (S(n) * s));
    }
    t->add_grad(x, g);
  });
}

/// ITU-R 601 luma from an RGB frame: (3,H,W) -> (1,H,W).
template <typename S>
int luminance(Tape<S>& tp, int x) {
  const Tensor<S>& xv = tp.val(x);
  if (xv.c != 3) throw ShapeError("luminance needs 3 channels, got " + xv.shape_str());
  Tensor<S> y(1, xv.h, xv.w);
  y.data = S(0.299) * xv.plane(0) + S(0.587) * xv.plane(1) + S(0.114) * xv.plane(2);
  auto* t = &tp;
  const int id = tp.size();
  return tp.make(std::move(y), [t, x, id] {
    const int n = t->val(x).plane_size();
    typename Tensor<S>::Array g(3 * std::ptrdiff_t(n));
    const auto& go = t->grad(id).data;
    g.segment(0, n) = S(0.299) * go;
    g.segment(n, n) = S(0.587) * go;
    g.segment(2 * std::ptrdiff_t(n), n) = S(0.114) * go;
    t->add_grad(x, g);
  });
}

/// Stacks K same-sized tensors as rows of a (1, K, N) matrix.
template <typename S>
int vstack_rows(Tape<S>& tp, const std::vector<int>& rows) {
  if (rows.empty()) throw ShapeError("vstack_rows of nothing");
  const int n = tp.val(rows[0]).size();
  for (int r : rows)
    if (tp.val(r).size() != n) throw DimensionMismatchError("vstack_rows: unequal row sizes");
  Tensor<S> y(1, int(rows.size()), n);
  for (std::size_t k = 0; k < rows.size(); ++k)
    y.data.segment(std::ptrdiff_t(k) * n, n) = tp.val(rows[k]).data;
  auto* t = &tp;
  const int id = tp.size();
  return tp.make(std::move(y), [t, rows, n, id] {
    for (std::size_t k = 0; k < rows.size(); ++k)
      t->add_grad(rows[k], t->grad(id).data.segment(std::ptrdiff_t(k) * n, n));
  });
}

/// Nuclear norm of a (1, R, C) matrix node. Subgradient U·V^T from the thin
/// SVD, with singular values below 1e-8 dropped at nonsmooth points.
template <typename S>
int nuclear_norm(Tape<S>& tp, int x) {
  const Tensor<S>& xv = tp.val(x);
  if (xv.c != 1) throw ShapeError("nuclear_norm needs a (1,R,C) matrix, got " + xv.shape_str());
  using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
  // plane_mat is the (w x h) column-major view, i.e. the transpose; the
  // nuclear norm and U·V^T transpose cleanly.
  Mat m = Mat::Map(xv.data.data(), xv.w, xv.h);
  Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const S nrm = svd.singularValues().sum();
  Mat sub = Mat::Zero(xv.w, xv.h);
  for (int i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()[i] > S(1e-8))
      sub += svd.matrixU().col(i) * svd.matrixV().col(i).transpose();
  Tensor<S> y = Tensor<S>::scalar(nrm);
  auto* t = &tp;
  const int id = tp.size();
  return tp.make(std::move(y), [t, x, id, sub = std::move(sub)] {
    typename Tensor<S>::Array g =
        Tensor<S>::Array::Map(sub.data(), sub.size()) * t->grad(id).data[0];
    t->add_grad(x, g);
  });
}

}  // namespace ops
}  // namespace deflicker
