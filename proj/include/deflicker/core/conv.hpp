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

#include <Eigen/Dense>

#include "deflicker/core/tensor.hpp"

namespace deflicker {

// GEMM-based 2D convolution. Weights are stored as a Tensor of shape
// (Co, Ci*kh, kw) so that as_cols() yields the (P x Co) weight matrix with
// P = Ci*kh*kw and patch index p = ci*kh*kw + ky*kw + kx. im2col produces the
// (L x P) patch matrix with L = oh*ow output positions; the forward pass is a
// single (L x P)·(P x Co) product written straight into the output's column
// view. Zero padding, square or rectangular kernels, any positive stride.

inline int conv_out_size(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

template <typename Scalar>
void im2col(const Tensor<Scalar>& x, int kh, int kw, int stride, int pad,
            Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& cols) {
  const int oh = conv_out_size(x.h, kh, stride, pad);
  const int ow = conv_out_size(x.w, kw, stride, pad);
  const int L = oh * ow;
  const int P = x.c * kh * kw;
  cols.resize(L, P);
  for (int p = 0; p < P; ++p) {
    const int ci = p / (kh * kw);
    const int ky = (p / kw) % kh;
    const int kx = p % kw;
    Scalar* col = cols.data() + std::ptrdiff_t(p) * L;
    for (int oy = 0; oy < oh; ++oy) {
      const int iy = oy * stride - pad + ky;
      if (iy < 0 || iy >= x.h) {
        for (int ox = 0; ox < ow; ++ox) col[oy * ow + ox] = Scalar(0);
        continue;
      }
      for (int ox = 0; ox < ow; ++ox) {
        const int ix = ox * stride - pad + kx;
        col[oy * ow + ox] = (ix >= 0 && ix < x.w) ? x(ci, iy, ix) : Scalar(0);
      }
    }
  }
}

template <typename Scalar>
void col2im(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& cols, int kh, int kw,
            int stride, int pad, Tensor<Scalar>& x) {
  const int oh = conv_out_size(x.h, kh, stride, pad);
  const int ow = conv_out_size(x.w, kw, stride, pad);
  const int P = x.c * kh * kw;
  for (int p = 0; p < P; ++p) {
    const int ci = p / (kh * kw);
    const int ky = (p / kw) % kh;
    const int kx = p % kw;
    const Scalar* col = cols.data() + std::ptrdiff_t(p) * (oh * ow);
    for (int oy = 0; oy < oh; ++oy) {
      const int iy = oy * stride - pad + ky;
      if (iy < 0 || iy >= x.h) continue;
      for (int ox = 0; ox < ow; ++ox) {
        const int ix = ox * stride - pad + kx;
        if (ix >= 0 && ix < x.w) x(ci, iy, ix) += col[oy * ow + ox];
      }
    }
  }
}

template <typename Scalar>
void check_conv_weight(const Tensor<Scalar>& x, const Tensor<Scalar>& w, int kh, int kw) {
  if (w.h != x.c * kh || w.w != kw)
    throw DimensionMismatchError("conv weight " + w.shape_str() + " incompatible with input " +
                                 x.shape_str() + " and kernel " + std::to_string(kh) + "x" +
                                 std::to_string(kw));
}

/// y(co, oy, ox) = bias[co] + sum_{ci,ky,kx} w[co,ci,ky,kx] * x(ci, oy*s-p+ky, ox*s-p+kx)
template <typename Scalar>
Tensor<Scalar> conv_forward(const Tensor<Scalar>& x, const Tensor<Scalar>& w,
                            const Tensor<Scalar>& bias, int kh, int kw, int stride, int pad) {
  check_conv_weight(x, w, kh, kw);
  const int oh = conv_out_size(x.h, kh, stride, pad);
  const int ow = conv_out_size(x.w, kw, stride, pad);
  if (oh <= 0 || ow <= 0)
    throw DimensionMismatchError("conv output would be empty for input " + x.shape_str());
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> cols;
  im2col(x, kh, kw, stride, pad, cols);
  Tensor<Scalar> y(w.c, oh, ow);
  y.as_cols().noalias() = cols * w.as_cols();
  if (!bias.empty()) {
    if (bias.c != w.c)
      throw DimensionMismatchError("conv bias " + bias.shape_str() + " vs Co=" + std::to_string(w.c));
    for (int co = 0; co < w.c; ++co) y.plane(co) += bias.data[co];
  }
  return y;
}

/// Gradient w.r.t. the input of conv_forward; (th, tw) are the input dims,
/// passed explicitly because stride > 1 makes them ambiguous. Also serves as
/// the forward pass of transposed convolution.
template <typename Scalar>
Tensor<Scalar> conv_backward_data(const Tensor<Scalar>& dy, const Tensor<Scalar>& w, int kh,
                                  int kw, int stride, int pad, int th, int tw) {
  if (dy.c != w.c)
    throw DimensionMismatchError("conv backward: dy channels " + std::to_string(dy.c) +
                                 " vs Co=" + std::to_string(w.c));
  const int ci = w.h / kh;
  Tensor<Scalar> dx(ci, th, tw);
  if (conv_out_size(th, kh, stride, pad) != dy.h || conv_out_size(tw, kw, stride, pad) != dy.w)
    throw DimensionMismatchError("conv backward: target " + dx.shape_str() +
                                 " does not map to " + dy.shape_str());
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> dcols;
  dcols.noalias() = dy.as_cols() * w.as_cols().transpose();
  col2im(dcols, kh, kw, stride, pad, dx);
  return dx;
}

/// Gradient w.r.t. the weights: dW = im2col(x)^T * dy_cols, shaped like w.
template <typename Scalar>
Tensor<Scalar> conv_backward_weight(const Tensor<Scalar>& x, const Tensor<Scalar>& dy, int kh,
                                    int kw, int stride, int pad) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> cols;
  im2col(x, kh, kw, stride, pad, cols);
  Tensor<Scalar> dw(dy.c, x.c * kh, kw);
  dw.as_cols().noalias() = cols.transpose() * dy.as_cols();
  return dw;
}

/// Gradient w.r.t. the bias: per-channel sum of dy.
template <typename Scalar>
Tensor<Scalar> conv_backward_bias(const Tensor<Scalar>& dy) {
  Tensor<Scalar> db(dy.c, 1, 1);
  for (int co = 0; co < dy.c; ++co) db.data[co] = dy.plane(co).sum();
  return db;
}

}  // namespace deflicker
