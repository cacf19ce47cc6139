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

#include <string>

#include "deflicker/core/errors.hpp"

namespace deflicker {

/// Dense C x H x W tensor, plane-major storage: element (c, y, x) lives at
/// flat index c*h*w + y*w + x. Scalars are 1x1x1, per-channel vectors Cx1x1,
/// matrices 1xRxC. Plane-major layout makes each channel a contiguous column
/// of the (h*w, c) matrix view used by the GEMM-based convolutions.
template <typename Scalar>
struct Tensor {
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  using MatrixMap = Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>>;
  using ConstMatrixMap =
      Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>>;

  int c = 0, h = 0, w = 0;
  Array data;

  Tensor() = default;
  Tensor(int c_, int h_, int w_) : c(c_), h(h_), w(w_), data(Array::Zero(std::ptrdiff_t(c_) * h_ * w_)) {}

  static Tensor zeros(int c, int h, int w) { return Tensor(c, h, w); }

  static Tensor constant(int c, int h, int w, Scalar v) {
    Tensor t(c, h, w);
    t.data.setConstant(v);
    return t;
  }

  static Tensor scalar(Scalar v) { return constant(1, 1, 1, v); }

  int size() const { return c * h * w; }
  int plane_size() const { return h * w; }
  bool empty() const { return size() == 0; }

  bool same_shape(const Tensor& o) const { return c == o.c && h == o.h && w == o.w; }

  std::string shape_str() const {
    return std::to_string(c) + "x" + std::to_string(h) + "x" + std::to_string(w);
  }

  Scalar& operator()(int ci, int y, int x) { return data[std::ptrdiff_t(ci) * h * w + std::ptrdiff_t(y) * w + x]; }
  Scalar operator()(int ci, int y, int x) const {
    return data[std::ptrdiff_t(ci) * h * w + std::ptrdiff_t(y) * w + x];
  }

  auto plane(int ci) { return data.segment(std::ptrdiff_t(ci) * plane_size(), plane_size()); }
  auto plane(int ci) const { return data.segment(std::ptrdiff_t(ci) * plane_size(), plane_size()); }

  /// (h*w, c) matrix view; column ci is channel plane ci.
  MatrixMap as_cols() { return MatrixMap(data.data(), plane_size(), c); }
  ConstMatrixMap as_cols() const { return ConstMatrixMap(data.data(), plane_size(), c); }

  /// (h, w) matrix view of one plane, row-major rows mapped via transpose of
  /// the (w, h) column-major map.
  MatrixMap plane_mat(int ci) {
    return MatrixMap(data.data() + std::ptrdiff_t(ci) * plane_size(), w, h);
  }

  bool all_finite() const { return data.allFinite(); }

  Scalar value() const {
    if (size() != 1) throw ShapeError("scalar access on tensor of shape " + shape_str());
    return data[0];
  }

  template <typename Other>
  Tensor<Other> cast() const {
    Tensor<Other> t;
    t.c = c;
    t.h = h;
    t.w = w;
    t.data = data.template cast<Other>();
    return t;
  }
};

template <typename Scalar>
void require_same_shape(const Tensor<Scalar>& a, const Tensor<Scalar>& b, const char* what) {
  if (!a.same_shape(b))
    throw DimensionMismatchError(std::string(what) + ": " + a.shape_str() + " vs " + b.shape_str());
}

}  // namespace deflicker
