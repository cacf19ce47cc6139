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

#include <functional>
#include <vector>

#include "deflicker/core/tensor.hpp"

namespace deflicker {

/// Reverse-mode autodiff tape over Tensor<Scalar>. Nodes are created in
/// program order and hold a value plus a backward closure that scatters the
/// node's gradient into its inputs. backward() walks nodes newest-first and
/// skips any node whose gradient was never touched.
template <typename Scalar>
class Tape {
 public:
  using T = Tensor<Scalar>;

  Tape() = default;
  Tape(const Tape&) = delete;             // op closures capture the tape's address
  Tape& operator=(const Tape&) = delete;

  struct Node {
    T value;
    T grad;                            // allocated lazily by add_grad
    bool touched = false;              // true once any gradient reached it
    std::function<void()> backward;    // empty for leaves
  };

  int make(T value, std::function<void()> backward = {}) {
    Node n;
    n.value = std::move(value);
    n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return int(nodes_.size()) - 1;
  }

  int leaf(T value) { return make(std::move(value)); }

  const T& val(int id) const { return nodes_[id].value; }
  T& val(int id) { return nodes_[id].value; }

  const T& grad(int id) const { return nodes_[id].grad; }
  bool touched(int id) const { return nodes_[id].touched; }

  void add_grad(int id, const typename T::Array& g) {
    Node& n = nodes_[id];
    if (!n.touched) {
      n.grad = T::zeros(n.value.c, n.value.h, n.value.w);
      n.touched = true;
    }
    n.grad.data += g;
  }

  void add_grad_scalar(int id, Scalar g) {
    Node& n = nodes_[id];
    if (!n.touched) {
      n.grad = T::zeros(n.value.c, n.value.h, n.value.w);
      n.touched = true;
    }
    n.grad.data[0] += g;
  }

  /// Seeds d(root)/d(root) = 1 (root must be scalar) and back-propagates.
  void backward(int root) {
    if (nodes_[root].value.size() != 1)
      throw ShapeError("backward root must be scalar, got " + nodes_[root].value.shape_str());
    add_grad_scalar(root, Scalar(1));
    for (int i = root; i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.touched && n.backward) n.backward();
    }
  }

  int size() const { return int(nodes_.size()); }

  void clear() { nodes_.clear(); }

 private:
  std::vector<Node> nodes_;
};

}  // namespace deflicker
