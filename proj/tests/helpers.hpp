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

#include <filesystem>
#include <string>

#include "deflicker/core/rng.hpp"
#include "deflicker/video/frame.hpp"

namespace testutil {

template <typename S>
deflicker::Tensor<S> random_tensor(deflicker::Rng& rng, int c, int h, int w, double lo = 0.0,
                                   double hi = 1.0) {
  deflicker::Tensor<S> t(c, h, w);
  for (Eigen::Index i = 0; i < t.data.size(); ++i) t.data[i] = S(rng.uniform(lo, hi));
  return t;
}

template <typename S>
deflicker::FrameSequence<S> random_sequence(deflicker::Rng& rng, int n, int h, int w,
                                            double lo = 0.0, double hi = 1.0) {
  deflicker::FrameSequence<S> seq;
  for (int t = 0; t < n; ++t) seq.frames.push_back(random_tensor<S>(rng, 3, h, w, lo, hi));
  return seq;
}

template <typename S>
bool bitwise_equal(const deflicker::Tensor<S>& a, const deflicker::Tensor<S>& b) {
  return a.same_shape(b) && (a.data == b.data).all();
}

template <typename S>
double max_abs_diff(const deflicker::Tensor<S>& a, const deflicker::Tensor<S>& b) {
  return double((a.data - b.data).abs().maxCoeff());
}

/// Relative error with an absolute floor, for comparing against oracles.
inline double rel_err(double got, double want, double floor = 1e-12) {
  const double denom = std::max(std::abs(want), floor);
  return std::abs(got - want) / denom;
}

/// Fresh scratch directory under the ctest working dir.
inline std::string scratch_dir(const std::string& name) {
  namespace fs = std::filesystem;
  const fs::path p = fs::temp_directory_path() / "deflicker_tests" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

}  // namespace testutil
