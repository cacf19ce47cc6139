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

#include <optional>
#include <vector>

#include "deflicker/core/tensor.hpp"

namespace deflicker {

// A frame is a (3, H, W) tensor of intensities in [0,1]. Time indices are
// 1-based in documentation and CLI output (matching t = 1..T of the
// equations) and 0-based in storage: documented index t lives at frames[t-1].

template <typename S>
using Frame = Tensor<S>;

template <typename S>
struct FrameSequence {
  std::vector<Frame<S>> frames;
  std::optional<double> frame_rate;

  int size() const { return int(frames.size()); }
  bool empty() const { return frames.empty(); }
  Frame<S>& operator[](int i) { return frames[std::size_t(i)]; }
  const Frame<S>& operator[](int i) const { return frames[std::size_t(i)]; }
  int height() const { return frames.empty() ? 0 : frames[0].h; }
  int width() const { return frames.empty() ? 0 : frames[0].w; }
};

template <typename S>
void check_frame(const Frame<S>& f, const char* what = "frame") {
  if (f.c != 3) throw ShapeError(std::string(what) + " must have 3 channels, got " + f.shape_str());
  if (!f.all_finite() || (f.data < S(0)).any() || (f.data > S(1)).any())
    throw ShapeError(std::string(what) + " has values outside [0,1]");
}

template <typename S>
void check_sequence(const FrameSequence<S>& seq, const char* what = "sequence") {
  if (seq.empty()) throw NoFramesError(std::string(what) + " is empty");
  for (const auto& f : seq.frames)
    if (!f.same_shape(seq.frames[0]))
      throw DimensionMismatchError(std::string(what) + ": mixed frame dimensions " +
                                   f.shape_str() + " vs " + seq.frames[0].shape_str());
}

/// Aligned raw (I), processed (P), output (O) and backward-output (O')
/// sequences. output, when present, satisfies output[0] == processed[0].
template <typename S>
struct VideoTriplet {
  FrameSequence<S> raw;
  FrameSequence<S> processed;
  std::optional<FrameSequence<S>> output;
  std::optional<FrameSequence<S>> output_backward;

  int length() const { return raw.size(); }

  void validate() const {
    check_sequence(raw, "raw");
    check_sequence(processed, "processed");
    if (raw.size() != processed.size())
      throw DimensionMismatchError("raw/processed length mismatch: " +
                                   std::to_string(raw.size()) + " vs " +
                                   std::to_string(processed.size()));
    if (!raw[0].same_shape(processed[0]))
      throw DimensionMismatchError("raw/processed frame dimension mismatch");
    if (output) {
      if (output->size() != processed.size())
        throw DimensionMismatchError("output length mismatch");
      if (output->size() > 0 && ((*output)[0].data != processed[0].data).any())
        throw ShapeError("output[1] must equal processed[1] (first-frame identity)");
    }
  }
};

}  // namespace deflicker
