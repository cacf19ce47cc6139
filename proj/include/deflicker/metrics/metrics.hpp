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

#include <memory>
#include <set>
#include <string>

#include "deflicker/features/feature_net.hpp"
#include "deflicker/flow/warp.hpp"

namespace deflicker {

/// Evaluation scores of one video. Every consecutive pair is either counted
/// in the warping error or skipped (entirely occluded), so
/// frames_counted + skipped_pairs == T - 1 always holds.
struct VideoScore {
  double warping_error = 0;
  double perceptual_distance = 0;
  int frames_counted = 0;
  int skipped_pairs = 0;
};

/// Per-frame-pair embedding distance for the perceptual metric.
template <typename S>
class PerceptualEmbedder {
 public:
  virtual ~PerceptualEmbedder() = default;
  virtual double distance(const Frame<S>& a, const Frame<S>& b) const = 0;
  virtual std::string descriptor() const = 0;
};

/// Mean absolute pixel difference; the degenerate embedder for tiny frames
/// and plumbing tests.
template <typename S>
class PixelL1Embedder : public PerceptualEmbedder<S> {
 public:
  double distance(const Frame<S>& a, const Frame<S>& b) const override {
    require_same_shape(a, b, "pixel_l1");
    return double((a.data - b.data).abs().mean());
  }
  std::string descriptor() const override { return "pixel_l1"; }
};

/// Convolutional feature distance: per-element mean L1 over each tapped
/// block, summed across blocks (the same block set the content loss uses).
template <typename S>
class FeatureDistanceEmbedder : public PerceptualEmbedder<S> {
 public:
  explicit FeatureDistanceEmbedder(ConvFeatureNet<S> net) : net_(std::move(net)) {}

  static FeatureDistanceEmbedder fixed_random(std::uint64_t seed) {
    return FeatureDistanceEmbedder(ConvFeatureNet<S>::fixed_random(seed));
  }

  double distance(const Frame<S>& a, const Frame<S>& b) const override {
    require_same_shape(a, b, "feature_distance");
    std::set<std::string> all(all_feature_blocks().begin(), all_feature_blocks().end());
    FeatureBlocks<S> fa = net_.extract(a, all);
    FeatureBlocks<S> fb = net_.extract(b, all);
    double d = 0;
    for (const auto& name : all_feature_blocks())
      d += double((fa.at(name).data - fb.at(name).data).abs().mean());
    return d;
  }

  std::string descriptor() const override { return "feature:" + net_.descriptor(); }

  const ConvFeatureNet<S>& net() const { return net_; }

 private:
  ConvFeatureNet<S> net_;
};

template <typename S>
struct WarpingErrorResult {
  double omega = 0;
  int frames_counted = 0;
  int skipped_pairs = 0;
};

/// Temporal warping error: mean over consecutive pairs of the non-occluded
/// mean squared error between frame t and frame t+1 warped to t via F_{t,t+1}.
/// A pair whose occlusion mask is entirely zero is skipped and counted as such.
template <typename S>
WarpingErrorResult<S> warping_error(const FrameSequence<S>& frames, FlowPairSource<S>& flows) {
  check_sequence(frames);
  if (frames.size() < 2) throw WindowTooShortError("warping error needs T >= 2");
  WarpingErrorResult<S> r;
  double sum = 0;
  for (int t = 0; t + 1 < frames.size(); ++t) {
    const FlowField<S> fwd = flows.flow_between(t, t + 1);  // anchored at t
    const FlowField<S> bwd = flows.flow_between(t + 1, t);
    const Tensor<S> mask = occlusion_mask(fwd, bwd);
    try {
      const Frame<S> warped = warp(frames[t + 1], fwd);
      sum += double(mean_nonoccluded_error(frames[t], warped, mask));
      ++r.frames_counted;
    } catch (const EmptyMaskError&) {
      ++r.skipped_pairs;
    }
  }
  r.omega = r.frames_counted > 0 ? sum / r.frames_counted : 0.0;
  return r;
}

/// Spec-shaped overload: flows are estimated between frames of `reference`
/// (conventionally the raw sequence I) and applied to `frames`.
template <typename S>
WarpingErrorResult<S> warping_error(const FrameSequence<S>& frames, FlowProvider<S>& provider,
                                    const FrameSequence<S>& reference) {
  if (reference.size() != frames.size())
    throw DimensionMismatchError("warping error reference length " +
                                 std::to_string(reference.size()) + " vs video " +
                                 std::to_string(frames.size()));
  auto shared = std::shared_ptr<FlowProvider<S>>(&provider, [](FlowProvider<S>*) {});
  ProviderFlowSource<S> source(shared, &reference);
  return warping_error(frames, source);
}

/// Mean embedding distance between aligned sequences over t = 2..T.
template <typename S>
double perceptual_distance(const FrameSequence<S>& a, const FrameSequence<S>& b,
                           const PerceptualEmbedder<S>& embedder) {
  if (a.size() != b.size())
    throw DimensionMismatchError("perceptual distance over unequal lengths: " +
                                 std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  if (a.size() < 2) throw WindowTooShortError("perceptual distance needs T >= 2");
  double sum = 0;
  for (int t = 1; t < a.size(); ++t) sum += embedder.distance(a[t], b[t]);
  return sum / (a.size() - 1);
}

/// Scores a triplet's output: warping error of the output sequence plus its
/// perceptual distance to the processed input.
template <typename S>
VideoScore score_video(const VideoTriplet<S>& video, FlowPairSource<S>& flows,
                       const PerceptualEmbedder<S>& embedder) {
  if (!video.output) throw MissingOutputError("triplet has no output to score");
  video.validate();
  const WarpingErrorResult<S> we = warping_error(*video.output, flows);
  VideoScore s;
  s.warping_error = we.omega;
  s.frames_counted = we.frames_counted;
  s.skipped_pairs = we.skipped_pairs;
  s.perceptual_distance = perceptual_distance(*video.output, video.processed, embedder);
  return s;
}

/// Sliding-window temporal average (clamped at the ends): a trivially smooth
/// but motion-blurred reference point for the metrics.
template <typename S>
FrameSequence<S> temporal_average_baseline(const FrameSequence<S>& frames, int radius = 2) {
  check_sequence(frames);
  if (radius < 0) throw SpecError("temporal average radius must be >= 0");
  FrameSequence<S> out;
  out.frame_rate = frames.frame_rate;
  for (int t = 0; t < frames.size(); ++t) {
    const int lo = std::max(0, t - radius), hi = std::min(frames.size() - 1, t + radius);
    Frame<S> acc = Tensor<S>::zeros(frames[t].c, frames[t].h, frames[t].w);
    for (int u = lo; u <= hi; ++u) acc.data += frames[u].data;
    acc.data /= S(hi - lo + 1);
    out.frames.push_back(std::move(acc));
  }
  return out;
}

}  // namespace deflicker
