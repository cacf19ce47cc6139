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

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "deflicker/core/io_audit.hpp"
#include "deflicker/video/frame.hpp"

namespace deflicker {

enum class FlowProvenance { ground_truth, estimated };

/// Dense displacement field F_{target,source}: displacements are anchored at
/// target-time pixel positions and point into the source frame, so
/// warp(frame_source, F) produces a frame aligned to target time (backward
/// warping convention). Plane 0 is dx, plane 1 is dy, in pixels.
template <typename S>
struct FlowField {
  Tensor<S> d;  // (2, H, W)
  int target_time = 0;  // anchor time (0-based internal index)
  int source_time = 0;  // frame being warped
  FlowProvenance provenance = FlowProvenance::ground_truth;

  FlowField() = default;
  FlowField(int h, int w) : d(2, h, w) {}

  int h() const { return d.h; }
  int w() const { return d.w; }
  S dx(int y, int x) const { return d(0, y, x); }
  S dy(int y, int x) const { return d(1, y, x); }
  S& dx(int y, int x) { return d(0, y, x); }
  S& dy(int y, int x) { return d(1, y, x); }

  static FlowField constant(int h, int w, S dx, S dy) {
    FlowField f(h, w);
    f.d.plane(0).setConstant(dx);
    f.d.plane(1).setConstant(dy);
    return f;
  }

  void validate() const {
    if (!d.all_finite()) throw ShapeError("flow field has non-finite displacements");
  }
};

// Binary ".flo" layout: float32 magic 202021.25, int32 width, int32 height,
// then row-major interleaved (dx, dy) little-endian float32 pairs. Matches
// the standard optical-flow interchange format so externally estimated flows
// are ingested bit-exactly.
inline constexpr float kFloMagic = 202021.25f;

template <typename S>
void write_flo(const std::string& path, const FlowField<S>& flow) {
  std::FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw IoError("cannot open for write: " + path);
  const std::int32_t w = flow.w(), h = flow.h();
  std::fwrite(&kFloMagic, 4, 1, fp);
  std::fwrite(&w, 4, 1, fp);
  std::fwrite(&h, 4, 1, fp);
  std::vector<float> row(std::size_t(w) * 2);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      row[std::size_t(x) * 2] = float(flow.dx(y, x));
      row[std::size_t(x) * 2 + 1] = float(flow.dy(y, x));
    }
    if (std::fwrite(row.data(), 4, row.size(), fp) != row.size()) {
      std::fclose(fp);
      throw IoError("short write: " + path);
    }
  }
  std::fclose(fp);
}

template <typename S>
FlowField<S> read_flo(const std::string& path) {
  io_audit::note_flow_read();
  std::FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw IoError("cannot open: " + path);
  float magic = 0;
  std::int32_t w = 0, h = 0;
  if (std::fread(&magic, 4, 1, fp) != 1 || magic != kFloMagic) {
    std::fclose(fp);
    throw DecodeError(path + ": bad flow magic");
  }
  if (std::fread(&w, 4, 1, fp) != 1 || std::fread(&h, 4, 1, fp) != 1 || w < 1 || h < 1) {
    std::fclose(fp);
    throw DecodeError(path + ": bad flow dimensions");
  }
  FlowField<S> flow(h, w);
  std::vector<float> row(std::size_t(w) * 2);
  for (int y = 0; y < h; ++y) {
    if (std::fread(row.data(), 4, row.size(), fp) != row.size()) {
      std::fclose(fp);
      throw DecodeError(path + ": truncated flow data");
    }
    for (int x = 0; x < w; ++x) {
      flow.dx(y, x) = S(row[std::size_t(x) * 2]);
      flow.dy(y, x) = S(row[std::size_t(x) * 2 + 1]);
    }
  }
  std::fclose(fp);
  return flow;
}

/// Pluggable frame-pair flow estimator (stand-in for an external network).
template <typename S>
class FlowProvider {
 public:
  virtual ~FlowProvider() = default;
  virtual FlowField<S> flow(const Frame<S>& frame_a, const Frame<S>& frame_b) = 0;
};

/// Trivial provider: all-zero flow. Exact for static scenes; useful as a
/// degenerate baseline and in tests.
template <typename S>
class ZeroFlowProvider : public FlowProvider<S> {
 public:
  FlowField<S> flow(const Frame<S>& frame_a, const Frame<S>& frame_b) override {
    require_same_shape(frame_a, frame_b, "flow");
    FlowField<S> f(frame_a.h, frame_a.w);
    f.provenance = FlowProvenance::estimated;
    return f;
  }
};

/// Flows between frames of one sequence, keyed by 0-based frame indices.
/// flow_between(to, from) returns F_{to,from}: warp(frames[from], F) aligns
/// to time `to`.
template <typename S>
class FlowPairSource {
 public:
  virtual ~FlowPairSource() = default;
  virtual FlowField<S> flow_between(int to, int from) = 0;
};

/// Analytic source for synthetic scenes whose content at time t is the base
/// texture translated by offset s_t: F_{to,from} is the constant field
/// s_from - s_to.
template <typename S>
class GroundTruthFlowSource : public FlowPairSource<S> {
 public:
  GroundTruthFlowSource(int h, int w, std::vector<std::pair<double, double>> offsets)
      : h_(h), w_(w), offsets_(std::move(offsets)) {}

  FlowField<S> flow_between(int to, int from) override {
    if (to < 0 || from < 0 || to >= int(offsets_.size()) || from >= int(offsets_.size()))
      throw IndexError("flow_between(" + std::to_string(to) + "," + std::to_string(from) +
                       ") outside T=" + std::to_string(offsets_.size()));
    FlowField<S> f = FlowField<S>::constant(h_, w_, S(offsets_[from].first - offsets_[to].first),
                                            S(offsets_[from].second - offsets_[to].second));
    f.target_time = to;
    f.source_time = from;
    return f;
  }

 private:
  int h_, w_;
  std::vector<std::pair<double, double>> offsets_;  // per-frame (sx, sy)
};

/// Filename for F_{to,from} under a flow directory; 1-based indices in the
/// name to match the documentation convention.
inline std::string flow_file_name(int to, int from) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "flow-%04d-%04d.flo", to + 1, from + 1);
  return buf;
}

/// Reads precomputed flow files (e.g. external estimator outputs) on demand,
/// with caching. Missing pair -> MissingFlowError.
template <typename S>
class FileFlowSource : public FlowPairSource<S> {
 public:
  explicit FileFlowSource(std::string dir) : dir_(std::move(dir)) {}

  FlowField<S> flow_between(int to, int from) override {
    const auto key = std::make_pair(to, from);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    const std::string path = (std::filesystem::path(dir_) / flow_file_name(to, from)).string();
    if (!std::filesystem::exists(path))
      throw MissingFlowError("no flow file for pair (" + std::to_string(to + 1) + "," +
                             std::to_string(from + 1) + "): " + path);
    FlowField<S> f = read_flo<S>(path);
    f.target_time = to;
    f.source_time = from;
    f.provenance = FlowProvenance::estimated;
    cache_.emplace(key, f);
    return f;
  }

 private:
  std::string dir_;
  std::map<std::pair<int, int>, FlowField<S>> cache_;
};

/// Adapts a frame-pair FlowProvider to the sequence-indexed interface.
template <typename S>
class ProviderFlowSource : public FlowPairSource<S> {
 public:
  ProviderFlowSource(std::shared_ptr<FlowProvider<S>> provider, const FrameSequence<S>* frames)
      : provider_(std::move(provider)), frames_(frames) {}

  FlowField<S> flow_between(int to, int from) override {
    if (to < 0 || from < 0 || to >= frames_->size() || from >= frames_->size())
      throw IndexError("flow_between outside sequence");
    FlowField<S> f = provider_->flow((*frames_)[to], (*frames_)[from]);
    f.target_time = to;
    f.source_time = from;
    return f;
  }

 private:
  std::shared_ptr<FlowProvider<S>> provider_;
  const FrameSequence<S>* frames_;
};

}  // namespace deflicker
