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
#include <map>
#include <set>
#include <string>
#include <vector>

#include "deflicker/core/ops.hpp"
#include "deflicker/core/rng.hpp"
#include "deflicker/video/frame.hpp"

namespace deflicker {

template <typename S>
using FeatureBlocks = std::map<std::string, Tensor<S>>;

inline const std::vector<std::string>& all_feature_blocks() {
  static const std::vector<std::string> v = {"relu1_2", "relu2_2", "relu3_3", "relu4_3"};
  return v;
}

template <typename S>
struct ChannelStats {
  Tensor<S> mean;  // (C,1,1)
  Tensor<S> std;   // (C,1,1), population std with eps under the root
};

/// Per-channel spatial moments of an activation map. Population (biased)
/// variance, eps = 1e-8 under the square root so constant maps stay
/// differentiable.
template <typename S>
ChannelStats<S> channel_stats(const Tensor<S>& block, S eps = S(1e-8)) {
  if (block.empty()) throw ShapeError("channel_stats of empty block");
  ChannelStats<S> st{Tensor<S>(block.c, 1, 1), Tensor<S>(block.c, 1, 1)};
  for (int c = 0; c < block.c; ++c) {
    const S m = block.plane(c).mean();
    st.mean.data[c] = m;
    st.std.data[c] = std::sqrt((block.plane(c) - m).square().mean() + eps);
  }
  return st;
}

/// Abstract multi-block feature extractor (the perceptual backbone).
template <typename S>
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual FeatureBlocks<S> extract(const Frame<S>& frame,
                                   const std::set<std::string>& blocks) const = 0;
  virtual std::string descriptor() const = 0;
};

/// VGG19-topology convolutional extractor through conv4_3, with taps at
/// relu1_2 / relu2_2 / relu3_3 / relu4_3. Two backends share the code path:
///   - fixed_random(seed): narrow deterministic random weights, no input
///     normalization; the test/CI backend (losses are weight-agnostic).
///   - pretrained weight file: full VGG19 widths with ImageNet input
///     normalization applied inside extract.
template <typename S>
class ConvFeatureNet : public FeatureExtractor<S> {
 public:
  struct Layer {
    enum Kind { kConv, kPool } kind;
    std::string name;  // conv name for kConv
    int cin = 0, cout = 0;
    std::string tap;  // block id emitted after this layer's relu, if any
  };

  static ConvFeatureNet fixed_random(std::uint64_t seed) {
    ConvFeatureNet net(narrow_widths());
    net.descriptor_ = "fixed_random(seed=" + std::to_string(seed) + ")";
    net.normalize_input_ = false;
    Rng rng(seed);
    for (auto& [name, wb] : net.params_) {
      const int fan_in = wb.first.h * wb.first.w;  // ci*kh*kw
      const S stddev = std::sqrt(S(2) / S(fan_in));
      for (std::ptrdiff_t i = 0; i < wb.first.data.size(); ++i)
        wb.first.data[i] = S(rng.normal(0.0, double(stddev)));
      for (std::ptrdiff_t i = 0; i < wb.second.data.size(); ++i)
        wb.second.data[i] = S(rng.normal(0.0, 0.1));
    }
    return net;
  }

  static ConvFeatureNet from_weight_file(const std::string& path) {
    ConvFeatureNet net(vgg_widths());
    net.descriptor_ = "pretrained_file(" + path + ")";
    net.normalize_input_ = true;
    net.load_weights(path);
    return net;
  }

  const std::string& descriptor_string() const { return descriptor_; }
  std::string descriptor() const override { return descriptor_; }

  /// Minimum frame side length required by a block (floor pooling needs at
  /// least one full 2x2 window per pool stage preceding the tap).
  static int min_frame_side(const std::string& block) {
    if (block == "relu1_2") return 2;
    if (block == "relu2_2") return 4;
    if (block == "relu3_3") return 8;
    if (block == "relu4_3") return 16;
    throw SpecError("unknown feature block: " + block);
  }

  /// Differentiable extraction on a tape; returns block id -> node id.
  std::map<std::string, int> extract_tape(Tape<S>& tp, int frame,
                                          const std::set<std::string>& blocks) const {
    check_blocks(tp.val(frame), blocks);
    int x = frame;
    if (normalize_input_) {
      Tensor<S> scale_m(3, tp.val(frame).h, tp.val(frame).w);
      Tensor<S> shift(3, tp.val(frame).h, tp.val(frame).w);
      static const double mean[3] = {0.485, 0.456, 0.406}, sd[3] = {0.229, 0.224, 0.225};
      for (int c = 0; c < 3; ++c) {
        scale_m.plane(c).setConstant(S(1.0 / sd[c]));
        shift.plane(c).setConstant(S(-mean[c] / sd[c]));
      }
      x = ops::mul_const(tp, x, scale_m);
      x = ops::add(tp, x, tp.leaf(shift));
    }
    std::map<std::string, int> out;
    std::size_t remaining = blocks.size();
    for (const auto& layer : layers_) {
      if (remaining == 0) break;
      if (layer.kind == Layer::kPool) {
        x = ops::maxpool2(tp, x);
        continue;
      }
      const auto& wb = params_.at(layer.name);
      const int w = tp.leaf(wb.first);
      const int b = tp.leaf(wb.second);
      x = ops::conv2d(tp, x, w, b, 3, 3, 1, 1);
      x = ops::relu(tp, x);
      if (!layer.tap.empty() && blocks.count(layer.tap)) {
        out[layer.tap] = x;
        --remaining;
      }
    }
    return out;
  }

  FeatureBlocks<S> extract(const Frame<S>& frame,
                           const std::set<std::string>& blocks) const override {
    Tape<S> tp;
    const int x = tp.leaf(frame);
    auto ids = extract_tape(tp, x, blocks);
    FeatureBlocks<S> out;
    for (auto& [name, id] : ids) out[name] = tp.val(id);
    return out;
  }

  const std::vector<Layer>& layers() const { return layers_; }
  const std::pair<Tensor<S>, Tensor<S>>& conv_params(const std::string& name) const {
    return params_.at(name);
  }
  bool normalizes_input() const { return normalize_input_; }

 private:
  explicit ConvFeatureNet(const std::vector<int>& widths) {
    // widths: channel count per block; VGG19 conv counts 2,2,4,4 with taps
    // at the 2nd, 2nd, 3rd, 3rd conv of each block.
    static const int counts[4] = {2, 2, 4, 4};
    static const char* taps[4] = {"relu1_2", "relu2_2", "relu3_3", "relu4_3"};
    static const int tap_at[4] = {2, 2, 3, 3};
    int cin = 3;
    for (int blk = 0; blk < 4; ++blk) {
      const int cout = widths[std::size_t(blk)];
      const int nconv = (blk == 3) ? tap_at[3] : counts[blk];  // block 4 stops at its tap
      for (int i = 1; i <= nconv; ++i) {
        Layer l;
        l.kind = Layer::kConv;
        l.name = "conv" + std::to_string(blk + 1) + "_" + std::to_string(i);
        l.cin = cin;
        l.cout = cout;
        if (i == tap_at[blk]) l.tap = taps[blk];
        layers_.push_back(l);
        params_[l.name] = {Tensor<S>(cout, cin * 3, 3), Tensor<S>(cout, 1, 1)};
        cin = cout;
      }
      if (blk < 3) layers_.push_back(Layer{Layer::kPool, "", 0, 0, ""});
    }
  }

  static std::vector<int> narrow_widths() { return {8, 16, 32, 64}; }
  static std::vector<int> vgg_widths() { return {64, 128, 256, 512}; }

  void check_blocks(const Frame<S>& frame, const std::set<std::string>& blocks) const {
    if (frame.c != 3) throw ShapeError("feature extraction needs RGB frames");
    for (const auto& b : blocks) {
      const int need = min_frame_side(b);
      if (frame.h < need || frame.w < need)
        throw FrameTooSmallError("frame " + frame.shape_str() + " too small for " + b +
                                 " (needs >= " + std::to_string(need) + "x" +
                                 std::to_string(need) + ")");
    }
  }

  // Weight file: magic "DFWT0001", uint32 entry count; each entry is
  // uint32 name length, name bytes, uint32 rank, uint32 dims[rank], then
  // float32 values in row-major (co, ci, kh, kw) / (co) order, little-endian.
  void load_weights(const std::string& path) {
    std::FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw IoError("cannot open weight file: " + path);
    auto fail = [&](const std::string& msg) {
      std::fclose(fp);
      throw DecodeError(path + ": " + msg);
    };
    char magic[8];
    if (std::fread(magic, 1, 8, fp) != 8 || std::memcmp(magic, "DFWT0001", 8) != 0)
      fail("bad weight-file magic");
    std::uint32_t count = 0;
    if (std::fread(&count, 4, 1, fp) != 1) fail("truncated header");
    std::map<std::string, std::vector<float>> arrays;
    std::map<std::string, std::vector<std::uint32_t>> shapes;
    for (std::uint32_t e = 0; e < count; ++e) {
      std::uint32_t nlen = 0, rank = 0;
      if (std::fread(&nlen, 4, 1, fp) != 1 || nlen == 0 || nlen > 256) fail("bad entry name");
      std::string name(nlen, '\0');
      if (std::fread(name.data(), 1, nlen, fp) != nlen) fail("truncated name");
      if (std::fread(&rank, 4, 1, fp) != 1 || rank == 0 || rank > 4) fail("bad rank");
      std::vector<std::uint32_t> dims(rank);
      std::size_t total = 1;
      for (auto& d : dims) {
        if (std::fread(&d, 4, 1, fp) != 1 || d == 0) fail("bad dims");
        total *= d;
      }
      std::vector<float> vals(total);
      if (std::fread(vals.data(), 4, total, fp) != total) fail("truncated values for " + name);
      arrays[name] = std::move(vals);
      shapes[name] = std::move(dims);
    }
    std::fclose(fp);
    for (auto& [name, wb] : params_) {
      const auto wit = arrays.find(name + ".weight");
      const auto bit = arrays.find(name + ".bias");
      if (wit == arrays.end() || bit == arrays.end())
        throw DecodeError(path + ": missing arrays for layer " + name);
      if (std::ptrdiff_t(wit->second.size()) != wb.first.data.size() ||
          std::ptrdiff_t(bit->second.size()) != wb.second.data.size())
        throw DecodeError(path + ": shape mismatch for layer " + name);
      for (std::ptrdiff_t i = 0; i < wb.first.data.size(); ++i)
        wb.first.data[i] = S(wit->second[std::size_t(i)]);
      for (std::ptrdiff_t i = 0; i < wb.second.data.size(); ++i)
        wb.second.data[i] = S(bit->second[std::size_t(i)]);
    }
  }

  std::vector<Layer> layers_;
  std::map<std::string, std::pair<Tensor<S>, Tensor<S>>> params_;  // name -> (weight, bias)
  std::string descriptor_;
  bool normalize_input_ = false;
};

}  // namespace deflicker
