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

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "deflicker/core/ops.hpp"
#include "deflicker/core/rng.hpp"
#include "deflicker/video/frame.hpp"

namespace deflicker {

struct NetConfig {
  int base_channels = 32;
  int residual_blocks = 5;
  int lstm_hidden_channels = 0;  // 0 -> 4 * base_channels
  int downsample_stages = 2;     // fixed
  bool zero_init_output = true;

  int lstm_hidden() const {
    return lstm_hidden_channels > 0 ? lstm_hidden_channels : 4 * base_channels;
  }

  void validate() const {
    if (base_channels < 1 || residual_blocks < 1 || lstm_hidden() < 1)
      throw SpecError("NetConfig counts must be >= 1");
    if (downsample_stages != 2) throw SpecError("downsample_stages is fixed at 2");
  }
};

template <typename S>
struct RecurrentState {
  Tensor<S> lstm_hidden;  // (H, h/4, w/4)
  Tensor<S> lstm_cell;    // (H, h/4, w/4)
  Frame<S> prev_output;   // (3, h, w)
};

template <typename S>
struct RolloutResult {
  FrameSequence<S> forward_outputs;   // O_t, k+1 frames
  FrameSequence<S> backward_outputs;  // O'_t for t = k-1 down to 0, stored in
                                      // ascending t order (index t -> O'_t)
};

/// Recurrent residual transformation network: O_t = P_t + F(I_t, I_prev,
/// P_t, O_prev). Encoder (stem conv + two stride-2 stages), 5 residual
/// blocks, a ConvLSTM cell, and a decoder of two transposed convolutions
/// with encoder skip concatenations; the final 3-channel conv is
/// zero-initialized so the untrained network is the identity.
///
/// The stem is conv + ReLU without normalization: instance norm is invariant
/// to spatially uniform input shifts, so normalizing before the first
/// nonlinearity would hide exactly the global flicker this network must
/// detect. From the first ReLU onward, uniform shifts become non-uniform
/// activation patterns and survive the normalized stages.
template <typename S>
class ConsistencyNet {
 public:
  explicit ConsistencyNet(const NetConfig& cfg, std::uint64_t seed = 1)
      : cfg_(cfg) {
    cfg_.validate();
    const int B = cfg_.base_channels;
    const int H = cfg_.lstm_hidden();
    Rng rng(seed);
    add_conv("stem", 12, B, 7, rng);
    add_conv("down1", B, 2 * B, 3, rng);
    add_norm("down1", 2 * B);
    add_conv("down2", 2 * B, 4 * B, 3, rng);
    add_norm("down2", 4 * B);
    for (int i = 0; i < cfg_.residual_blocks; ++i) {
      const std::string p = "res" + std::to_string(i + 1);
      add_conv(p + ".c1", 4 * B, 4 * B, 3, rng);
      add_norm(p + ".n1", 4 * B);
      add_conv(p + ".c2", 4 * B, 4 * B, 3, rng);
      add_norm(p + ".n2", 4 * B);
    }
    add_conv("lstm", 4 * B + H, 4 * H, 3, rng);
    {  // forget-gate bias +1 stabilizes early recurrence
      Tensor<S>& b = param("lstm.b");
      for (int c = H; c < 2 * H; ++c) b.data[c] = S(1);
    }
    add_deconv("up1", H, 2 * B, 3, rng);
    add_conv("dec1", 4 * B, 2 * B, 3, rng);
    add_norm("dec1", 2 * B);
    add_deconv("up2", 2 * B, B, 3, rng);
    add_conv("dec2", 2 * B, B, 3, rng);
    add_norm("dec2", B);
    add_conv("out", B, 3, 3, rng);
    if (cfg_.zero_init_output) {
      param("out.w").data.setZero();
      param("out.b").data.setZero();
    }
  }

  const NetConfig& config() const { return cfg_; }

  std::vector<std::pair<std::string, Tensor<S>>>& named_params() { return params_; }
  const std::vector<std::pair<std::string, Tensor<S>>>& named_params() const { return params_; }

  Tensor<S>& param(const std::string& name) { return params_[slot_.at(name)].second; }
  const Tensor<S>& param(const std::string& name) const { return params_[slot_.at(name)].second; }

  std::ptrdiff_t parameter_count() const {
    std::ptrdiff_t n = 0;
    for (const auto& [name, p] : params_) n += p.data.size();
    return n;
  }

  /// Parameters bound as leaves on a tape, aligned with named_params order.
  struct TapeParams {
    std::vector<int> ids;
  };

  TapeParams bind(Tape<S>& tp) const {
    TapeParams P;
    P.ids.reserve(params_.size());
    for (const auto& [name, p] : params_) P.ids.push_back(tp.leaf(p));
    return P;
  }

  struct TapeState {
    int h = -1, c = -1, prev = -1;  // node ids
  };

  TapeState initial_state(Tape<S>& tp, int height, int width, int prev_output) const {
    const int H = cfg_.lstm_hidden();
    TapeState st;
    st.h = tp.leaf(Tensor<S>(H, height / 4, width / 4));
    st.c = tp.leaf(Tensor<S>(H, height / 4, width / 4));
    st.prev = prev_output;
    return st;
  }

  /// One recurrent step on the tape. Inputs are node ids of (3,h,w) frames.
  std::pair<int, TapeState> step_tape(Tape<S>& tp, const TapeParams& P, int I_t, int I_prev,
                                      int P_t, const TapeState& st) const {
    // Copy dims up front: growing the tape reallocates node storage, so
    // references from tp.val() must not be held across op calls.
    const int fh = tp.val(I_t).h, fw = tp.val(I_t).w;
    for (int in : {I_t, I_prev, P_t, st.prev}) {
      const Tensor<S>& v = tp.val(in);
      if (v.c != 3 || v.h != fh || v.w != fw)
        throw ShapeError("step inputs must be equal-sized RGB frames, got " + v.shape_str());
    }
    if (fh % 4 != 0 || fw % 4 != 0)
      throw ShapeError("frame dimensions must be divisible by 4, got " +
                       tp.val(I_t).shape_str());

    auto pid = [&](const std::string& name) { return P.ids[slot_.at(name)]; };
    auto cnr = [&](const std::string& conv, const std::string& norm, int x, int k, int stride) {
      x = ops::conv2d(tp, x, pid(conv + ".w"), pid(conv + ".b"), k, k, stride, k / 2);
      x = ops::instance_norm(tp, x, pid(norm + ".gamma"), pid(norm + ".beta"));
      return ops::relu(tp, x);
    };

    const int in = ops::concat_c(tp, {I_t, I_prev, P_t, st.prev});
    int e0 = ops::conv2d(tp, in, pid("stem.w"), pid("stem.b"), 7, 7, 1, 3);
    e0 = ops::relu(tp, e0);
    const int e1 = cnr("down1", "down1", e0, 3, 2);
    const int e2 = cnr("down2", "down2", e1, 3, 2);

    int x = e2;
    for (int i = 0; i < cfg_.residual_blocks; ++i) {
      const std::string p = "res" + std::to_string(i + 1);
      int y = ops::conv2d(tp, x, pid(p + ".c1.w"), pid(p + ".c1.b"), 3, 3, 1, 1);
      y = ops::instance_norm(tp, y, pid(p + ".n1.gamma"), pid(p + ".n1.beta"));
      y = ops::relu(tp, y);
      y = ops::conv2d(tp, y, pid(p + ".c2.w"), pid(p + ".c2.b"), 3, 3, 1, 1);
      y = ops::instance_norm(tp, y, pid(p + ".n2.gamma"), pid(p + ".n2.beta"));
      x = ops::add(tp, x, y);
    }

    const int H = cfg_.lstm_hidden();
    const int gates =
        ops::conv2d(tp, ops::concat_c(tp, {x, st.h}), pid("lstm.w"), pid("lstm.b"), 3, 3, 1, 1);
    const int gi = ops::sigmoid(tp, ops::slice_c(tp, gates, 0, H));
    const int gf = ops::sigmoid(tp, ops::slice_c(tp, gates, H, H));
    const int gg = ops::tanh(tp, ops::slice_c(tp, gates, 2 * H, H));
    const int go = ops::sigmoid(tp, ops::slice_c(tp, gates, 3 * H, H));
    const int c_new = ops::add(tp, ops::mul(tp, gf, st.c), ops::mul(tp, gi, gg));
    const int h_new = ops::mul(tp, go, ops::tanh(tp, c_new));

    const int u1 = ops::conv_transpose2d(tp, h_new, pid("up1.w"), pid("up1.b"), 3, 3, 2, 1,
                                         fh / 2, fw / 2);
    const int d1 = cnr("dec1", "dec1", ops::concat_c(tp, {u1, e1}), 3, 1);
    const int u2 =
        ops::conv_transpose2d(tp, d1, pid("up2.w"), pid("up2.b"), 3, 3, 2, 1, fh, fw);
    const int d2 = cnr("dec2", "dec2", ops::concat_c(tp, {u2, e0}), 3, 1);
    const int residual = ops::conv2d(tp, d2, pid("out.w"), pid("out.b"), 3, 3, 1, 1);
    const int O_t = ops::add(tp, P_t, residual);

    TapeState ns;
    ns.h = h_new;
    ns.c = c_new;
    ns.prev = O_t;
    return {O_t, ns};
  }

  /// Plain (no-gradient) step for inference.
  std::pair<Frame<S>, RecurrentState<S>> step(const Frame<S>& I_t, const Frame<S>& I_prev,
                                              const Frame<S>& P_t,
                                              const RecurrentState<S>& state) const {
    Tape<S> tp;
    const TapeParams P = bind(tp);
    TapeState st;
    st.h = tp.leaf(state.lstm_hidden);
    st.c = tp.leaf(state.lstm_cell);
    st.prev = tp.leaf(state.prev_output);
    auto [o, ns] = step_tape(tp, P, tp.leaf(I_t), tp.leaf(I_prev), tp.leaf(P_t), st);
    return {tp.val(o), RecurrentState<S>{tp.val(ns.h), tp.val(ns.c), tp.val(o)}};
  }

  RecurrentState<S> zero_state(int height, int width, Frame<S> prev_output) const {
    const int H = cfg_.lstm_hidden();
    return RecurrentState<S>{Tensor<S>(H, height / 4, width / 4),
                             Tensor<S>(H, height / 4, width / 4), std::move(prev_output)};
  }

  /// O_1 = P_1 with zero state (no network call); O_t from step for t >= 2.
  FrameSequence<S> rollout(const FrameSequence<S>& I, const FrameSequence<S>& P) const {
    if (I.size() != P.size() || I.empty())
      throw ShapeError("rollout needs equal-length nonempty raw/processed sequences");
    FrameSequence<S> O;
    O.frame_rate = P.frame_rate;
    O.frames.push_back(P[0]);
    RecurrentState<S> st = zero_state(P[0].h, P[0].w, P[0]);
    for (int t = 1; t < I.size(); ++t) {
      auto [o, ns] = step(I[t], I[t - 1], P[t], st);
      O.frames.push_back(o);
      st = std::move(ns);
    }
    return O;
  }

  /// Forward rollout over the k+1 window frames, then the backward branch
  /// through the Ping Pong turn: the recurrent state continues (not reset),
  /// and the step at time t takes (I_t, I_{t+1}, P_t, prev) with prev being
  /// O_k at the turn and O'_{t+1} afterwards.
  RolloutResult<S> pingpong_rollout(const FrameSequence<S>& I, const FrameSequence<S>& P) const {
    const int k = I.size() - 1;
    if (k < 1) throw WindowTooShortError("ping pong window needs k >= 1, got k = " +
                                         std::to_string(k));
    if (I.size() != P.size()) throw ShapeError("pingpong_rollout length mismatch");
    RolloutResult<S> r;
    r.forward_outputs.frames.push_back(P[0]);
    RecurrentState<S> st = zero_state(P[0].h, P[0].w, P[0]);
    for (int t = 1; t <= k; ++t) {
      auto [o, ns] = step(I[t], I[t - 1], P[t], st);
      r.forward_outputs.frames.push_back(o);
      st = std::move(ns);
    }
    r.backward_outputs.frames.resize(std::size_t(k));
    for (int t = k - 1; t >= 0; --t) {
      auto [o, ns] = step(I[t], I[t + 1], P[t], st);
      r.backward_outputs.frames[std::size_t(t)] = o;
      st = std::move(ns);
    }
    return r;
  }

  FrameSequence<S> rollout(const VideoTriplet<S>& window) const {
    return rollout(window.raw, window.processed);
  }

  RolloutResult<S> pingpong_rollout(const VideoTriplet<S>& window) const {
    return pingpong_rollout(window.raw, window.processed);
  }

  const std::map<std::string, std::size_t>& param_slots() const { return slot_; }

 private:
  void add_param(const std::string& name, Tensor<S> t) {
    slot_[name] = params_.size();
    params_.emplace_back(name, std::move(t));
  }

  void add_conv(const std::string& prefix, int cin, int cout, int k, Rng& rng) {
    Tensor<S> w(cout, cin * k, k);
    const S stddev = std::sqrt(S(2) / S(cin * k * k));
    for (std::ptrdiff_t i = 0; i < w.data.size(); ++i)
      w.data[i] = S(rng.normal(0.0, double(stddev)));
    add_param(prefix + ".w", std::move(w));
    add_param(prefix + ".b", Tensor<S>(cout, 1, 1));
  }

  // Transposed-conv weight: (cin, cout*k, k) — the conv kernel of the
  // downsampling conv it transposes.
  void add_deconv(const std::string& prefix, int cin, int cout, int k, Rng& rng) {
    Tensor<S> w(cin, cout * k, k);
    const S stddev = std::sqrt(S(2) / S(cin * k * k));
    for (std::ptrdiff_t i = 0; i < w.data.size(); ++i)
      w.data[i] = S(rng.normal(0.0, double(stddev)));
    add_param(prefix + ".w", std::move(w));
    add_param(prefix + ".b", Tensor<S>(cout, 1, 1));
  }

  void add_norm(const std::string& prefix, int c) {
    add_param(prefix + ".gamma", Tensor<S>::constant(c, 1, 1, S(1)));
    add_param(prefix + ".beta", Tensor<S>(c, 1, 1));
  }

  NetConfig cfg_;
  std::vector<std::pair<std::string, Tensor<S>>> params_;
  std::map<std::string, std::size_t> slot_;
};

}  // namespace deflicker
