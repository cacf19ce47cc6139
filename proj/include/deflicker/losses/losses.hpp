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
#include <map>
#include <set>
#include <string>
#include <vector>

#include "deflicker/features/feature_net.hpp"
#include "deflicker/flow/warp.hpp"
#include "deflicker/net/consistency_net.hpp"

namespace deflicker {

struct LossWeights {
  double lambda_p = 10;
  double lambda_SP = 10;
  double lambda_st = 100;
  double lambda_lt = 100;
  double lambda_rank = 1e-5;
  double lambda_PP = 100;

  void validate() const {
    if (lambda_p < 0 || lambda_SP < 0 || lambda_st < 0 || lambda_lt < 0 || lambda_rank < 0 ||
        lambda_PP < 0)
      throw SpecError("loss weights must be nonnegative");
  }
};

/// lambda_SP multiplies the combined style term (spatial + temporal parts).
inline double weighted_total(const LossWeights& w, double content, double style_combined,
                             double short_term, double long_term, double rank, double pingpong) {
  return w.lambda_p * content + w.lambda_SP * style_combined + w.lambda_st * short_term +
         w.lambda_lt * long_term + w.lambda_rank * rank + w.lambda_PP * pingpong;
}

struct LossReport {
  std::map<std::string, double> terms;  // content, style_preserving, style_temporal,
                                        // short_term, long_term, rank, pingpong
  double total = 0;

  double term(const std::string& name) const {
    auto it = terms.find(name);
    return it == terms.end() ? 0.0 : it->second;
  }

  /// One JSON object per line for the metrics log.
  std::string to_json(long step) const {
    char buf[64];
    std::string s = "{\"step\": " + std::to_string(step) + ", \"terms\": {";
    bool first = true;
    for (const auto& [name, v] : terms) {
      if (!first) s += ", ";
      first = false;
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      s += "\"" + name + "\": " + buf;
    }
    std::snprintf(buf, sizeof(buf), "%.17g", total);
    s += "}, \"total\": " + std::string(buf) + "}";
    return s;
  }
};

/// chi matrix of one window: rows are vec(mask_t ⊙ warp(luminance_t, F_{ref,t})),
/// the reference row unwarped and unmasked. Stored as a (1, K, N) tensor.
template <typename S>
struct RankMatrix {
  Tensor<S> chi;
  int reference_time = 0;  // window-relative index
};

/// Flows and masks a window's temporal losses need, indexed window-relative
/// (0..k). Unused slots (prev[0], next[k], first[0]) stay empty.
template <typename S>
struct WindowFlows {
  struct Pair {
    FlowField<S> flow;
    Tensor<S> visibility;  // (1,H,W) continuous mask from the raw frames
  };
  std::vector<Pair> prev;   // [t] = F_{t,t-1} + M_{t,t-1}, t >= 1
  std::vector<Pair> next;   // [t] = F_{t,t+1} + M_{t,t+1}, t <= k-1
  std::vector<Pair> first;  // [t] = F_{t,0}   + M_{t,0},  t >= 1
  int ref = 0;
  std::vector<FlowField<S>> to_ref;  // [t] = F_{ref,t} (unused at t == ref)
  std::vector<Tensor<S>> occ_ref;    // [t] = binary non-occlusion for rank rows
  S chi_I_nuclear = S(0);            // nuclear norm of the raw-side rank matrix
};

template <typename S>
int rank_matrix_tape(Tape<S>& tp, const std::vector<int>& frames, const WindowFlows<S>& wf);

/// Builds every flow and mask a window needs, with visibility masks computed
/// from the raw frames I (alpha = 50 by default). Rank reference = floor(k/2).
template <typename S>
WindowFlows<S> build_window_flows(const FrameSequence<S>& I, FlowPairSource<S>& flows,
                                  int window_start, S alpha = S(50)) {
  const int k = I.size() - 1;
  if (k < 1) throw WindowTooShortError("window needs at least 2 frames");
  const int s = window_start;  // offset into the video the source indexes
  WindowFlows<S> wf;
  wf.prev.resize(std::size_t(k) + 1);
  wf.next.resize(std::size_t(k) + 1);
  wf.first.resize(std::size_t(k) + 1);
  wf.to_ref.resize(std::size_t(k) + 1);
  wf.occ_ref.resize(std::size_t(k) + 1);
  for (int t = 1; t <= k; ++t) {
    wf.prev[t].flow = flows.flow_between(s + t, s + t - 1);
    wf.prev[t].visibility = visibility_mask(I[t], I[t - 1], wf.prev[t].flow, alpha);
    wf.first[t].flow = flows.flow_between(s + t, s + 0);
    wf.first[t].visibility = visibility_mask(I[t], I[0], wf.first[t].flow, alpha);
  }
  for (int t = 0; t < k; ++t) {
    wf.next[t].flow = flows.flow_between(s + t, s + t + 1);
    wf.next[t].visibility = visibility_mask(I[t], I[t + 1], wf.next[t].flow, alpha);
  }
  wf.ref = k / 2;
  for (int t = 0; t <= k; ++t) {
    if (t == wf.ref) continue;
    wf.to_ref[t] = flows.flow_between(s + wf.ref, s + t);
    wf.occ_ref[t] = occlusion_mask(wf.to_ref[t], flows.flow_between(s + t, s + wf.ref));
  }
  {
    Tape<S> tp;
    std::vector<int> ids;
    for (const auto& f : I.frames) ids.push_back(tp.leaf(f));
    wf.chi_I_nuclear = tp.val(ops::nuclear_norm(tp, rank_matrix_tape(tp, ids, wf))).value();
  }
  return wf;
}

/// Plain perceptual features of one frame, cacheable across training steps.
template <typename S>
struct FrameFeatures {
  FeatureBlocks<S> blocks;
  std::map<std::string, ChannelStats<S>> stats;  // relu1_2, relu2_2
};

template <typename S>
FrameFeatures<S> compute_frame_features(const ConvFeatureNet<S>& net, const Frame<S>& frame) {
  FrameFeatures<S> ff;
  std::set<std::string> all(all_feature_blocks().begin(), all_feature_blocks().end());
  ff.blocks = net.extract(frame, all);
  for (const auto& b : {"relu1_2", "relu2_2"}) ff.stats[b] = channel_stats(ff.blocks.at(b));
  return ff;
}

namespace lossdetail {

/// Per-entry feature taps of a differentiable sequence: node ids per block,
/// plus channel-stat nodes for the style blocks.
template <typename S>
struct EntryTaps {
  std::map<std::string, int> blocks;
  std::map<std::string, std::pair<int, int>> stats;  // block -> (mean id, std id)
};

template <typename S>
EntryTaps<S> tap_entry(Tape<S>& tp, const ConvFeatureNet<S>& net, int frame_id, bool all_blocks) {
  EntryTaps<S> e;
  std::set<std::string> want = {"relu1_2", "relu2_2"};
  if (all_blocks)
    want.insert(all_feature_blocks().begin(), all_feature_blocks().end());
  e.blocks = net.extract_tape(tp, frame_id, want);
  for (const auto& b : {"relu1_2", "relu2_2"}) {
    const int id = e.blocks.at(b);
    e.stats[b] = {ops::channel_mean(tp, id), ops::channel_std(tp, id)};
  }
  return e;
}

/// Squared L2 between stat nodes and constant reference stats.
template <typename S>
int stats_dist_const(Tape<S>& tp, const std::pair<int, int>& s, const ChannelStats<S>& ref) {
  const int dm = ops::sub(tp, s.first, tp.leaf(ref.mean));
  const int ds = ops::sub(tp, s.second, tp.leaf(ref.std));
  return ops::add(tp, ops::sq_sum(tp, dm), ops::sq_sum(tp, ds));
}

template <typename S>
int stats_dist(Tape<S>& tp, const std::pair<int, int>& a, const std::pair<int, int>& b) {
  const int dm = ops::sub(tp, a.first, b.first);
  const int ds = ops::sub(tp, a.second, b.second);
  return ops::add(tp, ops::sq_sum(tp, dm), ops::sq_sum(tp, ds));
}

template <typename S>
int add_or(Tape<S>& tp, int acc, int x) {
  return acc < 0 ? x : ops::add(tp, acc, x);
}

template <typename S>
int zero_or(Tape<S>& tp, int acc) {
  return acc < 0 ? tp.leaf(Tensor<S>::scalar(S(0))) : acc;
}

}  // namespace lossdetail

// ---- tape-level losses (shared by the sequence-level API and the trainer) ----

/// Content perceptual loss over aligned differentiable outputs and constant
/// processed features: sum over t = 2..T and the four blocks of the
/// per-element mean L1 feature distance.
template <typename S>
int content_tape(Tape<S>& tp, const std::vector<lossdetail::EntryTaps<S>>& O,
                 const std::vector<const FeatureBlocks<S>*>& P) {
  int acc = -1;
  for (std::size_t t = 1; t < O.size(); ++t)
    for (const auto& b : all_feature_blocks()) {
      const int d = ops::sub(tp, O[t].blocks.at(b), tp.leaf(P[t]->at(b)));
      acc = lossdetail::add_or(tp, acc, ops::abs_mean(tp, d));
    }
  return lossdetail::zero_or(tp, acc);
}

/// Style-preserving loss: squared L2 between channel means and stds of
/// output vs processed features, blocks relu1_2 and relu2_2, t = 2..T.
template <typename S>
int style_preserving_tape(Tape<S>& tp, const std::vector<lossdetail::EntryTaps<S>>& O,
                          const std::vector<const std::map<std::string, ChannelStats<S>>*>& P) {
  int acc = -1;
  for (std::size_t t = 1; t < O.size(); ++t)
    for (const auto& b : {"relu1_2", "relu2_2"})
      acc = lossdetail::add_or(tp, acc,
                               lossdetail::stats_dist_const(tp, O[t].stats.at(b), P[t]->at(b)));
  return lossdetail::zero_or(tp, acc);
}

/// Temporal style loss: same statistic distance between consecutive outputs.
template <typename S>
int style_temporal_tape(Tape<S>& tp, const std::vector<lossdetail::EntryTaps<S>>& O) {
  int acc = -1;
  for (std::size_t t = 1; t < O.size(); ++t)
    for (const auto& b : {"relu1_2", "relu2_2"})
      acc = lossdetail::add_or(tp, acc,
                               lossdetail::stats_dist(tp, O[t].stats.at(b), O[t - 1].stats.at(b)));
  return lossdetail::zero_or(tp, acc);
}

/// Short-term warping loss over both Ping Pong branches. Forward term for
/// t = 1..k: M_{t,t-1} · |O_t - warp(O_{t-1}, F_{t,t-1})|_1. Backward term
/// for t = 0..k-1 with neighbor O'_{t+1}, taking the shared turn frame O_k
/// as O'_k: M_{t,t+1} · |O'_t - warp(O'_{t+1}, F_{t,t+1})|_1.
template <typename S>
int short_term_tape(Tape<S>& tp, const std::vector<int>& fwd, const std::vector<int>& bwd,
                    const WindowFlows<S>& wf) {
  const int k = int(fwd.size()) - 1;
  int acc = -1;
  for (int t = 1; t <= k; ++t) {
    if (wf.prev[t].flow.d.empty()) throw MissingFlowError("missing flow for pair (t, t-1)");
    const int warped = ops::warp(tp, fwd[t - 1], wf.prev[t].flow);
    const int d = ops::sub(tp, fwd[t], warped);
    acc = lossdetail::add_or(tp, acc, ops::masked_abs_sum(tp, d, wf.prev[t].visibility));
  }
  for (int t = 0; t < int(bwd.size()); ++t) {
    if (wf.next[t].flow.d.empty()) throw MissingFlowError("missing flow for pair (t, t+1)");
    const int neighbor = (t + 1 < int(bwd.size())) ? bwd[t + 1] : fwd[k];
    const int warped = ops::warp(tp, neighbor, wf.next[t].flow);
    const int d = ops::sub(tp, bwd[t], warped);
    acc = lossdetail::add_or(tp, acc, ops::masked_abs_sum(tp, d, wf.next[t].visibility));
  }
  return lossdetail::zero_or(tp, acc);
}

/// Long-term warping loss: first frame warped to every later time of the
/// forward branch, t = 2..T: M_{t,1} · |O_t - warp(O_1, F_{t,1})|_1.
template <typename S>
int long_term_tape(Tape<S>& tp, const std::vector<int>& fwd, const WindowFlows<S>& wf) {
  const int k = int(fwd.size()) - 1;
  int acc = -1;
  for (int t = 1; t <= k; ++t) {
    if (wf.first[t].flow.d.empty()) throw MissingFlowError("missing flow for pair (t, 1)");
    const int warped = ops::warp(tp, fwd[0], wf.first[t].flow);
    const int d = ops::sub(tp, fwd[t], warped);
    acc = lossdetail::add_or(tp, acc, ops::masked_abs_sum(tp, d, wf.first[t].visibility));
  }
  return lossdetail::zero_or(tp, acc);
}

/// Ping Pong loss: Frobenius norms of O_t - O'_t over window-relative
/// t = 1..k-1. The first pair and the turn contribute nothing; k < 2 gives
/// the empty sum.
template <typename S>
int pingpong_tape(Tape<S>& tp, const std::vector<int>& fwd, const std::vector<int>& bwd) {
  const int k = int(bwd.size());
  int acc = -1;
  for (int t = 1; t <= k - 1; ++t) {
    const int d = ops::sub(tp, fwd[t], bwd[t]);
    acc = lossdetail::add_or(tp, acc, ops::frob_norm(tp, d));
  }
  return lossdetail::zero_or(tp, acc);
}

/// chi matrix node over differentiable frames: luminance, warped to the
/// reference time, masked; the reference row identity-warped and unmasked.
template <typename S>
int rank_matrix_tape(Tape<S>& tp, const std::vector<int>& frames, const WindowFlows<S>& wf) {
  std::vector<int> rows;
  rows.reserve(frames.size());
  for (int t = 0; t < int(frames.size()); ++t) {
    int lum = ops::luminance(tp, frames[std::size_t(t)]);
    if (t != wf.ref) {
      if (wf.to_ref[t].d.empty()) throw MissingFlowError("missing flow to rank reference");
      lum = ops::warp(tp, lum, wf.to_ref[t]);
      lum = ops::mul_const(tp, lum, wf.occ_ref[t]);
    }
    rows.push_back(lum);
  }
  return ops::vstack_rows(tp, rows);
}

/// Low-rank loss node given the raw-side nuclear norm (a constant).
template <typename S>
int low_rank_tape(Tape<S>& tp, S nuclear_I, int chi_O) {
  const int d = ops::sub(tp, tp.leaf(Tensor<S>::scalar(nuclear_I)), ops::nuclear_norm(tp, chi_O));
  return ops::square(tp, d);
}

// ---- sequence-level operations ----

template <typename S>
void require_pair_lengths(const FrameSequence<S>& a, const FrameSequence<S>& b) {
  if (a.size() != b.size())
    throw DimensionMismatchError("sequence length mismatch: " + std::to_string(a.size()) +
                                 " vs " + std::to_string(b.size()));
  if (a.size() < 2) throw WindowTooShortError("loss needs T >= 2");
}

template <typename S>
S content_perceptual(const FrameSequence<S>& O, const FrameSequence<S>& P,
                     const ConvFeatureNet<S>& net) {
  require_pair_lengths(O, P);
  Tape<S> tp;
  std::vector<lossdetail::EntryTaps<S>> taps;
  std::vector<FeatureBlocks<S>> pf;
  std::vector<const FeatureBlocks<S>*> pfp;
  std::set<std::string> all(all_feature_blocks().begin(), all_feature_blocks().end());
  for (int t = 0; t < O.size(); ++t) {
    taps.push_back(lossdetail::tap_entry(tp, net, tp.leaf(O[t]), true));
    pf.push_back(net.extract(P[t], all));
  }
  for (const auto& f : pf) pfp.push_back(&f);
  return tp.val(content_tape(tp, taps, pfp)).value();
}

template <typename S>
S style_preserving(const FrameSequence<S>& O, const FrameSequence<S>& P,
                   const ConvFeatureNet<S>& net) {
  require_pair_lengths(O, P);
  Tape<S> tp;
  std::vector<lossdetail::EntryTaps<S>> taps;
  std::vector<std::map<std::string, ChannelStats<S>>> ps(std::size_t(P.size()));
  std::vector<const std::map<std::string, ChannelStats<S>>*> psp;
  for (int t = 0; t < O.size(); ++t) {
    taps.push_back(lossdetail::tap_entry(tp, net, tp.leaf(O[t]), false));
    auto blocks = net.extract(P[t], {"relu1_2", "relu2_2"});
    for (const auto& [name, b] : blocks) ps[std::size_t(t)][name] = channel_stats(b);
  }
  for (const auto& m : ps) psp.push_back(&m);
  return tp.val(style_preserving_tape(tp, taps, psp)).value();
}

template <typename S>
S style_temporal(const FrameSequence<S>& O, const ConvFeatureNet<S>& net) {
  if (O.size() < 2) throw WindowTooShortError("loss needs T >= 2");
  Tape<S> tp;
  std::vector<lossdetail::EntryTaps<S>> taps;
  for (int t = 0; t < O.size(); ++t)
    taps.push_back(lossdetail::tap_entry(tp, net, tp.leaf(O[t]), false));
  return tp.val(style_temporal_tape(tp, taps)).value();
}

template <typename S>
S short_term(const RolloutResult<S>& result, const WindowFlows<S>& wf) {
  Tape<S> tp;
  std::vector<int> fwd, bwd;
  for (const auto& f : result.forward_outputs.frames) fwd.push_back(tp.leaf(f));
  for (const auto& f : result.backward_outputs.frames) bwd.push_back(tp.leaf(f));
  return tp.val(short_term_tape(tp, fwd, bwd, wf)).value();
}

template <typename S>
S long_term(const FrameSequence<S>& O, const WindowFlows<S>& wf) {
  Tape<S> tp;
  std::vector<int> fwd;
  for (const auto& f : O.frames) fwd.push_back(tp.leaf(f));
  return tp.val(long_term_tape(tp, fwd, wf)).value();
}

template <typename S>
S pingpong(const RolloutResult<S>& result) {
  Tape<S> tp;
  std::vector<int> fwd, bwd;
  for (const auto& f : result.forward_outputs.frames) fwd.push_back(tp.leaf(f));
  for (const auto& f : result.backward_outputs.frames) bwd.push_back(tp.leaf(f));
  return tp.val(pingpong_tape(tp, fwd, bwd)).value();
}

template <typename S>
RankMatrix<S> build_rank_matrix(const FrameSequence<S>& frames,
                                const std::vector<FlowField<S>>& flows_to_ref,
                                const std::vector<Tensor<S>>& occlusion_masks,
                                int reference_time) {
  if (frames.empty()) throw NoFramesError("rank matrix of empty window");
  if (reference_time < 0 || reference_time >= frames.size())
    throw IndexError("rank reference " + std::to_string(reference_time) + " outside window");
  if (int(flows_to_ref.size()) != frames.size() || int(occlusion_masks.size()) != frames.size())
    throw DimensionMismatchError("rank matrix needs one flow and mask per frame");
  WindowFlows<S> wf;
  wf.ref = reference_time;
  wf.to_ref.assign(flows_to_ref.begin(), flows_to_ref.end());
  wf.occ_ref.assign(occlusion_masks.begin(), occlusion_masks.end());
  Tape<S> tp;
  std::vector<int> ids;
  for (const auto& f : frames.frames) ids.push_back(tp.leaf(f));
  RankMatrix<S> rm;
  rm.reference_time = reference_time;
  rm.chi = tp.val(rank_matrix_tape(tp, ids, wf));
  return rm;
}

template <typename S>
S nuclear_norm_value(const Tensor<S>& chi) {
  Tape<S> tp;
  return tp.val(ops::nuclear_norm(tp, tp.leaf(chi))).value();
}

template <typename S>
S low_rank(const RankMatrix<S>& chi_I, const RankMatrix<S>& chi_O) {
  if (!chi_I.chi.same_shape(chi_O.chi))
    throw ShapeError("rank matrices differ in shape: " + chi_I.chi.shape_str() + " vs " +
                     chi_O.chi.shape_str());
  const S d = nuclear_norm_value(chi_I.chi) - nuclear_norm_value(chi_O.chi);
  return d * d;
}

// ---- fused total over a Ping Pong window ----

template <typename S>
struct TotalTapeResult {
  int node = -1;  // scalar total node
  LossReport report;
};

/// Assembles the full Eq.-style objective over one Ping Pong window on an
/// existing tape. `fwd` holds k+1 output node ids, `bwd` k backward ids
/// (ascending t). Perceptual losses run over the palindromic traversal of
/// length 2k+1; P-side features are supplied per window index (cacheable).
template <typename S>
TotalTapeResult<S> total_tape(Tape<S>& tp, const std::vector<int>& fwd,
                              const std::vector<int>& bwd, const WindowFlows<S>& wf,
                              const ConvFeatureNet<S>& net,
                              const std::vector<const FrameFeatures<S>*>& P_features,
                              const LossWeights& weights) {
  weights.validate();
  const int k = int(fwd.size()) - 1;
  if (int(bwd.size()) != k) throw ShapeError("total_tape: backward branch must hold k outputs");

  // Palindromic traversal: window indices 0..k then k-1..0.
  std::vector<int> trav_ids = fwd;
  std::vector<int> trav_win;  // window index per traversal entry
  for (int t = 0; t <= k; ++t) trav_win.push_back(t);
  for (int t = k - 1; t >= 0; --t) {
    trav_ids.push_back(bwd[std::size_t(t)]);
    trav_win.push_back(t);
  }

  std::vector<lossdetail::EntryTaps<S>> taps;
  std::vector<const FeatureBlocks<S>*> pblocks;
  std::vector<const std::map<std::string, ChannelStats<S>>*> pstats;
  for (std::size_t j = 0; j < trav_ids.size(); ++j) {
    taps.push_back(lossdetail::tap_entry(tp, net, trav_ids[j], j > 0));
    const FrameFeatures<S>* pf = P_features[std::size_t(trav_win[j])];
    pblocks.push_back(&pf->blocks);
    pstats.push_back(&pf->stats);
  }

  const int content = content_tape(tp, taps, pblocks);
  const int style_p = style_preserving_tape(tp, taps, pstats);
  const int style_t = style_temporal_tape(tp, taps);
  const int st = short_term_tape(tp, fwd, bwd, wf);
  const int lt = long_term_tape(tp, fwd, wf);
  const int pp = pingpong_tape(tp, fwd, bwd);
  const int chi_O = rank_matrix_tape(tp, fwd, wf);
  const S nuc_I = wf.chi_I_nuclear;
  const int rank = low_rank_tape(tp, nuc_I, chi_O);

  const int style_combined = ops::add(tp, style_p, style_t);
  int total = ops::scale(tp, content, S(weights.lambda_p));
  total = ops::add(tp, total, ops::scale(tp, style_combined, S(weights.lambda_SP)));
  total = ops::add(tp, total, ops::scale(tp, st, S(weights.lambda_st)));
  total = ops::add(tp, total, ops::scale(tp, lt, S(weights.lambda_lt)));
  total = ops::add(tp, total, ops::scale(tp, rank, S(weights.lambda_rank)));
  total = ops::add(tp, total, ops::scale(tp, pp, S(weights.lambda_PP)));

  TotalTapeResult<S> r;
  r.node = total;
  r.report.terms["content"] = double(tp.val(content).value());
  r.report.terms["style_preserving"] = double(tp.val(style_p).value());
  r.report.terms["style_temporal"] = double(tp.val(style_t).value());
  r.report.terms["short_term"] = double(tp.val(st).value());
  r.report.terms["long_term"] = double(tp.val(lt).value());
  r.report.terms["rank"] = double(tp.val(rank).value());
  r.report.terms["pingpong"] = double(tp.val(pp).value());
  r.report.total = double(tp.val(total).value());
  return r;
}

/// Plain total over an already-computed rollout (no parameter gradients).
template <typename S>
LossReport total(const RolloutResult<S>& result, const FrameSequence<S>& P,
                 const WindowFlows<S>& wf, const ConvFeatureNet<S>& net,
                 const LossWeights& weights) {
  Tape<S> tp;
  std::vector<int> fwd, bwd;
  for (const auto& f : result.forward_outputs.frames) fwd.push_back(tp.leaf(f));
  for (const auto& f : result.backward_outputs.frames) bwd.push_back(tp.leaf(f));
  std::vector<FrameFeatures<S>> pf;
  for (const auto& f : P.frames) pf.push_back(compute_frame_features(net, f));
  std::vector<const FrameFeatures<S>*> pfp;
  for (const auto& f : pf) pfp.push_back(&f);
  return total_tape(tp, fwd, bwd, wf, net, pfp, weights).report;
}

}  // namespace deflicker
