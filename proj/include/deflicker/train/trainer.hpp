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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "deflicker/losses/losses.hpp"
#include "deflicker/net/checkpoint.hpp"

namespace deflicker {

/// Worker cap from DEFLICKER_THREADS (>= 1); hardware concurrency otherwise.
inline int threads_from_env() {
  if (const char* env = std::getenv("DEFLICKER_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? int(hw) : 1;
}

struct TrainConfig {
  int epochs = 100;
  int batches_per_epoch = 1000;
  int batch_size = 4;
  int window_frames = 5;  // k+1
  double learning_rate = 1e-4;
  double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  double clip_norm = 10;  // global-norm gradient clip; <= 0 disables
  LossWeights weights;
  std::uint64_t seed = 1234;
  NetConfig net;
  int checkpoint_every = 1000;  // steps; <= 0 disables periodic checkpoints

  void validate() const {
    if (window_frames < 2) throw SpecError("window_frames must be >= 2");
    if (epochs < 0 || batches_per_epoch < 1 || batch_size < 1)
      throw SpecError("train counts must be >= 1 (epochs >= 0)");
    if (learning_rate <= 0) throw SpecError("learning rate must be positive");
    weights.validate();
    net.validate();
  }

  long total_steps() const { return long(epochs) * batches_per_epoch; }
};

/// Palindromic Ping Pong index window [start .. start+k .. start].
template <typename S>
std::vector<int> build_pingpong_window(const FrameSequence<S>& seq, int start, int k) {
  if (k < 0 || start < 0 || start + k >= seq.size())
    throw IndexError("ping pong window [" + std::to_string(start) + ", " +
                     std::to_string(start + k) + "] outside sequence of length " +
                     std::to_string(seq.size()));
  std::vector<int> idx;
  idx.reserve(std::size_t(2 * k + 1));
  for (int t = start; t <= start + k; ++t) idx.push_back(t);
  for (int t = start + k - 1; t >= start; --t) idx.push_back(t);
  return idx;
}

/// One training video: triplet + its flow source (ground truth or files).
template <typename S>
struct TrainVideo {
  std::string id;
  VideoTriplet<S> triplet;
  std::shared_ptr<FlowPairSource<S>> flows;
};

template <typename S>
using TrainDataset = std::vector<TrainVideo<S>>;

template <typename S>
struct AdamState {
  std::vector<Tensor<S>> m, v;
  long t = 0;
};

template <typename S>
struct TrainState {
  long step = 0;
  ConsistencyNet<S> net;
  AdamState<S> opt;
  Rng rng;

  TrainState(ConsistencyNet<S> n, Rng r) : net(std::move(n)), rng(std::move(r)) {
    const auto& params = net.named_params();
    opt.m.reserve(params.size());
    opt.v.reserve(params.size());
    for (const auto& [name, p] : params) {
      opt.m.push_back(Tensor<S>::zeros(p.c, p.h, p.w));
      opt.v.push_back(Tensor<S>::zeros(p.c, p.h, p.w));
    }
  }
};

template <typename S>
TrainState<S> make_initial_state(const TrainConfig& cfg) {
  cfg.validate();
  return TrainState<S>(ConsistencyNet<S>(cfg.net, cfg.seed), Rng(cfg.seed + 0x5eedULL));
}

template <typename S>
Checkpoint<S> to_checkpoint(const TrainState<S>& state) {
  Checkpoint<S> ck;
  ck.config = state.net.config();
  ck.step = std::uint64_t(state.step);
  ck.params = state.net.named_params();
  ck.has_optimizer = true;
  ck.adam_m = state.opt.m;
  ck.adam_v = state.opt.v;
  ck.rng_state = state.rng.serialize();
  return ck;
}

template <typename S>
TrainState<S> from_checkpoint(const Checkpoint<S>& ck) {
  TrainState<S> state(net_from_checkpoint(ck), Rng(0));
  state.step = long(ck.step);
  if (ck.has_optimizer) {
    state.opt.m = ck.adam_m;
    state.opt.v = ck.adam_v;
    state.opt.t = long(ck.step);
  }
  if (!ck.rng_state.empty()) state.rng = Rng::deserialize(ck.rng_state);
  return state;
}

/// One window of training data with everything the loss needs precomputed.
template <typename S>
struct WindowItem {
  FrameSequence<S> I, P;  // k+1 frames
  WindowFlows<S> flows;
  std::vector<const FrameFeatures<S>*> p_features;  // per window index, k+1
};

/// Cache of per-frame processed features and per-window flow bundles, keyed
/// by (video, frame/start). The feature net and dataset must outlive it.
template <typename S>
class WindowCache {
 public:
  WindowCache(const TrainDataset<S>* dataset, const ConvFeatureNet<S>* fnet)
      : dataset_(dataset), fnet_(fnet) {}

  WindowItem<S> window(int video, int start, int k) {
    const TrainVideo<S>& tv = (*dataset_)[std::size_t(video)];
    WindowItem<S> item;
    for (int t = start; t <= start + k; ++t) {
      item.I.frames.push_back(tv.triplet.raw[t]);
      item.P.frames.push_back(tv.triplet.processed[t]);
      item.p_features.push_back(frame_features(video, t));
    }
    item.flows = window_flows(video, start, k, item.I);
    return item;
  }

  const FrameFeatures<S>* frame_features(int video, int t) {
    const auto key = std::make_pair(video, t);
    auto it = features_.find(key);
    if (it == features_.end()) {
      auto ff = std::make_unique<FrameFeatures<S>>(compute_frame_features(
          *fnet_, (*dataset_)[std::size_t(video)].triplet.processed[t]));
      it = features_.emplace(key, std::move(ff)).first;
    }
    return it->second.get();
  }

  const WindowFlows<S>& window_flows(int video, int start, int k, const FrameSequence<S>& I) {
    const auto key = std::make_tuple(video, start, k);
    auto it = flows_.find(key);
    if (it == flows_.end()) {
      auto wf = std::make_unique<WindowFlows<S>>(
          build_window_flows(I, *(*dataset_)[std::size_t(video)].flows, start));
      it = flows_.emplace(key, std::move(wf)).first;
    }
    return *it->second;
  }

 private:
  const TrainDataset<S>* dataset_;
  const ConvFeatureNet<S>* fnet_;
  std::map<std::pair<int, int>, std::unique_ptr<FrameFeatures<S>>> features_;
  std::map<std::tuple<int, int, int>, std::unique_ptr<WindowFlows<S>>> flows_;
};

namespace traindetail {

/// Differentiable Ping Pong rollout on a fresh tape; mirrors the plain
/// pingpong_rollout exactly (state continues through the turn).
template <typename S>
struct TapeRollout {
  std::vector<int> fwd, bwd;
};

template <typename S>
TapeRollout<S> pingpong_rollout_tape(Tape<S>& tp, const ConsistencyNet<S>& net,
                                     const typename ConsistencyNet<S>::TapeParams& P,
                                     const WindowItem<S>& item) {
  const int k = item.I.size() - 1;
  TapeRollout<S> r;
  std::vector<int> I_ids, P_ids;
  for (int t = 0; t <= k; ++t) {
    I_ids.push_back(tp.leaf(item.I[t]));
    P_ids.push_back(tp.leaf(item.P[t]));
  }
  r.fwd.push_back(P_ids[0]);
  auto st = net.initial_state(tp, item.P[0].h, item.P[0].w, P_ids[0]);
  for (int t = 1; t <= k; ++t) {
    auto [o, ns] = net.step_tape(tp, P, I_ids[std::size_t(t)], I_ids[std::size_t(t) - 1],
                                 P_ids[std::size_t(t)], st);
    r.fwd.push_back(o);
    st = ns;
  }
  r.bwd.resize(std::size_t(k));
  for (int t = k - 1; t >= 0; --t) {
    auto [o, ns] = net.step_tape(tp, P, I_ids[std::size_t(t)], I_ids[std::size_t(t) + 1],
                                 P_ids[std::size_t(t)], st);
    r.bwd[std::size_t(t)] = o;
    st = ns;
  }
  return r;
}

template <typename S>
struct ItemResult {
  LossReport report;
  std::vector<typename Tensor<S>::Array> grads;  // per parameter slot
  bool finite = true;
};

template <typename S>
ItemResult<S> eval_item(const ConsistencyNet<S>& net, const ConvFeatureNet<S>& fnet,
                        const WindowItem<S>& item, const LossWeights& weights) {
  Tape<S> tp;
  const auto P = net.bind(tp);
  const TapeRollout<S> roll = pingpong_rollout_tape(tp, net, P, item);
  TotalTapeResult<S> total =
      total_tape(tp, roll.fwd, roll.bwd, item.flows, fnet, item.p_features, weights);
  ItemResult<S> r;
  r.report = total.report;
  if (!std::isfinite(r.report.total)) {
    r.finite = false;
    return r;
  }
  tp.backward(total.node);
  r.grads.reserve(P.ids.size());
  for (const int id : P.ids) {
    if (tp.touched(id)) {
      r.grads.push_back(tp.grad(id).data);
      if (!tp.grad(id).all_finite()) r.finite = false;
    } else {
      r.grads.push_back(Tensor<S>::Array::Zero(tp.val(id).size()));
    }
  }
  return r;
}

}  // namespace traindetail

/// One optimizer update on the mean total loss over the batch. Batch items
/// are evaluated on independent tapes (in parallel up to `threads`) and
/// reduced in batch order, so results are independent of thread count.
template <typename S>
LossReport train_step(const std::vector<WindowItem<S>>& batch, TrainState<S>& state,
                      const TrainConfig& cfg, const ConvFeatureNet<S>& fnet,
                      int threads = threads_from_env()) {
  if (batch.empty()) throw SpecError("empty training batch");
  std::vector<traindetail::ItemResult<S>> results(batch.size());
  const int n_threads = std::min<int>(threads, int(batch.size()));
  if (n_threads <= 1) {
    for (std::size_t i = 0; i < batch.size(); ++i)
      results[i] = traindetail::eval_item(state.net, fnet, batch[i], cfg.weights);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_threads));
    for (int w = 0; w < n_threads; ++w)
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = std::size_t(w); i < batch.size(); i += std::size_t(n_threads))
            results[i] = traindetail::eval_item(state.net, fnet, batch[i], cfg.weights);
        } catch (...) {
          errors[std::size_t(w)] = std::current_exception();
        }
      });
    for (auto& th : pool) th.join();
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  // Fixed-order reduction: mean loss and mean gradient over batch items.
  LossReport report;
  const double inv = 1.0 / double(batch.size());
  for (const auto& r : results) {
    for (const auto& [name, v] : r.report.terms) report.terms[name] += v * inv;
    report.total += r.report.total * inv;
  }
  for (const auto& r : results)
    if (!r.finite)
      throw NonFiniteLossError("non-finite loss or gradient at step " +
                               std::to_string(state.step) +
                               "; term breakdown: " + report.to_json(state.step));

  auto& params = state.net.named_params();
  std::vector<typename Tensor<S>::Array> grad(params.size());
  for (std::size_t s = 0; s < params.size(); ++s) {
    grad[s] = results[0].grads[s];
    for (std::size_t i = 1; i < results.size(); ++i) grad[s] += results[i].grads[s];
    grad[s] *= S(inv);
  }

  if (cfg.clip_norm > 0) {
    double norm2 = 0;
    for (const auto& g : grad) norm2 += double(g.square().sum());
    const double norm = std::sqrt(norm2);
    if (norm > cfg.clip_norm) {
      const S scale = S(cfg.clip_norm / norm);
      for (auto& g : grad) g *= scale;
    }
  }

  ++state.opt.t;
  const double bc1 = 1.0 - std::pow(cfg.beta1, double(state.opt.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, double(state.opt.t));
  for (std::size_t s = 0; s < params.size(); ++s) {
    auto& m = state.opt.m[s].data;
    auto& v = state.opt.v[s].data;
    m = S(cfg.beta1) * m + S(1 - cfg.beta1) * grad[s];
    v = S(cfg.beta2) * v + S(1 - cfg.beta2) * grad[s].square();
    params[s].second.data -=
        S(cfg.learning_rate) * (m / S(bc1)) / ((v / S(bc2)).sqrt() + S(cfg.adam_eps));
  }
  ++state.step;
  return report;
}

struct FitOptions {
  std::string run_dir;  // empty -> no metrics log / checkpoints on disk
  std::function<void(long step, const LossReport&)> on_step;
  int threads = threads_from_env();
};

/// Counts (video, start) pairs admitting a full window of k+1 frames.
template <typename S>
std::vector<std::pair<int, long>> window_counts(const TrainDataset<S>& dataset, int k) {
  std::vector<std::pair<int, long>> counts;
  for (std::size_t v = 0; v < dataset.size(); ++v) {
    const long n = dataset[v].triplet.processed.size() - k;
    if (n > 0) counts.emplace_back(int(v), n);
  }
  return counts;
}

/// Runs the full schedule: epochs x batches_per_epoch optimizer steps over
/// uniformly sampled windows (never crossing video boundaries), JSON-lines
/// metrics log, periodic + final checkpoints. Resumes when `initial` carries
/// a nonzero step; sampling state lives in the TrainState RNG, so a resumed
/// run continues bit-exactly.
template <typename S>
TrainState<S> fit(const TrainDataset<S>& dataset, const TrainConfig& cfg,
                  const ConvFeatureNet<S>& fnet, const FitOptions& opt = {},
                  std::optional<TrainState<S>> initial = std::nullopt) {
  cfg.validate();
  if (dataset.empty()) throw SpecError("training dataset is empty");
  const int k = cfg.window_frames - 1;
  const auto counts = window_counts(dataset, k);
  if (counts.empty()) throw WindowTooShortError("no video admits a full training window");
  long total_windows = 0;
  for (const auto& [v, n] : counts) total_windows += n;

  TrainState<S> state = initial ? std::move(*initial) : make_initial_state<S>(cfg);
  WindowCache<S> cache(&dataset, &fnet);

  std::ofstream log;
  if (!opt.run_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(opt.run_dir, ec);
    if (ec) throw IoError("cannot create run directory " + opt.run_dir + ": " + ec.message());
    log.open(std::filesystem::path(opt.run_dir) / "metrics.jsonl",
             state.step > 0 ? std::ios::app : std::ios::out);
    if (!log) throw IoError("cannot open metrics log in " + opt.run_dir);
  }
  const auto checkpoint_path = [&](const char* name) {
    return (std::filesystem::path(opt.run_dir) / name).string();
  };

  const long total = cfg.total_steps();
  while (state.step < total) {
    std::vector<WindowItem<S>> batch;
    batch.reserve(std::size_t(cfg.batch_size));
    for (int b = 0; b < cfg.batch_size; ++b) {
      long u = long(state.rng.uniform_index(std::uint64_t(total_windows)));
      int video = 0, start = 0;
      for (const auto& [v, n] : counts) {
        if (u < n) {
          video = v;
          start = int(u);
          break;
        }
        u -= n;
      }
      batch.push_back(cache.window(video, start, k));
    }
    const LossReport report = train_step(batch, state, cfg, fnet, opt.threads);
    if (log.is_open()) log << report.to_json(state.step) << "\n" << std::flush;
    if (opt.on_step) opt.on_step(state.step, report);
    if (!opt.run_dir.empty() && cfg.checkpoint_every > 0 &&
        state.step % cfg.checkpoint_every == 0 && state.step < total)
      save_checkpoint(checkpoint_path("checkpoint-latest.dfck"), to_checkpoint(state));
  }
  if (!opt.run_dir.empty())
    save_checkpoint(checkpoint_path("checkpoint-final.dfck"), to_checkpoint(state));
  return state;
}

}  // namespace deflicker
