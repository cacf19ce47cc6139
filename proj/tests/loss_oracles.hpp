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

// Loop-based reimplementations of every loss term, written from the loss
// definitions and sharing no arithmetic with the library (warping, moments,
// norms, and reductions are all redone by hand; SVDs use Eigen::JacobiSVD
// directly). Feature maps come from ConvFeatureNet::extract, which is itself
// verified against a naive convolution oracle in the features suite.

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdlib>
#include <string>
#include <vector>

#include "deflicker/losses/losses.hpp"

namespace lossoracle {

using deflicker::ConvFeatureNet;
using deflicker::FlowField;
using deflicker::LossWeights;
using deflicker::Tensor;
using deflicker::WindowFlows;

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

/// Border-clamped bilinear sample at continuous coordinates.
template <typename S>
S sample(const Tensor<S>& f, int c, double cy, double cx) {
  cy = std::min(std::max(cy, 0.0), double(f.h - 1));
  cx = std::min(std::max(cx, 0.0), double(f.w - 1));
  const int y0 = int(cy), x0 = int(cx);
  const int y1 = std::min(y0 + 1, f.h - 1), x1 = std::min(x0 + 1, f.w - 1);
  const double fy = cy - y0, fx = cx - x0;
  return S((1 - fy) * (1 - fx) * double(f(c, y0, x0)) + (1 - fy) * fx * double(f(c, y0, x1)) +
           fy * (1 - fx) * double(f(c, y1, x0)) + fy * fx * double(f(c, y1, x1)));
}

template <typename S>
Tensor<S> warp(const Tensor<S>& f, const FlowField<S>& flow) {
  Tensor<S> out(f.c, f.h, f.w);
  for (int c = 0; c < f.c; ++c)
    for (int y = 0; y < f.h; ++y)
      for (int x = 0; x < f.w; ++x)
        out(c, y, x) = sample(f, c, y + double(flow.dy(y, x)), x + double(flow.dx(y, x)));
  return out;
}

/// sum over pixels of mask * per-channel L1 difference.
template <typename S>
S masked_l1(const Tensor<S>& a, const Tensor<S>& b, const Tensor<S>& mask) {
  S acc = 0;
  for (int c = 0; c < a.c; ++c)
    for (int y = 0; y < a.h; ++y)
      for (int x = 0; x < a.w; ++x) acc += mask(0, y, x) * std::abs(a(c, y, x) - b(c, y, x));
  return acc;
}

/// Per-channel spatial mean and population std (eps under the root).
template <typename S>
void moments(const Tensor<S>& m, std::vector<S>& mean, std::vector<S>& sd) {
  mean.assign(std::size_t(m.c), S(0));
  sd.assign(std::size_t(m.c), S(0));
  const S n = S(m.h) * S(m.w);
  for (int c = 0; c < m.c; ++c) {
    S s = 0;
    for (int y = 0; y < m.h; ++y)
      for (int x = 0; x < m.w; ++x) s += m(c, y, x);
    mean[std::size_t(c)] = s / n;
    S v = 0;
    for (int y = 0; y < m.h; ++y)
      for (int x = 0; x < m.w; ++x) {
        const S d = m(c, y, x) - mean[std::size_t(c)];
        v += d * d;
      }
    sd[std::size_t(c)] = std::sqrt(v / n + S(1e-8));
  }
}

/// Content loss: sum over t = 2..T and the four blocks of the per-element
/// mean L1 feature distance.
template <typename S>
S content(const std::vector<Tensor<S>>& O, const std::vector<Tensor<S>>& P,
          const ConvFeatureNet<S>& net) {
  S acc = 0;
  for (std::size_t t = 1; t < O.size(); ++t)
    for (const auto& b : deflicker::all_feature_blocks()) {
      const Tensor<S> fo = net.extract(O[t], {b}).at(b);
      const Tensor<S> fp = net.extract(P[t], {b}).at(b);
      S d = 0;
      for (std::ptrdiff_t i = 0; i < fo.data.size(); ++i) d += std::abs(fo.data[i] - fp.data[i]);
      acc += d / S(fo.data.size());
    }
  return acc;
}

/// Squared L2 between channel means and stds of two maps.
template <typename S>
S stat_dist(const Tensor<S>& a, const Tensor<S>& b) {
  std::vector<S> ma, sa, mb, sb;
  moments(a, ma, sa);
  moments(b, mb, sb);
  S acc = 0;
  for (std::size_t c = 0; c < ma.size(); ++c)
    acc += (ma[c] - mb[c]) * (ma[c] - mb[c]) + (sa[c] - sb[c]) * (sa[c] - sb[c]);
  return acc;
}

template <typename S>
S style_preserving(const std::vector<Tensor<S>>& O, const std::vector<Tensor<S>>& P,
                   const ConvFeatureNet<S>& net) {
  S acc = 0;
  for (std::size_t t = 1; t < O.size(); ++t)
    for (const std::string b : {"relu1_2", "relu2_2"})
      acc += stat_dist(net.extract(O[t], {b}).at(b), net.extract(P[t], {b}).at(b));
  return acc;
}

template <typename S>
S style_temporal(const std::vector<Tensor<S>>& O, const ConvFeatureNet<S>& net) {
  S acc = 0;
  for (std::size_t t = 1; t < O.size(); ++t)
    for (const std::string b : {"relu1_2", "relu2_2"})
      acc += stat_dist(net.extract(O[t], {b}).at(b), net.extract(O[t - 1], {b}).at(b));
  return acc;
}

/// Short-term loss over both branches; the backward neighbor at the turn is
/// the shared forward frame O_k.
template <typename S>
S short_term(const std::vector<Tensor<S>>& fwd, const std::vector<Tensor<S>>& bwd,
             const WindowFlows<S>& wf) {
  const int k = int(fwd.size()) - 1;
  S acc = 0;
  for (int t = 1; t <= k; ++t)
    acc += masked_l1(fwd[std::size_t(t)], lossoracle::warp(fwd[std::size_t(t) - 1], wf.prev[std::size_t(t)].flow),
                     wf.prev[std::size_t(t)].visibility);
  for (int t = 0; t < int(bwd.size()); ++t) {
    const Tensor<S>& nb = (t + 1 < int(bwd.size())) ? bwd[std::size_t(t) + 1] : fwd[std::size_t(k)];
    acc += masked_l1(bwd[std::size_t(t)], lossoracle::warp(nb, wf.next[std::size_t(t)].flow),
                     wf.next[std::size_t(t)].visibility);
  }
  return acc;
}

template <typename S>
S long_term(const std::vector<Tensor<S>>& fwd, const WindowFlows<S>& wf) {
  const int k = int(fwd.size()) - 1;
  S acc = 0;
  for (int t = 1; t <= k; ++t)
    acc += masked_l1(fwd[std::size_t(t)], lossoracle::warp(fwd[0], wf.first[std::size_t(t)].flow),
                     wf.first[std::size_t(t)].visibility);
  return acc;
}

template <typename S>
S pingpong(const std::vector<Tensor<S>>& fwd, const std::vector<Tensor<S>>& bwd) {
  const int k = int(bwd.size());
  S acc = 0;
  for (int t = 1; t <= k - 1; ++t) {
    S ss = 0;
    for (std::ptrdiff_t i = 0; i < fwd[std::size_t(t)].data.size(); ++i) {
      const S d = fwd[std::size_t(t)].data[i] - bwd[std::size_t(t)].data[i];
      ss += d * d;
    }
    acc += std::sqrt(ss);
  }
  return acc;
}

/// chi: row t = vec(occ_ref[t] ⊙ warp(luminance_t, F_{ref,t})), the reference
/// row unwarped and unmasked.
template <typename S>
Mat<S> rank_chi(const std::vector<Tensor<S>>& frames, const WindowFlows<S>& wf) {
  const int K = int(frames.size());
  const int h = frames[0].h, w = frames[0].w;
  Mat<S> chi(K, h * w);
  for (int t = 0; t < K; ++t) {
    Tensor<S> lum(1, h, w);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        lum(0, y, x) = S(0.299) * frames[std::size_t(t)](0, y, x) +
                       S(0.587) * frames[std::size_t(t)](1, y, x) +
                       S(0.114) * frames[std::size_t(t)](2, y, x);
    if (t != wf.ref) {
      lum = lossoracle::warp(lum, wf.to_ref[std::size_t(t)]);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) lum(0, y, x) *= wf.occ_ref[std::size_t(t)](0, y, x);
    }
    for (int i = 0; i < h * w; ++i) chi(t, i) = lum.data[i];
  }
  return chi;
}

template <typename S>
S nuclear(const Mat<S>& m) {
  Eigen::JacobiSVD<Mat<S>> svd(m);
  return svd.singularValues().sum();
}

template <typename S>
S low_rank(const std::vector<Tensor<S>>& I, const std::vector<Tensor<S>>& O,
           const WindowFlows<S>& wf) {
  const S d = nuclear(rank_chi(I, wf)) - nuclear(rank_chi(O, wf));
  return d * d;
}

/// Weighted total over one Ping Pong window; the perceptual terms run over
/// the palindromic traversal, lambda_SP multiplies both style parts.
template <typename S>
S total(const std::vector<Tensor<S>>& I, const std::vector<Tensor<S>>& fwd,
        const std::vector<Tensor<S>>& bwd, const std::vector<Tensor<S>>& P,
        const WindowFlows<S>& wf, const ConvFeatureNet<S>& net, const LossWeights& w) {
  const int k = int(fwd.size()) - 1;
  std::vector<Tensor<S>> trav = fwd, ptrav = P;
  for (int t = k - 1; t >= 0; --t) {
    trav.push_back(bwd[std::size_t(t)]);
    ptrav.push_back(P[std::size_t(t)]);
  }
  return S(w.lambda_p) * content(trav, ptrav, net) +
         S(w.lambda_SP) * (style_preserving(trav, ptrav, net) + style_temporal(trav, net)) +
         S(w.lambda_st) * short_term(fwd, bwd, wf) + S(w.lambda_lt) * long_term(fwd, wf) +
         S(w.lambda_rank) * low_rank(I, fwd, wf) + S(w.lambda_PP) * pingpong(fwd, bwd);
}

/// Random window inputs for oracle sweeps: non-integer flows, continuous
/// visibility masks, binary occlusion masks, reference at floor(k/2).
template <typename S>
WindowFlows<S> random_window_flows(deflicker::Rng& rng, int k, int h, int w) {
  WindowFlows<S> wf;
  wf.prev.resize(std::size_t(k) + 1);
  wf.next.resize(std::size_t(k) + 1);
  wf.first.resize(std::size_t(k) + 1);
  wf.to_ref.resize(std::size_t(k) + 1);
  wf.occ_ref.resize(std::size_t(k) + 1);
  auto rflow = [&]() {
    FlowField<S> f(h, w);
    for (std::ptrdiff_t i = 0; i < f.d.data.size(); ++i) {
      double v = rng.uniform(-1.7, 1.7);
      if (std::abs(v - std::round(v)) < 0.05) v += 0.1;  // stay off bilinear kinks
      f.d.data[i] = S(v);
    }
    return f;
  };
  auto rmask = [&]() {
    Tensor<S> m(1, h, w);
    for (std::ptrdiff_t i = 0; i < m.data.size(); ++i) m.data[i] = S(rng.uniform(0.05, 1.0));
    return m;
  };
  auto rbin = [&]() {
    Tensor<S> m(1, h, w);
    for (std::ptrdiff_t i = 0; i < m.data.size(); ++i) m.data[i] = S(rng.uniform() < 0.8 ? 1 : 0);
    return m;
  };
  for (int t = 1; t <= k; ++t) {
    wf.prev[std::size_t(t)] = {rflow(), rmask()};
    wf.first[std::size_t(t)] = {rflow(), rmask()};
  }
  for (int t = 0; t < k; ++t) wf.next[std::size_t(t)] = {rflow(), rmask()};
  wf.ref = k / 2;
  for (int t = 0; t <= k; ++t) {
    if (t == wf.ref) continue;
    wf.to_ref[std::size_t(t)] = rflow();
    wf.occ_ref[std::size_t(t)] = rbin();
  }
  return wf;
}

}  // namespace lossoracle
