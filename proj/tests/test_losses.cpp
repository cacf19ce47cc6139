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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <nlohmann/json.hpp>

#include "deflicker/losses/losses.hpp"
#include "helpers.hpp"
#include "loss_oracles.hpp"

using namespace deflicker;

namespace {

FrameSequence<double> to_seq(std::vector<Tensor<double>> frames) {
  FrameSequence<double> s;
  s.frames = std::move(frames);
  return s;
}

RolloutResult<double> make_result(std::vector<Tensor<double>> fwd,
                                  std::vector<Tensor<double>> bwd) {
  RolloutResult<double> r;
  r.forward_outputs.frames = std::move(fwd);
  r.backward_outputs.frames = std::move(bwd);
  return r;
}

/// Zero flows, all-ones visibility and occlusion masks: a static fully
/// visible scene's window inputs.
WindowFlows<double> static_window_flows(int k, int h, int w) {
  WindowFlows<double> wf;
  wf.prev.resize(std::size_t(k) + 1);
  wf.next.resize(std::size_t(k) + 1);
  wf.first.resize(std::size_t(k) + 1);
  wf.to_ref.resize(std::size_t(k) + 1);
  wf.occ_ref.resize(std::size_t(k) + 1);
  const auto ones = Tensor<double>::constant(1, h, w, 1.0);
  for (int t = 1; t <= k; ++t) {
    wf.prev[std::size_t(t)] = {FlowField<double>(h, w), ones};
    wf.first[std::size_t(t)] = {FlowField<double>(h, w), ones};
  }
  for (int t = 0; t < k; ++t) wf.next[std::size_t(t)] = {FlowField<double>(h, w), ones};
  wf.ref = k / 2;
  for (int t = 0; t <= k; ++t) {
    if (t == wf.ref) continue;
    wf.to_ref[std::size_t(t)] = FlowField<double>(h, w);
    wf.occ_ref[std::size_t(t)] = ones;
  }
  return wf;
}

/// Central finite differences of a tape-built scalar against its analytic
/// gradient, sampling `n_coords` random frame entries.
template <typename Builder>
void fd_check(std::vector<Tensor<double>> frames, Builder build, int n_coords, Rng& rng,
              double step = 1e-3, double tol = 1e-2) {
  std::vector<double> grads;  // flattened per (frame, coord) sample
  struct Coord {
    std::size_t frame;
    std::ptrdiff_t flat;
  };
  std::vector<Coord> coords;
  for (int i = 0; i < n_coords; ++i) {
    const auto fi = std::size_t(rng.uniform_index(frames.size()));
    coords.push_back({fi, std::ptrdiff_t(rng.uniform_index(std::uint64_t(
                              frames[fi].data.size())))});
  }
  {
    Tape<double> tp;
    std::vector<int> ids;
    for (const auto& f : frames) ids.push_back(tp.leaf(f));
    const int root = build(tp, ids);
    tp.backward(root);
    for (const auto& c : coords)  // untouched leaves carry zero gradient
      grads.push_back(tp.touched(ids[c.frame]) ? tp.grad(ids[c.frame]).data[c.flat] : 0.0);
  }
  auto eval = [&]() {
    Tape<double> tp;
    std::vector<int> ids;
    for (const auto& f : frames) ids.push_back(tp.leaf(f));
    return tp.val(build(tp, ids)).value();
  };
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const auto& c = coords[i];
    const double base = frames[c.frame].data[c.flat];
    frames[c.frame].data[c.flat] = base + step;
    const double up = eval();
    frames[c.frame].data[c.flat] = base - step;
    const double dn = eval();
    frames[c.frame].data[c.flat] = base;
    const double fd = (up - dn) / (2 * step);
    const double got = grads[i];
    const double denom = std::max({std::abs(fd), std::abs(got), 1e-6});
    INFO("coord ", i, ": analytic ", got, " vs fd ", fd);
    CHECK(std::abs(got - fd) / denom <= tol);
  }
}

}  // namespace

// ---------------------------------------------------------------- content

TEST_CASE("content loss is zero for identical sequences") {
  auto net = ConvFeatureNet<double>::fixed_random(100);
  Rng rng(60);
  const auto O = testutil::random_sequence<double>(rng, 2, 16, 16);
  CHECK(content_perceptual(O, O, net) == 0.0);
}

TEST_CASE("content loss matches the loop oracle on a perturbed pixel") {
  auto net = ConvFeatureNet<double>::fixed_random(100);
  Rng rng(61);
  const auto P = testutil::random_sequence<double>(rng, 2, 16, 16);
  auto O = P;
  O.frames[1](1, 7, 5) += 0.25;
  const double got = content_perceptual(O, P, net);
  const double want = lossoracle::content(O.frames, P.frames, net);
  CHECK(got > 0.0);
  CHECK(testutil::rel_err(got, want) <= 1e-10);
}

TEST_CASE("appending an identical frame pair leaves content unchanged") {
  auto net = ConvFeatureNet<double>::fixed_random(100);
  Rng rng(62);
  const auto P = testutil::random_sequence<double>(rng, 3, 16, 16);
  auto O = P;
  O.frames[1](0, 3, 3) += 0.2;
  auto O2 = to_seq({O[0], O[1]});
  auto P2 = to_seq({P[0], P[1]});
  const double short_loss = content_perceptual(O2, P2, net);
  const double long_loss = content_perceptual(O, P, net);  // O[2] == P[2]
  CHECK(testutil::rel_err(long_loss, short_loss) <= 1e-12);
}

TEST_CASE("content rejects short or mismatched sequences") {
  auto net = ConvFeatureNet<double>::fixed_random(100);
  Rng rng(63);
  const auto one = testutil::random_sequence<double>(rng, 1, 16, 16);
  CHECK_THROWS_AS(content_perceptual(one, one, net), WindowTooShortError);
  const auto two = testutil::random_sequence<double>(rng, 2, 16, 16);
  const auto three = testutil::random_sequence<double>(rng, 3, 16, 16);
  CHECK_THROWS_AS(content_perceptual(two, three, net), DimensionMismatchError);
}

// ---------------------------------------------------------------- style

TEST_CASE("style-preserving loss is zero for identical sequences") {
  auto net = ConvFeatureNet<double>::fixed_random(100);
  Rng rng(64);
  const auto O = testutil::random_sequence<double>(rng, 3, 8, 8);
  CHECK(style_preserving(O, O, net) == 0.0);
  CHECK_THROWS_AS(style_preserving(to_seq({O[0]}), to_seq({O[0]}), net), WindowTooShortError);
}

TEST_CASE("channel statistics are invariant to spatial permutation") {
  // The moment distance the style losses use cannot see pixel order: a
  // feature map and any spatial shuffle of it are zero distance apart.
  Rng rng(65);
  const auto block = testutil::random_tensor<double>(rng, 4, 3, 5);
  auto shuffled = block;
  for (int c = 0; c < block.c; ++c) {
    std::vector<double> v;
    for (int i = 0; i < block.plane_size(); ++i) v.push_back(block.plane(c)[i]);
    for (std::size_t i = v.size(); i > 1; --i)
      std::swap(v[i - 1], v[std::size_t(rng.uniform_index(i))]);
    for (int i = 0; i < block.plane_size(); ++i) shuffled.plane(c)[i] = v[std::size_t(i)];
  }
  const auto a = channel_stats(block), b = channel_stats(shuffled);
  CHECK(testutil::max_abs_diff(a.mean, b.mean) <= 1e-12);
  CHECK(testutil::max_abs_diff(a.std, b.std) <= 1e-12);
  CHECK(lossoracle::stat_dist(block, shuffled) <= 1e-20);
}

TEST_CASE("statistic distance hand case: means 2.5 vs 3.0, equal stds") {
  // Channel 0 means differ by 0.5 with matching stds; channel 1 identical.
  Tensor<double> a(2, 1, 2), b(2, 1, 2);
  a(0, 0, 0) = 2.0;
  a(0, 0, 1) = 3.0;  // mean 2.5, std 0.5
  b(0, 0, 0) = 2.5;
  b(0, 0, 1) = 3.5;  // mean 3.0, std 0.5
  a(1, 0, 0) = b(1, 0, 0) = 1.0;
  a(1, 0, 1) = b(1, 0, 1) = 2.0;
  CHECK(lossoracle::stat_dist(a, b) == doctest::Approx(0.25).epsilon(1e-9));

  // Same value through the tape machinery the losses use.
  Tape<double> tp;
  const int ia = tp.leaf(a);
  const std::pair<int, int> sa{ops::channel_mean(tp, ia), ops::channel_std(tp, ia)};
  const int d = lossdetail::stats_dist_const(tp, sa, channel_stats(b));
  CHECK(tp.val(d).value() == doctest::Approx(0.25).epsilon(1e-9));
}

TEST_CASE("style-temporal loss is zero on a static video") {
  auto net = ConvFeatureNet<double>::fixed_random(100);
  Rng rng(66);
  const auto f = testutil::random_tensor<double>(rng, 3, 8, 8);
  CHECK(style_temporal(to_seq({f, f, f}), net) == 0.0);
  CHECK_THROWS_AS(style_temporal(to_seq({f}), net), WindowTooShortError);
  CHECK(style_temporal(to_seq({f, testutil::random_tensor<double>(rng, 3, 8, 8)}), net) > 0.0);
}

// ---------------------------------------------------------------- short-term

TEST_CASE("short-term loss on a static fully visible scene is zero") {
  Rng rng(67);
  const auto f = testutil::random_tensor<double>(rng, 3, 6, 6);
  const auto wf = static_window_flows(2, 6, 6);
  CHECK(short_term(make_result({f, f, f}, {f, f}), wf) == 0.0);
}

TEST_CASE("short-term single-pixel hand case gives 0.2") {
  const int h = 4, w = 4;
  auto wf = static_window_flows(1, h, w);
  const auto O0 = Tensor<double>::constant(3, h, w, 0.25);
  auto O1 = O0;
  O1(2, 1, 3) += 0.2;  // forward term: |O_1 - O_0| at one pixel, one channel
  // Backward branch: O'_0 equals the warped turn frame, contributing zero.
  const double got = short_term(make_result({O0, O1}, {O1}), wf);
  CHECK(got == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("fully masked short-term loss is zero regardless of outputs") {
  Rng rng(68);
  auto wf = static_window_flows(2, 5, 5);
  for (auto& p : wf.prev) if (!p.visibility.empty()) p.visibility.data.setZero();
  for (auto& p : wf.next) if (!p.visibility.empty()) p.visibility.data.setZero();
  const auto O = testutil::random_sequence<double>(rng, 3, 5, 5);
  const auto B = testutil::random_sequence<double>(rng, 2, 5, 5);
  CHECK(short_term(make_result(O.frames, B.frames), wf) == 0.0);
}

TEST_CASE("short-term loss requires every adjacent flow") {
  Rng rng(69);
  auto wf = static_window_flows(2, 5, 5);
  wf.prev[1].flow = FlowField<double>();
  const auto O = testutil::random_sequence<double>(rng, 3, 5, 5);
  const auto B = testutil::random_sequence<double>(rng, 2, 5, 5);
  CHECK_THROWS_AS(short_term(make_result(O.frames, B.frames), wf), MissingFlowError);
}

// ---------------------------------------------------------------- long-term

TEST_CASE("long-term hand case: 2x2 frames, 0.2 offset at t=3 only") {
  const auto O0 = Tensor<double>::constant(3, 2, 2, 0.5);
  const auto O2 = Tensor<double>::constant(3, 2, 2, 0.7);
  const auto wf = static_window_flows(2, 2, 2);
  // t=1 term vanishes (O_1 == O_0); t=2 contributes 0.2 * 3 channels * 4 px.
  const double got = long_term(to_seq({O0, O0, O2}), wf);
  CHECK(got == doctest::Approx(2.4).epsilon(1e-12));
}

TEST_CASE("long-term loss is zero on a static video and under zero masks") {
  Rng rng(70);
  const auto f = testutil::random_tensor<double>(rng, 3, 5, 5);
  auto wf = static_window_flows(2, 5, 5);
  CHECK(long_term(to_seq({f, f, f}), wf) == 0.0);
  for (auto& p : wf.first) if (!p.visibility.empty()) p.visibility.data.setZero();
  const auto O = testutil::random_sequence<double>(rng, 3, 5, 5);
  CHECK(long_term(O, wf) == 0.0);
  wf.first[2].flow = FlowField<double>();
  CHECK_THROWS_AS(long_term(O, wf), MissingFlowError);
}

// ---------------------------------------------------------------- pingpong

TEST_CASE("pingpong hand case: single 0.3 difference at t=1, k=2") {
  Rng rng(71);
  const auto A = testutil::random_tensor<double>(rng, 3, 4, 4);
  const auto B = testutil::random_tensor<double>(rng, 3, 4, 4);
  const auto C = testutil::random_tensor<double>(rng, 3, 4, 4);
  auto Bp = B;
  Bp(0, 2, 2) -= 0.3;
  const double got = pingpong(make_result({A, B, C}, {C, Bp}));
  CHECK(got == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("pingpong of k=1 is the empty sum") {
  Rng rng(72);
  const auto A = testutil::random_tensor<double>(rng, 3, 4, 4);
  const auto B = testutil::random_tensor<double>(rng, 3, 4, 4);
  CHECK(pingpong(make_result({A, B}, {B})) == 0.0);
}

TEST_CASE("pingpong is symmetric under swapping the branches") {
  Rng rng(73);
  const auto O = testutil::random_sequence<double>(rng, 4, 4, 4);
  const auto B = testutil::random_sequence<double>(rng, 3, 4, 4);
  const double a = pingpong(make_result(O.frames, B.frames));
  // Swap the k overlapping positions between the branches; the turn stays.
  std::vector<Tensor<double>> fwd2(B.frames), bwd2(O.frames.begin(), O.frames.end() - 1);
  fwd2.push_back(O.frames.back());
  const double b = pingpong(make_result(fwd2, bwd2));
  CHECK(a == b);
  CHECK(a > 0.0);
}

// ---------------------------------------------------------------- rank

TEST_CASE("rank matrix of a static video is rank one") {
  Rng rng(74);
  const auto f = testutil::random_tensor<double>(rng, 3, 4, 4);
  const auto wf = static_window_flows(2, 4, 4);
  std::vector<FlowField<double>> flows(wf.to_ref.begin(), wf.to_ref.end());
  std::vector<Tensor<double>> occs(wf.occ_ref.begin(), wf.occ_ref.end());
  const auto rm = build_rank_matrix(to_seq({f, f, f}), flows, occs, wf.ref);
  REQUIRE(rm.chi.h == 3);
  REQUIRE(rm.chi.w == 16);
  for (int r = 1; r < 3; ++r)
    for (int i = 0; i < 16; ++i)
      CHECK(rm.chi(0, r, i) == doctest::Approx(rm.chi(0, 0, i)).epsilon(1e-12));
  const double nuc = nuclear_norm_value(rm.chi);
  const double frob = std::sqrt(rm.chi.data.square().sum());
  CHECK(testutil::rel_err(nuc, frob) <= 1e-9);  // single nonzero singular value
}

TEST_CASE("rank matrix matches hand assembly on 2x2 frames") {
  // Three 2x2 frames, reference t=1. Frame 0 is warped by dx=1 (shift left,
  // right column clamped), frame 2 is masked by a checker pattern.
  Tensor<double> f0(3, 2, 2), f1(3, 2, 2), f2(3, 2, 2);
  Rng rng(75);
  for (auto* f : {&f0, &f1, &f2})
    for (std::ptrdiff_t i = 0; i < f->data.size(); ++i) f->data[i] = rng.uniform();
  auto lum = [](const Tensor<double>& f, int y, int x) {
    return 0.299 * f(0, y, x) + 0.587 * f(1, y, x) + 0.114 * f(2, y, x);
  };

  std::vector<FlowField<double>> flows(3);
  std::vector<Tensor<double>> occs(3);
  flows[0] = FlowField<double>::constant(2, 2, 1.0, 0.0);
  flows[2] = FlowField<double>(2, 2);
  occs[0] = Tensor<double>::constant(1, 2, 2, 1.0);
  occs[2] = Tensor<double>::constant(1, 2, 2, 1.0);
  occs[2].data[1] = 0.0;
  occs[2].data[2] = 0.0;

  const auto rm = build_rank_matrix(to_seq({f0, f1, f2}), flows, occs, 1);
  // Row 0: luminance of f0 sampled at x+1 (clamped at the right edge).
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x)
      CHECK(rm.chi(0, 0, y * 2 + x) ==
            doctest::Approx(lum(f0, y, std::min(x + 1, 1))).epsilon(1e-12));
  // Row 1: reference, unwarped and unmasked.
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x)
      CHECK(rm.chi(0, 1, y * 2 + x) == doctest::Approx(lum(f1, y, x)).epsilon(1e-12));
  // Row 2: masked luminance.
  for (int i = 0; i < 4; ++i)
    CHECK(rm.chi(0, 2, i) ==
          doctest::Approx(occs[2].data[i] * lum(f2, i / 2, i % 2)).epsilon(1e-12));
}

TEST_CASE("zero occlusion masks blank every non-reference row") {
  Rng rng(76);
  const auto O = testutil::random_sequence<double>(rng, 3, 4, 4);
  auto wf = static_window_flows(2, 4, 4);
  for (auto& m : wf.occ_ref) if (!m.empty()) m.data.setZero();
  std::vector<FlowField<double>> flows(wf.to_ref.begin(), wf.to_ref.end());
  std::vector<Tensor<double>> occs(wf.occ_ref.begin(), wf.occ_ref.end());
  const auto rm = build_rank_matrix(O, flows, occs, wf.ref);
  for (int t = 0; t < 3; ++t) {
    double row_abs = 0;
    for (int i = 0; i < 16; ++i) row_abs += std::abs(rm.chi(0, t, i));
    if (t == wf.ref)
      CHECK(row_abs > 0.0);  // the reference row is never masked
    else
      CHECK(row_abs == 0.0);
  }
}

TEST_CASE("build_rank_matrix input validation") {
  Rng rng(77);
  const auto O = testutil::random_sequence<double>(rng, 3, 4, 4);
  const auto wf = static_window_flows(2, 4, 4);
  std::vector<FlowField<double>> flows(wf.to_ref.begin(), wf.to_ref.end());
  std::vector<Tensor<double>> occs(wf.occ_ref.begin(), wf.occ_ref.end());
  CHECK_THROWS_AS(build_rank_matrix(FrameSequence<double>{}, flows, occs, 0), NoFramesError);
  CHECK_THROWS_AS(build_rank_matrix(O, flows, occs, 5), IndexError);
  CHECK_THROWS_AS(build_rank_matrix(O, {flows[0]}, occs, 1), DimensionMismatchError);
  auto missing = flows;
  missing[0] = FlowField<double>();
  CHECK_THROWS_AS(build_rank_matrix(O, missing, occs, 1), MissingFlowError);
}

TEST_CASE("low-rank loss hand case: diag(3,4) against zero gives 49") {
  RankMatrix<double> a, b;
  a.chi = Tensor<double>(1, 2, 4);
  a.chi(0, 0, 0) = 3.0;
  a.chi(0, 1, 1) = 4.0;
  b.chi = Tensor<double>(1, 2, 4);
  CHECK(nuclear_norm_value(a.chi) == doctest::Approx(7.0).epsilon(1e-12));
  CHECK(low_rank(a, b) == doctest::Approx(49.0).epsilon(1e-12));
  CHECK(low_rank(a, a) == 0.0);

  RankMatrix<double> c;
  c.chi = Tensor<double>(1, 3, 4);
  CHECK_THROWS_AS(low_rank(a, c), ShapeError);
}

TEST_CASE("nuclear norm of a random 4x9 matrix matches the SVD oracle") {
  Rng rng(11);
  Tensor<double> chi(1, 4, 9);
  for (std::ptrdiff_t i = 0; i < chi.data.size(); ++i) chi.data[i] = rng.uniform(-1.0, 1.0);
  lossoracle::Mat<double> m(4, 9);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 9; ++c) m(r, c) = chi(0, r, c);
  CHECK(testutil::rel_err(nuclear_norm_value(chi), lossoracle::nuclear(m)) <= 1e-6);
}

// ---------------------------------------------------------------- total

TEST_CASE("weighted total arithmetic on unit terms") {
  const LossWeights w;
  // 10*1 + 10*1 + 100*1 + 100*1 + 1e-5*1 + 100*1, with the style pair
  // already combined into its single weighted term.
  CHECK(weighted_total(w, 1, 1, 1, 1, 1, 1) == doctest::Approx(320.00001).epsilon(1e-12));
  LossWeights zero;
  zero.lambda_p = zero.lambda_SP = zero.lambda_st = zero.lambda_lt = zero.lambda_rank =
      zero.lambda_PP = 0;
  CHECK(weighted_total(zero, 1, 1, 1, 1, 1, 1) == 0.0);
  LossWeights bad;
  bad.lambda_st = -1;
  CHECK_THROWS_AS(bad.validate(), SpecError);
}

TEST_CASE("every loss is zero under the identity on a static visible scene") {
  auto fnet = ConvFeatureNet<double>::fixed_random(100);
  Rng rng(78);
  const auto f = testutil::random_tensor<double>(rng, 3, 16, 16);
  const auto I = to_seq({f, f, f});   // static raw video
  const auto P = I;                   // identity processing
  NetConfig cfg;
  cfg.base_channels = 4;
  cfg.residual_blocks = 2;
  ConsistencyNet<double> net(cfg, 3);  // zero-init: O == P
  const auto result = net.pingpong_rollout(I, P);
  const auto wf = [&] {
    GroundTruthFlowSource<double> src(16, 16, {{0, 0}, {0, 0}, {0, 0}});
    return build_window_flows(I, src, 0);
  }();
  const auto report = total(result, P, wf, fnet, LossWeights{});
  for (const auto& [name, v] : report.terms) {
    INFO("term ", name);
    CHECK(v == 0.0);
  }
  CHECK(report.total == 0.0);
}

TEST_CASE("loss report total equals the weighted term sum") {
  auto fnet = ConvFeatureNet<double>::fixed_random(100);
  Rng rng(79);
  const auto I = testutil::random_sequence<double>(rng, 3, 16, 16);
  const auto P = testutil::random_sequence<double>(rng, 3, 16, 16);
  NetConfig cfg;
  cfg.base_channels = 4;
  cfg.residual_blocks = 2;
  cfg.zero_init_output = false;
  ConsistencyNet<double> net(cfg, 9);
  const auto result = net.pingpong_rollout(I, P);
  GroundTruthFlowSource<double> src(16, 16, {{0, 0}, {0.6, 0.3}, {1.2, 0.6}});
  const auto wf = build_window_flows(I, src, 0);
  const LossWeights w;
  const auto report = total(result, P, wf, fnet, w);

  for (const auto& name : {"content", "style_preserving", "style_temporal", "short_term",
                           "long_term", "rank", "pingpong"}) {
    INFO("term ", name);
    CHECK(report.terms.count(name) == 1);
    CHECK(report.term(name) >= 0.0);
  }
  CHECK(report.term("content") > 0.0);
  CHECK(report.term("pingpong") > 0.0);
  const double recombined =
      weighted_total(w, report.term("content"),
                     report.term("style_preserving") + report.term("style_temporal"),
                     report.term("short_term"), report.term("long_term"), report.term("rank"),
                     report.term("pingpong"));
  CHECK(testutil::rel_err(report.total, recombined) <= 1e-6);

  // And the total matches the full loop oracle end to end.
  const double want = lossoracle::total(I.frames, result.forward_outputs.frames,
                                        result.backward_outputs.frames, P.frames, wf, fnet, w);
  CHECK(testutil::rel_err(report.total, want) <= 1e-5);
}

TEST_CASE("loss report serializes to JSON lines") {
  LossReport r;
  r.terms["content"] = 0.5;
  r.terms["pingpong"] = 2.25;
  r.total = 230.0;
  const auto j = nlohmann::json::parse(r.to_json(17));
  CHECK(j["step"] == 17);
  CHECK(j["terms"]["content"] == doctest::Approx(0.5));
  CHECK(j["terms"]["pingpong"] == doctest::Approx(2.25));
  CHECK(j["total"] == doctest::Approx(230.0));
}

// ------------------------------------------------- oracle sweeps (20 seeds)

TEST_CASE("warp-based losses match loop oracles on 20 random instances") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(1000 + seed);
    const int k = 1 + int(seed % 3);
    const int h = 6, w = 6;
    auto wf = lossoracle::random_window_flows<double>(rng, k, h, w);
    const auto fwd = testutil::random_sequence<double>(rng, k + 1, h, w);
    const auto bwd = testutil::random_sequence<double>(rng, k, h, w);
    const auto result = make_result(fwd.frames, bwd.frames);

    INFO("seed ", seed, " k ", k);
    CHECK(testutil::rel_err(short_term(result, wf),
                            lossoracle::short_term(fwd.frames, bwd.frames, wf)) <= 1e-5);
    CHECK(testutil::rel_err(long_term(fwd, wf), lossoracle::long_term(fwd.frames, wf)) <= 1e-5);
    CHECK(testutil::rel_err(pingpong(result),
                            lossoracle::pingpong(fwd.frames, bwd.frames)) <= 1e-5);

    std::vector<FlowField<double>> flows(wf.to_ref.begin(), wf.to_ref.end());
    std::vector<Tensor<double>> occs(wf.occ_ref.begin(), wf.occ_ref.end());
    const auto chi_O = build_rank_matrix(fwd, flows, occs, wf.ref);
    const auto want_chi = lossoracle::rank_chi(fwd.frames, wf);
    for (int r = 0; r <= k; ++r)
      for (int i = 0; i < h * w; ++i)
        CHECK(std::abs(chi_O.chi(0, r, i) - want_chi(r, i)) <= 1e-10);

    const auto I = testutil::random_sequence<double>(rng, k + 1, h, w);
    const auto chi_I = build_rank_matrix(I, flows, occs, wf.ref);
    CHECK(testutil::rel_err(low_rank(chi_I, chi_O),
                            lossoracle::low_rank(I.frames, fwd.frames, wf)) <= 1e-5);
  }
}

TEST_CASE("perceptual losses match loop oracles on 20 random instances") {
  auto net = ConvFeatureNet<double>::fixed_random(100);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(2000 + seed);
    INFO("seed ", seed);
    {
      const auto O = testutil::random_sequence<double>(rng, 2, 16, 16);
      const auto P = testutil::random_sequence<double>(rng, 2, 16, 16);
      CHECK(testutil::rel_err(content_perceptual(O, P, net),
                              lossoracle::content(O.frames, P.frames, net)) <= 1e-5);
    }
    {
      const auto O = testutil::random_sequence<double>(rng, 3, 8, 8);
      const auto P = testutil::random_sequence<double>(rng, 3, 8, 8);
      CHECK(testutil::rel_err(style_preserving(O, P, net),
                              lossoracle::style_preserving(O.frames, P.frames, net)) <= 1e-5);
      CHECK(testutil::rel_err(style_temporal(O, net),
                              lossoracle::style_temporal(O.frames, net)) <= 1e-5);
    }
  }
}

// ------------------------------------------------- finite-difference checks

TEST_CASE("content gradient matches finite differences") {
  auto net = ConvFeatureNet<double>::fixed_random(100);
  Rng rng(80);
  const auto P = testutil::random_sequence<double>(rng, 2, 16, 16);
  std::vector<FeatureBlocks<double>> pf;
  std::set<std::string> all(all_feature_blocks().begin(), all_feature_blocks().end());
  for (int t = 0; t < 2; ++t) pf.push_back(net.extract(P[t], all));
  auto frames = testutil::random_sequence<double>(rng, 2, 16, 16).frames;
  fd_check(
      frames,
      [&](Tape<double>& tp, const std::vector<int>& ids) {
        std::vector<lossdetail::EntryTaps<double>> taps;
        std::vector<const FeatureBlocks<double>*> pfp;
        for (std::size_t t = 0; t < ids.size(); ++t) {
          taps.push_back(lossdetail::tap_entry(tp, net, ids[t], true));
          pfp.push_back(&pf[t]);
        }
        return content_tape(tp, taps, pfp);
      },
      8, rng);
}

TEST_CASE("style gradients match finite differences") {
  auto net = ConvFeatureNet<double>::fixed_random(100);
  Rng rng(81);
  const auto P = testutil::random_sequence<double>(rng, 2, 4, 4);
  std::vector<std::map<std::string, ChannelStats<double>>> ps(2);
  for (int t = 0; t < 2; ++t)
    for (const std::string b : {"relu1_2", "relu2_2"})
      ps[std::size_t(t)][b] = channel_stats(net.extract(P[t], {b}).at(b));

  auto frames = testutil::random_sequence<double>(rng, 2, 4, 4).frames;
  fd_check(
      frames,
      [&](Tape<double>& tp, const std::vector<int>& ids) {
        std::vector<lossdetail::EntryTaps<double>> taps;
        std::vector<const std::map<std::string, ChannelStats<double>>*> psp;
        for (std::size_t t = 0; t < ids.size(); ++t) {
          taps.push_back(lossdetail::tap_entry(tp, net, ids[t], false));
          psp.push_back(&ps[t]);
        }
        const int sp = style_preserving_tape(tp, taps, psp);
        return ops::add(tp, sp, style_temporal_tape(tp, taps));
      },
      8, rng);
}

TEST_CASE("warping loss gradients match finite differences") {
  Rng rng(82);
  const int k = 2, h = 4, w = 4;
  auto wf = lossoracle::random_window_flows<double>(rng, k, h, w);
  auto frames = testutil::random_sequence<double>(rng, 2 * k + 1, h, w).frames;

  SUBCASE("short-term") {
    fd_check(
        frames,
        [&](Tape<double>& tp, const std::vector<int>& ids) {
          const std::vector<int> fwd(ids.begin(), ids.begin() + k + 1);
          const std::vector<int> bwd(ids.begin() + k + 1, ids.end());
          return short_term_tape(tp, fwd, bwd, wf);
        },
        10, rng);
  }
  SUBCASE("long-term") {
    fd_check(
        frames,
        [&](Tape<double>& tp, const std::vector<int>& ids) {
          const std::vector<int> fwd(ids.begin(), ids.begin() + k + 1);
          return long_term_tape(tp, fwd, wf);
        },
        10, rng);
  }
  SUBCASE("pingpong") {
    fd_check(
        frames,
        [&](Tape<double>& tp, const std::vector<int>& ids) {
          const std::vector<int> fwd(ids.begin(), ids.begin() + k + 1);
          const std::vector<int> bwd(ids.begin() + k + 1, ids.end());
          return pingpong_tape(tp, fwd, bwd);
        },
        10, rng);
  }
  SUBCASE("low-rank") {
    Rng irng(83);
    const auto I = testutil::random_sequence<double>(irng, k + 1, h, w);
    const double nuc_I = lossoracle::nuclear(lossoracle::rank_chi(I.frames, wf));
    fd_check(
        frames,
        [&](Tape<double>& tp, const std::vector<int>& ids) {
          const std::vector<int> fwd(ids.begin(), ids.begin() + k + 1);
          return low_rank_tape(tp, nuc_I, rank_matrix_tape(tp, fwd, wf));
        },
        8, rng);
  }
}

TEST_CASE("total gradient matches finite differences on a k=1 window") {
  auto fnet = ConvFeatureNet<double>::fixed_random(100);
  Rng rng(84);
  const int h = 16, w = 16;
  auto wf = lossoracle::random_window_flows<double>(rng, 1, h, w);
  {
    Rng irng(85);
    const auto I = testutil::random_sequence<double>(irng, 2, h, w);
    wf.chi_I_nuclear = lossoracle::nuclear(lossoracle::rank_chi(I.frames, wf));
  }
  const auto P = testutil::random_sequence<double>(rng, 2, h, w);
  std::vector<FrameFeatures<double>> pf;
  for (int t = 0; t < 2; ++t) pf.push_back(compute_frame_features(fnet, P[t]));
  std::vector<const FrameFeatures<double>*> pfp;
  for (const auto& f : pf) pfp.push_back(&f);

  auto frames = testutil::random_sequence<double>(rng, 3, h, w).frames;
  fd_check(
      frames,
      [&](Tape<double>& tp, const std::vector<int>& ids) {
        const std::vector<int> fwd{ids[0], ids[1]};
        const std::vector<int> bwd{ids[2]};
        return total_tape(tp, fwd, bwd, wf, fnet, pfp, LossWeights{}).node;
      },
      6, rng);
}
