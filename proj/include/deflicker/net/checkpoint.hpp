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
#include <string>
#include <vector>

#include "deflicker/net/consistency_net.hpp"

namespace deflicker {

/// Checkpoint archive: named parameter arrays + NetConfig + step counter,
/// with optional Adam moments and RNG state for bit-exact training resume.
/// Raw little-endian scalar bytes; the scalar width is recorded and must
/// match on load.
template <typename S>
struct Checkpoint {
  NetConfig config;
  std::uint64_t step = 0;
  std::vector<std::pair<std::string, Tensor<S>>> params;
  bool has_optimizer = false;
  std::vector<Tensor<S>> adam_m, adam_v;
  std::string rng_state;
};

namespace detail {

inline void ck_write(std::FILE* fp, const void* p, std::size_t n, const std::string& path) {
  if (std::fwrite(p, 1, n, fp) != n) {
    std::fclose(fp);
    throw IoError("short write: " + path);
  }
}

inline void ck_read(std::FILE* fp, void* p, std::size_t n, const std::string& path) {
  if (std::fread(p, 1, n, fp) != n) {
    std::fclose(fp);
    throw CheckpointError("truncated checkpoint: " + path);
  }
}

}  // namespace detail

template <typename S>
void save_checkpoint(const std::string& path, const Checkpoint<S>& ck) {
  std::FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw IoError("cannot open for write: " + path);
  auto w = [&](const void* p, std::size_t n) { detail::ck_write(fp, p, n, path); };
  auto w32 = [&](std::uint32_t v) { w(&v, 4); };
  w("DFCK0001", 8);
  w32(std::uint32_t(sizeof(S)));
  const std::int32_t cfg[4] = {ck.config.base_channels, ck.config.residual_blocks,
                               ck.config.lstm_hidden_channels, ck.config.downsample_stages};
  w(cfg, sizeof(cfg));
  const std::uint8_t zi = ck.config.zero_init_output ? 1 : 0;
  w(&zi, 1);
  w(&ck.step, 8);
  w32(std::uint32_t(ck.params.size()));
  for (const auto& [name, p] : ck.params) {
    w32(std::uint32_t(name.size()));
    w(name.data(), name.size());
    const std::int32_t dims[3] = {p.c, p.h, p.w};
    w(dims, sizeof(dims));
    w(p.data.data(), std::size_t(p.data.size()) * sizeof(S));
  }
  const std::uint8_t has_opt = ck.has_optimizer ? 1 : 0;
  w(&has_opt, 1);
  if (ck.has_optimizer) {
    for (std::size_t i = 0; i < ck.params.size(); ++i) {
      w(ck.adam_m[i].data.data(), std::size_t(ck.adam_m[i].data.size()) * sizeof(S));
      w(ck.adam_v[i].data.data(), std::size_t(ck.adam_v[i].data.size()) * sizeof(S));
    }
  }
  w32(std::uint32_t(ck.rng_state.size()));
  w(ck.rng_state.data(), ck.rng_state.size());
  std::fclose(fp);
}

template <typename S>
Checkpoint<S> load_checkpoint(const std::string& path) {
  std::FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw IoError("cannot open: " + path);
  auto r = [&](void* p, std::size_t n) { detail::ck_read(fp, p, n, path); };
  auto r32 = [&]() {
    std::uint32_t v = 0;
    r(&v, 4);
    return v;
  };
  char magic[8];
  r(magic, 8);
  if (std::memcmp(magic, "DFCK0001", 8) != 0) {
    std::fclose(fp);
    throw CheckpointError(path + ": bad checkpoint magic");
  }
  const std::uint32_t ssz = r32();
  if (ssz != sizeof(S)) {
    std::fclose(fp);
    throw CheckpointError(path + ": scalar width " + std::to_string(ssz) +
                          " does not match build width " + std::to_string(sizeof(S)));
  }
  Checkpoint<S> ck;
  std::int32_t cfg[4];
  r(cfg, sizeof(cfg));
  ck.config.base_channels = cfg[0];
  ck.config.residual_blocks = cfg[1];
  ck.config.lstm_hidden_channels = cfg[2];
  ck.config.downsample_stages = cfg[3];
  std::uint8_t zi = 0;
  r(&zi, 1);
  ck.config.zero_init_output = zi != 0;
  r(&ck.step, 8);
  const std::uint32_t n = r32();
  ck.params.resize(n);
  for (auto& [name, p] : ck.params) {
    const std::uint32_t nlen = r32();
    if (nlen == 0 || nlen > 256) {
      std::fclose(fp);
      throw CheckpointError(path + ": bad parameter name length");
    }
    name.resize(nlen);
    r(name.data(), nlen);
    std::int32_t dims[3];
    r(dims, sizeof(dims));
    if (dims[0] < 1 || dims[1] < 1 || dims[2] < 1) {
      std::fclose(fp);
      throw CheckpointError(path + ": bad parameter dims for " + name);
    }
    p = Tensor<S>(dims[0], dims[1], dims[2]);
    r(p.data.data(), std::size_t(p.data.size()) * sizeof(S));
  }
  std::uint8_t has_opt = 0;
  r(&has_opt, 1);
  ck.has_optimizer = has_opt != 0;
  if (ck.has_optimizer) {
    ck.adam_m.resize(n);
    ck.adam_v.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) {
      const auto& p = ck.params[i].second;
      ck.adam_m[i] = Tensor<S>(p.c, p.h, p.w);
      ck.adam_v[i] = Tensor<S>(p.c, p.h, p.w);
      r(ck.adam_m[i].data.data(), std::size_t(p.data.size()) * sizeof(S));
      r(ck.adam_v[i].data.data(), std::size_t(p.data.size()) * sizeof(S));
    }
  }
  const std::uint32_t rlen = r32();
  ck.rng_state.resize(rlen);
  if (rlen > 0) r(ck.rng_state.data(), rlen);
  std::fclose(fp);
  return ck;
}

/// Builds a network from a checkpoint, validating names and shapes.
template <typename S>
ConsistencyNet<S> net_from_checkpoint(const Checkpoint<S>& ck) {
  ConsistencyNet<S> net(ck.config);
  auto& dst = net.named_params();
  if (dst.size() != ck.params.size())
    throw CheckpointError("checkpoint has " + std::to_string(ck.params.size()) +
                          " parameters, network expects " + std::to_string(dst.size()));
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i].first != ck.params[i].first)
      throw CheckpointError("checkpoint parameter order mismatch at " + ck.params[i].first);
    if (!dst[i].second.same_shape(ck.params[i].second))
      throw CheckpointError("checkpoint shape mismatch for " + ck.params[i].first);
    dst[i].second = ck.params[i].second;
  }
  return net;
}

}  // namespace deflicker
