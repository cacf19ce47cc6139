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

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "deflicker/core/rng.hpp"
#include "deflicker/flow/flow_field.hpp"
#include "deflicker/video/image_io.hpp"

namespace deflicker {

/// Scene on an infinite textured plane translated past a fixed camera.
/// Content of frame t is texture(p - s_t): the plane moves by the per-frame
/// offset s_t, so F_{to,from} = s_from - s_to exactly everywhere.
struct SceneSpec {
  int width = 32, height = 32;
  int frames = 20;                 // T
  std::string texture = "checker";  // checker | gradient | noise
  double cell = 8;                 // checker cell side / noise lattice spacing
  double vx = 1, vy = 0;           // per-frame velocity
  int reversal_frame = -1;         // flip direction at this frame; -1 = never
  std::uint64_t seed = 1234;       // texture seed (noise)

  void validate() const {
    if (width < 1 || height < 1) throw SpecError("scene canvas must be positive");
    if (frames < 2) throw SpecError("scene needs T >= 2 frames");
    if (texture != "checker" && texture != "gradient" && texture != "noise")
      throw SpecError("unknown texture: " + texture);
    if (cell < 1) throw SpecError("texture cell must be >= 1");
    // Integer or half-integer velocities keep the warp oracles exact/tight.
    const auto half_integral = [](double v) { return std::abs(2 * v - std::round(2 * v)) < 1e-12; };
    if (!half_integral(vx) || !half_integral(vy))
      throw SpecError("velocity components must be integer or half-integer pixels");
  }

  /// Plane offset of frame t: t*v up to the reversal frame r, then retracing.
  std::pair<double, double> offset(int t) const {
    const int r = reversal_frame;
    if (r < 0 || t <= r) return {vx * t, vy * t};
    return {vx * (2.0 * r - t), vy * (2.0 * r - t)};
  }

  std::vector<std::pair<double, double>> offsets() const {
    std::vector<std::pair<double, double>> s;
    s.reserve(std::size_t(frames));
    for (int t = 0; t < frames; ++t) s.push_back(offset(t));
    return s;
  }
};

/// Per-frame processing artifact injected independently at every frame.
struct FlickerSpec {
  std::string kind = "global_brightness";  // global_brightness | local_patch | hue_shift
  double amplitude = 0.15;
  int region_x = 0, region_y = 0, region_w = 0, region_h = 0;  // local_patch box
  std::uint64_t seed = 1234;

  void validate(int canvas_w, int canvas_h) const {
    if (amplitude < 0) throw SpecError("flicker amplitude must be >= 0");
    if (kind == "local_patch") {
      if (region_w < 1 || region_h < 1 || region_x < 0 || region_y < 0 ||
          region_x + region_w > canvas_w || region_y + region_h > canvas_h)
        throw SpecError("flicker region outside canvas");
    } else if (kind != "global_brightness" && kind != "hue_shift") {
      throw SpecError("unknown flicker kind: " + kind);
    }
  }
};

template <typename S>
struct SynthVideo {
  VideoTriplet<S> triplet;  // raw I and flickered P; output empty
  // Ground-truth flows: adjacent pairs in both directions, plus F_{t,0} for
  // t >= 1 (the long-term anchors).
  std::vector<FlowField<S>> flows;
  // [t] = analytic non-occlusion mask of pair (t, t+1), anchored at t.
  std::vector<Tensor<S>> occlusion_truth;
  std::vector<std::pair<double, double>> offsets;
  SceneSpec scene;
  FlickerSpec flicker;

  GroundTruthFlowSource<S> flow_source() const {
    return GroundTruthFlowSource<S>(scene.height, scene.width, offsets);
  }
};

namespace synthdetail {

inline std::uint64_t hash3(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::uint64_t x = a * 0x9E3779B97F4A7C15ull ^ b * 0xC2B2AE3D27D4EB4Full ^
                    c * 0x165667B19E3779F9ull;
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ull;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBull;
  x ^= x >> 31;
  return x;
}

inline double lattice_value(std::uint64_t seed, long ix, long iy, int channel) {
  const std::uint64_t h = hash3(seed + std::uint64_t(channel) * 0x51'7C'C1'B7'27'22'0A'95ull,
                                std::uint64_t(ix) + 0x8000'0000ull,
                                std::uint64_t(iy) + 0x8000'0000ull);
  return double(h >> 11) * 0x1.0p-53;
}

/// Texture color at plane coordinates (u, v): checker is piecewise constant
/// (exact under integer motion), gradient is a smooth sinusoid (tight under
/// half-integer bilinear sampling), noise is bilinear value noise on a
/// `cell`-spaced lattice.
template <typename S>
void texture_rgb(const SceneSpec& scene, double u, double v, S rgb[3]) {
  if (scene.texture == "checker") {
    const long cu = long(std::floor(u / scene.cell)), cv = long(std::floor(v / scene.cell));
    const bool a = ((cu + cv) & 1L) == 0;
    rgb[0] = S(a ? 0.85 : 0.15);
    rgb[1] = S(a ? 0.55 : 0.45);
    rgb[2] = S(a ? 0.25 : 0.75);
  } else if (scene.texture == "gradient") {
    const double p = 8.0 * scene.cell;
    rgb[0] = S(0.5 + 0.45 * std::sin(2.0 * M_PI * u / p));
    rgb[1] = S(0.5 + 0.45 * std::sin(2.0 * M_PI * v / p));
    rgb[2] = S(0.5 + 0.45 * std::sin(2.0 * M_PI * (u + v) / (2.0 * p)));
  } else {  // noise
    const double fu = u / scene.cell, fv = v / scene.cell;
    const long iu = long(std::floor(fu)), iv = long(std::floor(fv));
    const double au = fu - double(iu), av = fv - double(iv);
    for (int c = 0; c < 3; ++c) {
      const double v00 = lattice_value(scene.seed, iu, iv, c);
      const double v10 = lattice_value(scene.seed, iu + 1, iv, c);
      const double v01 = lattice_value(scene.seed, iu, iv + 1, c);
      const double v11 = lattice_value(scene.seed, iu + 1, iv + 1, c);
      rgb[c] = S((v00 * (1 - au) + v10 * au) * (1 - av) + (v01 * (1 - au) + v11 * au) * av);
    }
  }
}

template <typename S>
Frame<S> render_frame(const SceneSpec& scene, double sx, double sy) {
  Frame<S> f(3, scene.height, scene.width);
  S rgb[3];
  for (int y = 0; y < scene.height; ++y)
    for (int x = 0; x < scene.width; ++x) {
      texture_rgb(scene, double(x) - sx, double(y) - sy, rgb);
      for (int c = 0; c < 3; ++c) f(c, y, x) = rgb[c];
    }
  return f;
}

template <typename S>
Frame<S> apply_flicker(const FlickerSpec& fs, const Frame<S>& in, double draw) {
  Frame<S> out = in;
  if (fs.kind == "global_brightness") {
    const S b = S((2 * draw - 1) * fs.amplitude);
    out.data = (out.data + b).min(S(1)).max(S(0));
  } else if (fs.kind == "local_patch") {
    const S b = S((2 * draw - 1) * fs.amplitude);
    for (int c = 0; c < 3; ++c)
      for (int y = fs.region_y; y < fs.region_y + fs.region_h; ++y)
        for (int x = fs.region_x; x < fs.region_x + fs.region_w; ++x)
          out(c, y, x) = std::min(S(1), std::max(S(0), out(c, y, x) + b));
  } else {  // hue_shift: cyclic channel mix, convex so it stays in [0,1]
    const S a = S(draw * fs.amplitude);
    for (int y = 0; y < in.h; ++y)
      for (int x = 0; x < in.w; ++x) {
        const S r = in(0, y, x), g = in(1, y, x), b = in(2, y, x);
        out(0, y, x) = (S(1) - a) * r + a * g;
        out(1, y, x) = (S(1) - a) * g + a * b;
        out(2, y, x) = (S(1) - a) * b + a * r;
      }
  }
  return out;
}

}  // namespace synthdetail

/// Deterministic synthetic video with analytically known flow and occlusion.
template <typename S>
SynthVideo<S> generate(const SceneSpec& scene, const FlickerSpec& flicker) {
  scene.validate();
  flicker.validate(scene.width, scene.height);
  SynthVideo<S> v;
  v.scene = scene;
  v.flicker = flicker;
  v.offsets = scene.offsets();

  Rng rng(flicker.seed);
  for (int t = 0; t < scene.frames; ++t) {
    Frame<S> raw = synthdetail::render_frame<S>(scene, v.offsets[std::size_t(t)].first,
                                                v.offsets[std::size_t(t)].second);
    const double draw = rng.uniform();
    v.triplet.processed.frames.push_back(
        synthdetail::apply_flicker(flicker, raw, flicker.amplitude > 0 ? draw : 0.0));
    v.triplet.raw.frames.push_back(std::move(raw));
  }

  GroundTruthFlowSource<S> src(scene.height, scene.width, v.offsets);
  for (int t = 0; t + 1 < scene.frames; ++t) {
    v.flows.push_back(src.flow_between(t, t + 1));
    v.flows.push_back(src.flow_between(t + 1, t));
  }
  for (int t = 1; t < scene.frames; ++t) v.flows.push_back(src.flow_between(t, 0));

  for (int t = 0; t + 1 < scene.frames; ++t) {
    const double dx = v.offsets[std::size_t(t) + 1].first - v.offsets[std::size_t(t)].first;
    const double dy = v.offsets[std::size_t(t) + 1].second - v.offsets[std::size_t(t)].second;
    Tensor<S> mask(1, scene.height, scene.width);
    for (int y = 0; y < scene.height; ++y)
      for (int x = 0; x < scene.width; ++x) {
        const double tx = x + dx, ty = y + dy;
        const bool inside =
            tx >= 0 && tx <= scene.width - 1 && ty >= 0 && ty <= scene.height - 1;
        mask(0, y, x) = inside ? S(1) : S(0);
      }
    v.occlusion_truth.push_back(std::move(mask));
  }
  return v;
}

inline nlohmann::json scene_to_json(const SceneSpec& s) {
  return {{"width", s.width},       {"height", s.height},
          {"frames", s.frames},     {"texture", s.texture},
          {"cell", s.cell},         {"vx", s.vx},
          {"vy", s.vy},             {"reversal_frame", s.reversal_frame},
          {"seed", s.seed}};
}

inline SceneSpec scene_from_json(const nlohmann::json& j) {
  SceneSpec s;
  s.width = j.value("width", s.width);
  s.height = j.value("height", s.height);
  s.frames = j.value("frames", s.frames);
  s.texture = j.value("texture", s.texture);
  s.cell = j.value("cell", s.cell);
  s.vx = j.value("vx", s.vx);
  s.vy = j.value("vy", s.vy);
  s.reversal_frame = j.value("reversal_frame", s.reversal_frame);
  s.seed = j.value("seed", s.seed);
  return s;
}

inline nlohmann::json flicker_to_json(const FlickerSpec& f) {
  nlohmann::json j = {{"kind", f.kind}, {"amplitude", f.amplitude}, {"seed", f.seed}};
  if (f.kind == "local_patch")
    j["region"] = {{"x", f.region_x}, {"y", f.region_y}, {"w", f.region_w}, {"h", f.region_h}};
  return j;
}

inline FlickerSpec flicker_from_json(const nlohmann::json& j) {
  FlickerSpec f;
  f.kind = j.value("kind", f.kind);
  f.amplitude = j.value("amplitude", f.amplitude);
  f.seed = j.value("seed", f.seed);
  if (j.contains("region")) {
    f.region_x = j["region"].value("x", 0);
    f.region_y = j["region"].value("y", 0);
    f.region_w = j["region"].value("w", 0);
    f.region_h = j["region"].value("h", 0);
  }
  return f;
}

/// Writes the full tree: I/ and P/ frame folders, flows/ (.flo files for all
/// adjacent pairs, both directions), occlusion/ truth masks, manifest.json.
/// Returns the manifest path.
template <typename S>
std::string export_video(const SynthVideo<S>& video, const std::string& root) {
  namespace fs = std::filesystem;
  std::error_code ec;
  for (const char* sub : {"", "I", "P", "flows", "occlusion"}) {
    const fs::path p = fs::path(root) / sub;
    fs::create_directories(p, ec);
    if (ec) throw IoError("cannot create directory " + p.string() + ": " + ec.message());
  }
  save_frame_folder(video.triplet.raw, (fs::path(root) / "I").string(), "frame-");
  save_frame_folder(video.triplet.processed, (fs::path(root) / "P").string(), "frame-");
  const int T = video.scene.frames;
  GroundTruthFlowSource<S> src(video.scene.height, video.scene.width, video.offsets);
  for (int t = 0; t + 1 < T; ++t) {
    write_flo((fs::path(root) / "flows" / flow_file_name(t, t + 1)).string(),
              src.flow_between(t, t + 1));
    write_flo((fs::path(root) / "flows" / flow_file_name(t + 1, t)).string(),
              src.flow_between(t + 1, t));
  }
  char name[48];
  for (int t = 0; t + 1 < T; ++t) {
    std::snprintf(name, sizeof(name), "occ-%04d-%04d.png", t + 1, t + 2);
    save_gray_png((fs::path(root) / "occlusion" / name).string(),
                  video.occlusion_truth[std::size_t(t)]);
  }
  nlohmann::json manifest;
  manifest["format"] = "deflicker-synth-v1";
  manifest["scene"] = scene_to_json(video.scene);
  manifest["flicker"] = flicker_to_json(video.flicker);
  nlohmann::json offs = nlohmann::json::array();
  for (const auto& [sx, sy] : video.offsets) offs.push_back({sx, sy});
  manifest["offsets"] = offs;
  const std::string path = (fs::path(root) / "manifest.json").string();
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest: " + path);
  out << manifest.dump(2) << "\n";
  if (!out.good()) throw IoError("write failed: " + path);
  return path;
}

/// Regenerates a video bit-identically from its exported manifest.
template <typename S>
SynthVideo<S> replay_manifest(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot read manifest: " + manifest_path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DecodeError("malformed manifest " + manifest_path + ": " + e.what());
  }
  if (j.value("format", "") != "deflicker-synth-v1")
    throw DecodeError("unknown manifest format in " + manifest_path);
  return generate<S>(scene_from_json(j.at("scene")), flicker_from_json(j.at("flicker")));
}

/// The canonical benchmark case: 32x32 checker, v=(1,0) reversing at
/// mid-sequence, T=20, global brightness flicker of amplitude 0.15, seed 1234.
inline std::pair<SceneSpec, FlickerSpec> b1_case() {
  SceneSpec scene;
  scene.width = 32;
  scene.height = 32;
  scene.frames = 20;
  scene.texture = "checker";
  scene.cell = 8;
  scene.vx = 1;
  scene.vy = 0;
  scene.reversal_frame = 10;
  scene.seed = 1234;
  FlickerSpec flicker;
  flicker.kind = "global_brightness";
  flicker.amplitude = 0.15;
  flicker.seed = 1234;
  return {scene, flicker};
}

/// A deterministic family of B1 variants (textures, directions, seeds cycle;
/// video 0 is B1 itself). Used as the desk-scale train/held-out corpus.
inline std::vector<std::pair<SceneSpec, FlickerSpec>> b1_family(
    int count, const std::string& flicker_kind = "global_brightness") {
  static const char* textures[3] = {"checker", "noise", "gradient"};
  static const double vel[4][2] = {{1, 0}, {0, 1}, {1, 1}, {2, 0}};
  std::vector<std::pair<SceneSpec, FlickerSpec>> family;
  for (int i = 0; i < count; ++i) {
    auto [scene, flicker] = b1_case();
    flicker.kind = flicker_kind;
    if (i > 0) {
      scene.texture = textures[i % 3];
      scene.vx = vel[i % 4][0];
      scene.vy = vel[i % 4][1];
      scene.seed = 1234 + 17ull * std::uint64_t(i);
      flicker.seed = 1234 + std::uint64_t(i);
    }
    family.emplace_back(scene, flicker);
  }
  return family;
}

}  // namespace deflicker
