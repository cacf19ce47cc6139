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

#include <fnmatch.h>
#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "deflicker/video/frame.hpp"

namespace deflicker {

// 8-bit PNG on disk, [0,1] floats in memory; round-trips within 1/(2*255)
// per channel. The libpng simplified API handles gray/palette/16-bit/alpha
// source conversions on read.

template <typename S>
Frame<S> load_png(const std::string& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    throw DecodeError(path + ": " + image.message);
  image.format = PNG_FORMAT_RGB;
  std::vector<unsigned char> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw DecodeError(path + ": " + msg);
  }
  const int h = int(image.height), w = int(image.width);
  Frame<S> f(3, h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        f(c, y, x) = S(buf[(std::size_t(y) * w + x) * 3 + c]) / S(255);
  return f;
}

template <typename S>
void save_png(const std::string& path, const Frame<S>& f) {
  if (f.c != 3) throw ShapeError("save_png needs a 3-channel frame, got " + f.shape_str());
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = png_uint_32(f.w);
  image.height = png_uint_32(f.h);
  image.format = PNG_FORMAT_RGB;
  std::vector<unsigned char> buf(std::size_t(f.h) * f.w * 3);
  for (int y = 0; y < f.h; ++y)
    for (int x = 0; x < f.w; ++x)
      for (int c = 0; c < 3; ++c) {
        const S v = std::min(S(1), std::max(S(0), f(c, y, x)));
        buf[(std::size_t(y) * f.w + x) * 3 + c] = (unsigned char)std::lround(double(v) * 255.0);
      }
  if (!png_image_write_to_file(&image, path.c_str(), 0, buf.data(), 0, nullptr))
    throw IoError(path + ": " + image.message);
}

/// Single-channel PNG, used for occlusion-truth masks.
template <typename S>
void save_gray_png(const std::string& path, const Tensor<S>& m) {
  if (m.c != 1) throw ShapeError("save_gray_png needs 1 channel, got " + m.shape_str());
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = png_uint_32(m.w);
  image.height = png_uint_32(m.h);
  image.format = PNG_FORMAT_GRAY;
  std::vector<unsigned char> buf(std::size_t(m.h) * m.w);
  for (int y = 0; y < m.h; ++y)
    for (int x = 0; x < m.w; ++x) {
      const S v = std::min(S(1), std::max(S(0), m(0, y, x)));
      buf[std::size_t(y) * m.w + x] = (unsigned char)std::lround(double(v) * 255.0);
    }
  if (!png_image_write_to_file(&image, path.c_str(), 0, buf.data(), 0, nullptr))
    throw IoError(path + ": " + image.message);
}

template <typename S>
Tensor<S> load_gray_png(const std::string& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    throw DecodeError(path + ": " + image.message);
  image.format = PNG_FORMAT_GRAY;
  std::vector<unsigned char> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw DecodeError(path + ": " + msg);
  }
  Tensor<S> m(1, int(image.height), int(image.width));
  for (int y = 0; y < m.h; ++y)
    for (int x = 0; x < m.w; ++x) m(0, y, x) = S(buf[std::size_t(y) * m.w + x]) / S(255);
  return m;
}

/// Numeric-aware filename order: digit runs compare by value, so
/// frame-0010 follows frame-0009 and frame-2 precedes frame-10.
inline bool natural_less(const std::string& a, const std::string& b) {
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const bool da = std::isdigit((unsigned char)a[i]), db = std::isdigit((unsigned char)b[j]);
    if (da && db) {
      std::size_t ia = i, jb = j;
      while (ia < a.size() && std::isdigit((unsigned char)a[ia])) ++ia;
      while (jb < b.size() && std::isdigit((unsigned char)b[jb])) ++jb;
      std::size_t pa = i, pb = j;
      while (pa < ia - 1 && a[pa] == '0') ++pa;  // strip leading zeros
      while (pb < jb - 1 && b[pb] == '0') ++pb;
      const std::size_t la = ia - pa, lb = jb - pb;
      if (la != lb) return la < lb;
      const int cmp = a.compare(pa, la, b, pb, lb);
      if (cmp != 0) return cmp < 0;
      i = ia;
      j = jb;
    } else {
      if (a[i] != b[j]) return (unsigned char)a[i] < (unsigned char)b[j];
      ++i;
      ++j;
    }
  }
  return a.size() - i < b.size() - j;
}

inline std::vector<std::string> list_matching_files(const std::string& dir,
                                                    const std::string& pattern) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string name = e.path().filename().string();
    if (fnmatch(pattern.c_str(), name.c_str(), 0) == 0) names.push_back(name);
  }
  std::sort(names.begin(), names.end(), natural_less);
  return names;
}

template <typename S>
FrameSequence<S> load_frame_folder(const std::string& dir, const std::string& pattern = "*.png") {
  namespace fs = std::filesystem;
  const auto names = list_matching_files(dir, pattern);
  if (names.empty()) throw NoFramesError("no files matching '" + pattern + "' in " + dir);
  FrameSequence<S> seq;
  seq.frames.reserve(names.size());
  for (const auto& name : names) {
    Frame<S> f = load_png<S>((fs::path(dir) / name).string());
    if (!seq.frames.empty() && !f.same_shape(seq.frames[0]))
      throw DimensionMismatchError(name + ": " + f.shape_str() + " vs " +
                                   seq.frames[0].shape_str());
    seq.frames.push_back(std::move(f));
  }
  const std::string meta = (fs::path(dir) / "metadata.json").string();
  if (fs::exists(meta)) {
    std::FILE* fp = std::fopen(meta.c_str(), "rb");
    if (fp) {
      std::string text;
      char chunk[4096];
      std::size_t n;
      while ((n = std::fread(chunk, 1, sizeof(chunk), fp)) > 0) text.append(chunk, n);
      std::fclose(fp);
      const auto pos = text.find("\"frame_rate\"");
      if (pos != std::string::npos) {
        double fr = 0;
        if (std::sscanf(text.c_str() + pos, "\"frame_rate\"%*[: ]%lf", &fr) == 1 && fr > 0)
          seq.frame_rate = fr;
      }
    }
  }
  return seq;
}

template <typename S>
void save_frame_folder(const FrameSequence<S>& seq, const std::string& dir,
                       const std::string& prefix = "frame-") {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir)) throw IoError("cannot create directory: " + dir);
  char name[64];
  for (int t = 0; t < seq.size(); ++t) {
    std::snprintf(name, sizeof(name), "%s%04d.png", prefix.c_str(), t);
    save_png((fs::path(dir) / name).string(), seq[t]);
  }
}

/// Bilinear resample with half-pixel centers: src_x = (dst_x + 0.5)*sx - 0.5,
/// samples clamped to the frame.
template <typename S>
Frame<S> resize_bilinear(const Frame<S>& f, int th, int tw) {
  if (th == f.h && tw == f.w) return f;
  Frame<S> out(f.c, th, tw);
  const double sy = double(f.h) / th, sx = double(f.w) / tw;
  for (int y = 0; y < th; ++y) {
    const double fy = std::min(std::max((y + 0.5) * sy - 0.5, 0.0), double(f.h - 1));
    const int y0 = int(fy), y1 = std::min(y0 + 1, f.h - 1);
    const S wy = S(fy - y0);
    for (int x = 0; x < tw; ++x) {
      const double fx = std::min(std::max((x + 0.5) * sx - 0.5, 0.0), double(f.w - 1));
      const int x0 = int(fx), x1 = std::min(x0 + 1, f.w - 1);
      const S wx = S(fx - x0);
      for (int c = 0; c < f.c; ++c) {
        const S top = f(c, y0, x0) * (S(1) - wx) + f(c, y0, x1) * wx;
        const S bot = f(c, y1, x0) * (S(1) - wx) + f(c, y1, x1) * wx;
        out(c, y, x) = top * (S(1) - wy) + bot * wy;
      }
    }
  }
  return out;
}

template <typename S>
FrameSequence<S> resize_keep_aspect(const FrameSequence<S>& seq, int target_height) {
  if (target_height < 1) throw SpecError("target_height must be >= 1");
  check_sequence(seq);
  const int tw = int(std::lround(double(seq.width()) * target_height / seq.height()));
  FrameSequence<S> out;
  out.frame_rate = seq.frame_rate;
  out.frames.reserve(seq.frames.size());
  for (const auto& f : seq.frames) out.frames.push_back(resize_bilinear(f, target_height, tw));
  return out;
}

}  // namespace deflicker
