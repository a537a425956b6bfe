/*
 * Copyright 2026 The dfc Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef DFC_RENDER_H_
#define DFC_RENDER_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "dfc/camera.h"
#include "dfc/image.h"

namespace dfc {

struct RgbImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;  // row-major RGB

  RgbImage() = default;
  RgbImage(int h, int w, std::array<std::uint8_t, 3> fill);
  void set(int row, int col, std::array<std::uint8_t, 3> color);
  std::array<std::uint8_t, 3> get(int row, int col) const;
  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

inline constexpr int kPaletteSize = 10;
const std::array<std::array<std::uint8_t, 3>, kPaletteSize>& match_palette();

// Grey depth shading of the object on a white background; part pixels
// tinted when `part_mask` is given.
RgbImage shade_view(const CameraView& view, const Mask* part_mask = nullptr);

// Draws a segment with a square brush of half-width `radius`.
void draw_line(RgbImage& image, Pixel from, Pixel to, std::array<std::uint8_t, 3> color, int radius);

struct MatchFigure {
  RgbImage image;
  int lines_drawn = 0;
};

// 2x2 panel: top row shows both views with the first `top_n` matches of
// `ranked` drawn thickest-first; bottom row shows a position color map of
// view a and the colors carried to view b through `transfer` (one source
// pixel per b object-mask pixel in row-major order, or empty).
MatchFigure render_matches(const CameraView& view_a, const CameraView& view_b,
                           std::span<const PixelPair> ranked, int top_n,
                           std::span<const Pixel> transfer = {});

void write_png(const RgbImage& image, const std::filesystem::path& path);
RgbImage read_png(const std::filesystem::path& path);

}  // namespace dfc

#endif  // DFC_RENDER_H_
