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

#include "dfc/render.h"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>

#include "dfc/error.h"

namespace dfc {

namespace {

using Color = std::array<std::uint8_t, 3>;

constexpr Color kWhite = {255, 255, 255};

}  // namespace

RgbImage::RgbImage(int h, int w, Color fill) : height(h), width(w) {
  require(h > 0 && w > 0, ErrorCode::kInvalidArgument, "image dims must be > 0");
  data.resize(static_cast<std::size_t>(h) * w * 3);
  for (std::size_t i = 0; i < data.size(); i += 3) std::copy(fill.begin(), fill.end(), data.begin() + i);
}

void RgbImage::set(int row, int col, Color color) {
  if (row < 0 || col < 0 || row >= height || col >= width) return;
  std::copy(color.begin(), color.end(), data.begin() + (static_cast<std::size_t>(row) * width + col) * 3);
}

Color RgbImage::get(int row, int col) const {
  const auto* p = data.data() + (static_cast<std::size_t>(row) * width + col) * 3;
  return {p[0], p[1], p[2]};
}

const std::array<Color, kPaletteSize>& match_palette() {
  static const std::array<Color, kPaletteSize> palette = {{{230, 25, 75},
                                                           {60, 180, 75},
                                                           {0, 130, 200},
                                                           {245, 130, 48},
                                                           {145, 30, 180},
                                                           {70, 240, 240},
                                                           {240, 50, 230},
                                                           {210, 245, 60},
                                                           {128, 128, 0},
                                                           {0, 0, 128}}};
  return palette;
}

RgbImage shade_view(const CameraView& view, const Mask* part_mask) {
  view.validate();
  RgbImage img(view.depth.height, view.depth.width, kWhite);
  float lo = std::numeric_limits<float>::infinity();
  float hi = -lo;
  for (std::size_t i = 0; i < view.depth.data.size(); ++i) {
    if (!view.object_mask.data[i]) continue;
    lo = std::min(lo, view.depth.data[i]);
    hi = std::max(hi, view.depth.data[i]);
  }
  const float span = hi > lo ? hi - lo : 1.0f;
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      if (!view.object_mask.at(r, c)) continue;
      const double near = 1.0 - (view.depth.at(r, c) - lo) / span;
      const auto g = static_cast<std::uint8_t>(std::lround(70.0 + 130.0 * near));
      if (part_mask && part_mask->at(r, c)) {
        img.set(r, c, {g, static_cast<std::uint8_t>(g / 2), static_cast<std::uint8_t>(g / 2)});
      } else {
        img.set(r, c, {g, g, g});
      }
    }
  }
  return img;
}

void draw_line(RgbImage& image, Pixel from, Pixel to, Color color, int radius) {
  int r0 = from.row;
  int c0 = from.col;
  const int dr = std::abs(to.row - r0);
  const int dc = std::abs(to.col - c0);
  const int sr = r0 < to.row ? 1 : -1;
  const int sc = c0 < to.col ? 1 : -1;
  int err = dc - dr;
  while (true) {
    for (int y = -radius; y <= radius; ++y) {
      for (int x = -radius; x <= radius; ++x) image.set(r0 + y, c0 + x, color);
    }
    if (r0 == to.row && c0 == to.col) break;
    const int e2 = 2 * err;
    if (e2 > -dr) {
      err -= dr;
      c0 += sc;
    }
    if (e2 < dc) {
      err += dc;
      r0 += sr;
    }
  }
}

namespace {

Color position_color(Pixel p, int height, int width) {
  const double u = width > 1 ? static_cast<double>(p.col) / (width - 1) : 0.0;
  const double v = height > 1 ? static_cast<double>(p.row) / (height - 1) : 0.0;
  return {static_cast<std::uint8_t>(std::lround(40 + 215 * u)),
          static_cast<std::uint8_t>(std::lround(40 + 215 * v)),
          static_cast<std::uint8_t>(std::lround(40 + 215 * (1.0 - 0.5 * (u + v))))};
}

void blit(RgbImage& dst, const RgbImage& src, int row0, int col0) {
  for (int r = 0; r < src.height; ++r)
    for (int c = 0; c < src.width; ++c) dst.set(row0 + r, col0 + c, src.get(r, c));
}

}  // namespace

MatchFigure render_matches(const CameraView& view_a, const CameraView& view_b,
                           std::span<const PixelPair> ranked, int top_n,
                           std::span<const Pixel> transfer) {
  require(top_n >= 0, ErrorCode::kInvalidArgument, "top_n must be >= 0");
  const int h = std::max(view_a.depth.height, view_b.depth.height);
  const int wa = view_a.depth.width;
  const int w = wa + view_b.depth.width;
  MatchFigure fig;
  fig.image = RgbImage(2 * h, w, kWhite);
  blit(fig.image, shade_view(view_a), 0, 0);
  blit(fig.image, shade_view(view_b), 0, wa);

  const int n = std::min<int>(top_n, static_cast<int>(ranked.size()));
  const auto& palette = match_palette();
  for (int i = 0; i < n; ++i) {
    const int radius = n > 1 ? 2 - (3 * i) / n : 2;
    const PixelPair& m = ranked[static_cast<std::size_t>(i)];
    draw_line(fig.image, m.a, {m.b.row, m.b.col + wa}, palette[static_cast<std::size_t>(i % kPaletteSize)],
              std::max(0, radius));
    ++fig.lines_drawn;
  }

  const auto a_pixels = mask_pixels(view_a.object_mask);
  for (const Pixel& p : a_pixels) {
    fig.image.set(h + p.row, p.col, position_color(p, view_a.depth.height, wa));
  }
  if (!transfer.empty()) {
    const auto b_pixels = mask_pixels(view_b.object_mask);
    require(transfer.size() == b_pixels.size(), ErrorCode::kShapeMismatch,
            "transfer map must have one source pixel per target object pixel");
    for (std::size_t i = 0; i < b_pixels.size(); ++i) {
      fig.image.set(h + b_pixels[i].row, wa + b_pixels[i].col,
                    position_color(transfer[i], view_a.depth.height, wa));
    }
  }
  return fig;
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};

}  // namespace

void write_png(const RgbImage& image, const std::filesystem::path& path) {
  require(image.height > 0 && image.width > 0, ErrorCode::kInvalidArgument, "empty image");
  std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.string().c_str(), "wb"));
  require(file != nullptr, ErrorCode::kIo, "cannot open for writing: " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  require(png != nullptr, ErrorCode::kIo, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorCode::kIo, "png encoding failed: " + path.string());
  }
  png_init_io(png, file.get());
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int r = 0; r < image.height; ++r) {
    png_write_row(png, image.data.data() + static_cast<std::size_t>(r) * image.width * 3);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

RgbImage read_png(const std::filesystem::path& path) {
  std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.string().c_str(), "rb"));
  require(file != nullptr, ErrorCode::kIo, "cannot open: " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  require(png != nullptr, ErrorCode::kIo, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  RgbImage image;
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorCode::kIo, "png decoding failed: " + path.string());
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_palette_to_rgb(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  image.height = static_cast<int>(png_get_image_height(png, info));
  image.width = static_cast<int>(png_get_image_width(png, info));
  image.data.resize(static_cast<std::size_t>(image.height) * image.width * 3);
  for (int r = 0; r < image.height; ++r) {
    png_read_row(png, image.data.data() + static_cast<std::size_t>(r) * image.width * 3, nullptr);
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

}  // namespace dfc
