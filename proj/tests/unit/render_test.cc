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

#include <set>

#include <gtest/gtest.h>

#include "test_util.h"

namespace dfc {
namespace {

using testing::TempDir;

std::vector<PixelPair> some_pairs(const CameraView& a, const CameraView& b) {
  return multiview_pairs(a, b).pairs;
}

bool has_palette_color(const RgbImage& img, int rows) {
  const auto& pal = match_palette();
  const std::set<std::array<std::uint8_t, 3>> colors(pal.begin(), pal.end());
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < img.width; ++c)
      if (colors.count(img.get(r, c))) return true;
  return false;
}

TEST(RenderMatches, LineCounts) {
  const auto s = testing::cube_scene(64);
  const auto pairs = some_pairs(s.view_a, s.view_b);
  ASSERT_GE(pairs.size(), 10u);
  const auto none = render_matches(s.view_a, s.view_b, pairs, 0);
  EXPECT_EQ(none.lines_drawn, 0);
  EXPECT_EQ(none.image.height, 128);
  EXPECT_EQ(none.image.width, 128);
  EXPECT_FALSE(has_palette_color(none.image, 64));
  const auto ten = render_matches(s.view_a, s.view_b, pairs, 10);
  EXPECT_EQ(ten.lines_drawn, 10);
  EXPECT_TRUE(has_palette_color(ten.image, 64));
  EXPECT_EQ(render_matches(s.view_a, s.view_b, std::span(pairs).first(3), 10).lines_drawn, 3);
  EXPECT_EQ(testing::error_code_of([&] { render_matches(s.view_a, s.view_b, pairs, -1); }),
            ErrorCode::kInvalidArgument);
}

TEST(RenderMatches, Deterministic) {
  const auto s = testing::cube_scene(48);
  const auto pairs = some_pairs(s.view_a, s.view_b);
  EXPECT_EQ(render_matches(s.view_a, s.view_b, pairs, 5).image,
            render_matches(s.view_a, s.view_b, pairs, 5).image);
}

TEST(DrawLine, HorizontalSegment) {
  RgbImage img(5, 9, {0, 0, 0});
  draw_line(img, {2, 1}, {2, 6}, {255, 0, 0}, 0);
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 9; ++c) {
      const bool on = r == 2 && c >= 1 && c <= 6;
      EXPECT_EQ(img.get(r, c)[0], on ? 255 : 0) << r << "," << c;
    }
  RgbImage thick(5, 9, {0, 0, 0});
  draw_line(thick, {2, 4}, {2, 4}, {0, 9, 0}, 1);
  int lit = 0;
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 9; ++c) lit += thick.get(r, c)[1] == 9;
  EXPECT_EQ(lit, 9);
}

TEST(Png, RoundTripAndStableBytes) {
  RgbImage img(7, 11, {10, 20, 30});
  img.set(3, 4, {255, 0, 128});
  TempDir dir;
  write_png(img, dir / "a.png");
  write_png(img, dir / "b.png");
  EXPECT_EQ(read_png(dir / "a.png"), img);
  EXPECT_EQ(testing::slurp(dir / "a.png"), testing::slurp(dir / "b.png"));
  EXPECT_EQ(testing::error_code_of([&] { read_png(dir / "missing.png"); }), ErrorCode::kIo);
}

}  // namespace
}  // namespace dfc
