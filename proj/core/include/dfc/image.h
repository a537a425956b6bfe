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

#ifndef DFC_IMAGE_H_
#define DFC_IMAGE_H_

#include <compare>
#include <cstdint>
#include <vector>

#include "dfc/error.h"
#include "dfc/tensor_store.h"

namespace dfc {

// Integer pixel address. Integer coordinates are pixel centers.
struct Pixel {
  int row = 0;
  int col = 0;
  friend auto operator<=>(const Pixel&, const Pixel&) = default;
};

// Dense row-major single-channel raster.
template <typename T>
struct Image {
  int height = 0;
  int width = 0;
  std::vector<T> data;

  Image() = default;
  Image(int h, int w, T fill = T{})
      : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill) {}

  bool in_bounds(int r, int c) const { return r >= 0 && c >= 0 && r < height && c < width; }
  bool in_bounds(Pixel p) const { return in_bounds(p.row, p.col); }
  T& at(int r, int c) { return data[static_cast<std::size_t>(r) * width + c]; }
  const T& at(int r, int c) const { return data[static_cast<std::size_t>(r) * width + c]; }
  T& at(Pixel p) { return at(p.row, p.col); }
  const T& at(Pixel p) const { return at(p.row, p.col); }
  bool same_size(int h, int w) const { return height == h && width == w; }

  friend bool operator==(const Image&, const Image&) = default;
};

using Mask = Image<std::uint8_t>;
using DepthMap = Image<float>;

template <typename T>
Tensor to_tensor(const Image<T>& image) {
  return Tensor::from<T>({static_cast<std::uint64_t>(image.height),
                          static_cast<std::uint64_t>(image.width)},
                         image.data);
}

template <typename T>
Image<T> image_from_tensor(const Tensor& tensor) {
  require(tensor.ndim() == 2, ErrorCode::kShapeMismatch, "image tensor must be 2-D");
  Image<T> image;
  image.height = static_cast<int>(tensor.shape()[0]);
  image.width = static_cast<int>(tensor.shape()[1]);
  image.data = tensor.values<T>();
  return image;
}

inline std::size_t count_nonzero(const Mask& mask) {
  std::size_t n = 0;
  for (auto v : mask.data) n += v != 0;
  return n;
}

inline std::vector<Pixel> mask_pixels(const Mask& mask) {
  std::vector<Pixel> out;
  for (int r = 0; r < mask.height; ++r)
    for (int c = 0; c < mask.width; ++c)
      if (mask.at(r, c)) out.push_back({r, c});
  return out;
}

}  // namespace dfc

#endif  // DFC_IMAGE_H_
