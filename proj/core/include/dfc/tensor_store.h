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

#ifndef DFC_TENSOR_STORE_H_
#define DFC_TENSOR_STORE_H_

#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dfc/error.h"

namespace dfc {

// On-disk layout of a DFTC file (little-endian):
//   [0,4)   magic "DFTC"
//   [4,8)   u32 version (= 1)
//   [8]     u8 dtype code
//   [9]     u8 ndim
//   [10,16) zero padding
//   then ndim u64 dims, then the row-major element buffer.
inline constexpr char kTensorMagic[4] = {'D', 'F', 'T', 'C'};
inline constexpr std::uint32_t kTensorVersion = 1;
inline constexpr std::size_t kTensorHeaderBytes = 16;

enum class DType : std::uint8_t { kF32 = 1, kF64 = 2, kU8 = 3, kI64 = 4 };

std::size_t dtype_size(DType dtype);
std::string dtype_name(DType dtype);

template <typename T>
constexpr DType dtype_of();
template <> constexpr DType dtype_of<float>() { return DType::kF32; }
template <> constexpr DType dtype_of<double>() { return DType::kF64; }
template <> constexpr DType dtype_of<std::uint8_t>() { return DType::kU8; }
template <> constexpr DType dtype_of<std::int64_t>() { return DType::kI64; }

// Immutable n-dimensional array with a raw little-endian buffer.
class Tensor {
 public:
  Tensor() = default;
  Tensor(DType dtype, std::vector<std::uint64_t> shape, std::vector<std::byte> bytes);

  template <typename T>
  static Tensor from(std::vector<std::uint64_t> shape, std::span<const T> values) {
    std::vector<std::byte> bytes(values.size_bytes());
    if (!bytes.empty()) std::memcpy(bytes.data(), values.data(), bytes.size());
    return Tensor(dtype_of<T>(), std::move(shape), std::move(bytes));
  }
  template <typename T>
  static Tensor from(std::vector<std::uint64_t> shape, const std::vector<T>& values) {
    return from<T>(std::move(shape), std::span<const T>(values));
  }

  DType dtype() const { return dtype_; }
  const std::vector<std::uint64_t>& shape() const { return shape_; }
  std::size_t ndim() const { return shape_.size(); }
  std::size_t numel() const;
  std::span<const std::byte> bytes() const { return bytes_; }

  // Typed copy of the buffer. Throws kShapeMismatch when T does not match
  // the stored dtype.
  template <typename T>
  std::vector<T> values() const {
    require(dtype_of<T>() == dtype_, ErrorCode::kShapeMismatch,
            "tensor dtype is " + dtype_name(dtype_) + ", requested " +
                dtype_name(dtype_of<T>()));
    std::vector<T> out(numel());
    if (!out.empty()) std::memcpy(out.data(), bytes_.data(), bytes_.size());
    return out;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  DType dtype_ = DType::kF32;
  std::vector<std::uint64_t> shape_;
  std::vector<std::byte> bytes_;
};

void write_tensor(const Tensor& tensor, const std::filesystem::path& path);
Tensor read_tensor(const std::filesystem::path& path);

// Serialization without touching the filesystem; write_tensor/read_tensor
// are thin wrappers over these.
std::vector<std::byte> encode_tensor(const Tensor& tensor);
Tensor decode_tensor(std::span<const std::byte> buffer);

}  // namespace dfc

#endif  // DFC_TENSOR_STORE_H_
