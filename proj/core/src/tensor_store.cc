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

#include "dfc/tensor_store.h"

#include <bit>
#include <fstream>
#include <iterator>

namespace dfc {

static_assert(std::endian::native == std::endian::little,
              "DFTC encoding assumes a little-endian host");

std::size_t dtype_size(DType dtype) {
  switch (dtype) {
    case DType::kF32: return 4;
    case DType::kF64: return 8;
    case DType::kU8: return 1;
    case DType::kI64: return 8;
  }
  fail(ErrorCode::kUnsupportedDtype, "unknown dtype");
}

std::string dtype_name(DType dtype) {
  switch (dtype) {
    case DType::kF32: return "f32";
    case DType::kF64: return "f64";
    case DType::kU8: return "u8";
    case DType::kI64: return "i64";
  }
  return "dtype(" + std::to_string(static_cast<int>(dtype)) + ")";
}

namespace {

bool is_known_dtype(std::uint8_t code) { return code >= 1 && code <= 4; }

std::size_t product(const std::vector<std::uint64_t>& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

void validate(DType dtype, const std::vector<std::uint64_t>& shape, std::size_t nbytes) {
  require(is_known_dtype(static_cast<std::uint8_t>(dtype)), ErrorCode::kUnsupportedDtype,
          "unsupported dtype code " + std::to_string(static_cast<int>(dtype)));
  require(!shape.empty() && shape.size() <= 255, ErrorCode::kInvalidArgument,
          "tensor rank must be in [1, 255]");
  for (auto d : shape) {
    require(d > 0, ErrorCode::kInvalidArgument, "tensor dims must be > 0");
  }
  require(product(shape) * dtype_size(dtype) == nbytes, ErrorCode::kShapeMismatch,
          "buffer of " + std::to_string(nbytes) + " bytes does not match shape");
}

template <typename T>
void put(std::vector<std::byte>& out, T value) {
  const auto* p = reinterpret_cast<const std::byte*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T get(std::span<const std::byte> in, std::size_t offset) {
  T value;
  std::memcpy(&value, in.data() + offset, sizeof(T));
  return value;
}

}  // namespace

Tensor::Tensor(DType dtype, std::vector<std::uint64_t> shape, std::vector<std::byte> bytes)
    : dtype_(dtype), shape_(std::move(shape)), bytes_(std::move(bytes)) {
  validate(dtype_, shape_, bytes_.size());
}

std::size_t Tensor::numel() const { return shape_.empty() ? 0 : product(shape_); }

std::vector<std::byte> encode_tensor(const Tensor& tensor) {
  validate(tensor.dtype(), tensor.shape(), tensor.bytes().size());
  std::vector<std::byte> out;
  out.reserve(kTensorHeaderBytes + 8 * tensor.ndim() + tensor.bytes().size());
  for (char c : kTensorMagic) out.push_back(static_cast<std::byte>(c));
  put<std::uint32_t>(out, kTensorVersion);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(tensor.dtype()));
  put<std::uint8_t>(out, static_cast<std::uint8_t>(tensor.ndim()));
  out.resize(kTensorHeaderBytes, std::byte{0});
  for (auto d : tensor.shape()) put<std::uint64_t>(out, d);
  out.insert(out.end(), tensor.bytes().begin(), tensor.bytes().end());
  return out;
}

Tensor decode_tensor(std::span<const std::byte> in) {
  require(in.size() >= 4, ErrorCode::kTruncated, "file shorter than magic");
  require(std::memcmp(in.data(), kTensorMagic, 4) == 0, ErrorCode::kBadMagic,
          "bad magic, expected DFTC");
  require(in.size() >= kTensorHeaderBytes, ErrorCode::kTruncated, "truncated header");
  const auto version = get<std::uint32_t>(in, 4);
  require(version == kTensorVersion, ErrorCode::kUnsupportedVersion,
          "unsupported DFTC version " + std::to_string(version));
  const auto code = get<std::uint8_t>(in, 8);
  require(is_known_dtype(code), ErrorCode::kUnsupportedDtype,
          "unsupported dtype code " + std::to_string(code));
  const auto ndim = get<std::uint8_t>(in, 9);
  require(ndim > 0, ErrorCode::kInvalidArgument, "tensor rank 0 in file");
  const std::size_t shape_end = kTensorHeaderBytes + 8 * std::size_t{ndim};
  require(in.size() >= shape_end, ErrorCode::kTruncated, "truncated shape");
  std::vector<std::uint64_t> shape(ndim);
  for (std::size_t i = 0; i < ndim; ++i) {
    shape[i] = get<std::uint64_t>(in, kTensorHeaderBytes + 8 * i);
    require(shape[i] > 0, ErrorCode::kInvalidArgument, "zero dim in file");
  }
  const auto dtype = static_cast<DType>(code);
  const std::size_t expected = product(shape) * dtype_size(dtype);
  require(in.size() - shape_end >= expected, ErrorCode::kTruncated, "truncated data");
  require(in.size() - shape_end == expected, ErrorCode::kShapeMismatch,
          "trailing bytes after tensor data");
  std::vector<std::byte> bytes(in.begin() + shape_end, in.end());
  return Tensor(dtype, std::move(shape), std::move(bytes));
}

void write_tensor(const Tensor& tensor, const std::filesystem::path& path) {
  const auto buffer = encode_tensor(tensor);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(buffer.data()),
            static_cast<std::streamsize>(buffer.size()));
  require(static_cast<bool>(out), ErrorCode::kIo, "write failed: " + path.string());
}

Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path.string());
  std::vector<char> raw(static_cast<std::size_t>(in.tellg()));
  in.seekg(0);
  in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
  require(static_cast<bool>(in), ErrorCode::kIo, "short read on " + path.string());
  try {
    return decode_tensor(std::as_bytes(std::span<const char>(raw)));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

}  // namespace dfc
