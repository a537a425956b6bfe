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

#include "dfc/embedding.h"

#include <algorithm>
#include <cmath>
#include <random>

namespace dfc {

FunctionEmbedding hash_function_embedding(const std::string& name, int dims, std::uint64_t seed) {
  require(dims > 0, ErrorCode::kInvalidArgument, "embedding dims must be > 0");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : name) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::mt19937_64 rng(h ^ (seed * 0x9E3779B97F4A7C15ULL));
  std::normal_distribution<double> normal(0.0, 1.0);
  FunctionEmbedding out{name, Eigen::VectorXd(dims)};
  for (int i = 0; i < dims; ++i) out.vector[i] = normal(rng);
  out.vector.normalize();
  return out;
}

EmbeddingHeadParams EmbeddingHeadParams::initialize(const HeadConfig& config, std::uint64_t seed) {
  require(config.image_channels > 0 && config.text_channels >= 0 && config.hidden > 0 &&
              config.output_dim >= 2,
          ErrorCode::kInvalidArgument, "invalid head configuration");
  EmbeddingHeadParams p;
  const std::array<int, kNumLayers + 1> widths = {config.image_channels + config.text_channels,
                                                  config.hidden, config.hidden, config.output_dim};
  std::mt19937_64 rng(seed);
  for (int l = 0; l < kNumLayers; ++l) {
    const double bound = std::sqrt(6.0 / widths[l]);
    std::uniform_real_distribution<double> uniform(-bound, bound);
    p.weights[l].resize(widths[l + 1], widths[l]);
    for (Eigen::Index i = 0; i < p.weights[l].size(); ++i) p.weights[l].data()[i] = uniform(rng);
    p.biases[l] = Eigen::VectorXd::Zero(widths[l + 1]);
  }
  if (config.mask_head) {
    const double bound = std::sqrt(6.0 / config.output_dim);
    std::uniform_real_distribution<double> uniform(-bound, bound);
    p.mask_weight.resize(config.output_dim);
    for (Eigen::Index i = 0; i < p.mask_weight.size(); ++i) p.mask_weight[i] = uniform(rng);
    p.mask_bias = Eigen::VectorXd::Zero(1);
  }
  return p;
}

EmbeddingHeadParams EmbeddingHeadParams::zeros_like(const EmbeddingHeadParams& other) {
  EmbeddingHeadParams p = other;
  p.visit([](const std::string&, std::span<double> s) { std::fill(s.begin(), s.end(), 0.0); });
  return p;
}

std::size_t EmbeddingHeadParams::num_parameters() const {
  std::size_t n = 0;
  visit([&](const std::string&, std::span<const double> s) { n += s.size(); });
  return n;
}

void EmbeddingHeadParams::validate() const {
  for (int l = 0; l < kNumLayers; ++l) {
    require(weights[l].rows() == biases[l].size(), ErrorCode::kShapeMismatch,
            "mlp." + std::to_string(l) + " bias size does not match weight rows");
    if (l > 0) {
      require(weights[l].cols() == weights[l - 1].rows(), ErrorCode::kShapeMismatch,
              "mlp." + std::to_string(l) + " input width does not chain");
    }
  }
  require(weights[2].rows() >= 2, ErrorCode::kShapeMismatch, "output dim must be >= 2");
  if (has_mask_head()) {
    require(mask_weight.size() == weights[2].rows() && mask_bias.size() == 1,
            ErrorCode::kShapeMismatch, "mask head shape mismatch");
  }
  visit([](const std::string& name, std::span<const double> s) {
    for (double v : s) require(std::isfinite(v), ErrorCode::kNonFinite, "non-finite parameter in " + name);
  });
}

std::vector<double> EmbeddingHeadParams::flatten() const {
  std::vector<double> out;
  out.reserve(num_parameters());
  visit([&](const std::string&, std::span<const double> s) { out.insert(out.end(), s.begin(), s.end()); });
  return out;
}

void EmbeddingHeadParams::unflatten(std::span<const double> values) {
  require(values.size() == num_parameters(), ErrorCode::kShapeMismatch,
          "flat parameter vector has wrong length");
  std::size_t offset = 0;
  visit([&](const std::string&, std::span<double> s) {
    std::copy(values.begin() + offset, values.begin() + offset + s.size(), s.begin());
    offset += s.size();
  });
}

Eigen::Vector3d block_weights(const Eigen::Vector3d& logits) {
  const Eigen::Vector3d e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

FeaturePlane fuse_blocks(const FeatureGrid& grid, const Eigen::Vector3d& block_logits) {
  grid.validate();
  const Eigen::Vector3d w = block_weights(block_logits);
  FeaturePlane plane{grid.grid_h, grid.grid_w, grid.channels,
                     std::vector<double>(grid.blocks[0].size(), 0.0)};
  for (int b = 0; b < kNumFeatureBlocks; ++b) {
    for (std::size_t i = 0; i < plane.data.size(); ++i) plane.data[i] += w[b] * grid.blocks[b][i];
  }
  return plane;
}

BilinearTaps bilinear_taps(int grid_h, int grid_w, int stride, Pixel pixel) {
  require(pixel.row >= 0 && pixel.col >= 0 && pixel.row < grid_h * stride &&
              pixel.col < grid_w * stride,
          ErrorCode::kOutOfRange,
          "pixel (" + std::to_string(pixel.row) + ", " + std::to_string(pixel.col) +
              ") outside image");
  const double gy = std::clamp((pixel.row + 0.5) / stride - 0.5, 0.0, grid_h - 1.0);
  const double gx = std::clamp((pixel.col + 0.5) / stride - 0.5, 0.0, grid_w - 1.0);
  const int r0 = static_cast<int>(std::floor(gy));
  const int c0 = static_cast<int>(std::floor(gx));
  const int r1 = std::min(r0 + 1, grid_h - 1);
  const int c1 = std::min(c0 + 1, grid_w - 1);
  const double fy = gy - r0, fx = gx - c0;
  BilinearTaps taps;
  taps.cell = {r0 * grid_w + c0, r0 * grid_w + c1, r1 * grid_w + c0, r1 * grid_w + c1};
  taps.weight = {(1 - fy) * (1 - fx), (1 - fy) * fx, fy * (1 - fx), fy * fx};
  return taps;
}

Eigen::VectorXd sample_feature(const FeaturePlane& plane, Pixel pixel, int stride) {
  const auto taps = bilinear_taps(plane.grid_h, plane.grid_w, stride, pixel);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(plane.channels);
  for (int t = 0; t < 4; ++t) {
    const double* cell = plane.data.data() + static_cast<std::size_t>(taps.cell[t]) * plane.channels;
    for (int ch = 0; ch < plane.channels; ++ch) out[ch] += taps.weight[t] * cell[ch];
  }
  return out;
}

namespace {

Eigen::MatrixXd relu(const Eigen::MatrixXd& z) { return z.cwiseMax(0.0); }

void check_finite(const Eigen::MatrixXd& m, const char* what) {
  require(m.allFinite(), ErrorCode::kNonFinite, std::string("non-finite values in ") + what);
}

}  // namespace

ForwardCache forward_with_cache(const EmbeddingHeadParams& params,
                                std::span<const PointQuery> queries) {
  params.validate();
  require(!queries.empty(), ErrorCode::kInvalidArgument, "forward needs at least one point");
  const int c = queries[0].grid->channels;
  const int in_width = static_cast<int>(params.weights[0].cols());
  const int t = in_width - c;
  const auto n = static_cast<Eigen::Index>(queries.size());

  ForwardCache cache;
  for (auto& s : cache.block_samples) s = Eigen::MatrixXd::Zero(n, c);
  cache.fusion_weights = block_weights(params.block_logits);
  cache.input.resize(n, in_width);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& q = queries[i];
    require(q.grid != nullptr && q.function != nullptr, ErrorCode::kInvalidArgument,
            "query without grid or function");
    require(q.grid->channels == c, ErrorCode::kShapeMismatch, "mixed feature channel counts");
    require(q.function->vector.size() == t, ErrorCode::kShapeMismatch,
            "function embedding width " + std::to_string(q.function->vector.size()) +
                " does not match head input (expected " + std::to_string(t) + ")");
    const auto taps = bilinear_taps(q.grid->grid_h, q.grid->grid_w, q.grid->stride, q.pixel);
    for (int b = 0; b < kNumFeatureBlocks; ++b) {
      auto row = cache.block_samples[b].row(i);
      for (int k = 0; k < 4; ++k) {
        const float* cell = q.grid->blocks[b].data() + static_cast<std::size_t>(taps.cell[k]) * c;
        for (int ch = 0; ch < c; ++ch) row[ch] += taps.weight[k] * cell[ch];
      }
    }
    cache.input.row(i).tail(t) = q.function->vector.transpose();
  }
  cache.input.leftCols(c) = cache.fusion_weights[0] * cache.block_samples[0] +
                            cache.fusion_weights[1] * cache.block_samples[1] +
                            cache.fusion_weights[2] * cache.block_samples[2];

  cache.z1 = (cache.input * params.weights[0].transpose()).rowwise() + params.biases[0].transpose();
  cache.a1 = relu(cache.z1);
  cache.z2 = (cache.a1 * params.weights[1].transpose()).rowwise() + params.biases[1].transpose();
  cache.a2 = relu(cache.z2);
  cache.output = (cache.a2 * params.weights[2].transpose()).rowwise() + params.biases[2].transpose();
  check_finite(cache.output, "head output");
  cache.norms = cache.output.rowwise().norm();
  require(cache.norms.minCoeff() > 0.0, ErrorCode::kNonFinite,
          "head output has zero norm; cannot normalize");
  cache.result.embeddings = cache.output.array().colwise() / cache.norms.array();
  if (params.has_mask_head()) {
    cache.result.mask_logits = (cache.output * params.mask_weight).array() + params.mask_bias[0];
  }
  return cache;
}

HeadOutput forward(const EmbeddingHeadParams& params, std::span<const PointQuery> queries) {
  return forward_with_cache(params, queries).result;
}

void backward(const EmbeddingHeadParams& params, const ForwardCache& cache,
              const Eigen::MatrixXd& d_embeddings, const Eigen::VectorXd& d_mask_logits,
              EmbeddingHeadParams& grad) {
  const Eigen::MatrixXd& e = cache.result.embeddings;
  require(d_embeddings.rows() == e.rows() && d_embeddings.cols() == e.cols(),
          ErrorCode::kShapeMismatch, "embedding gradient shape mismatch");
  // d(y / |y|) = (I - e e^T) / |y|
  const Eigen::VectorXd radial = (d_embeddings.array() * e.array()).rowwise().sum();
  Eigen::MatrixXd d_out = (d_embeddings.array() - e.array().colwise() * radial.array()).matrix();
  d_out = d_out.array().colwise() / cache.norms.array();
  if (params.has_mask_head() && d_mask_logits.size() > 0) {
    require(d_mask_logits.size() == e.rows(), ErrorCode::kShapeMismatch,
            "mask logit gradient shape mismatch");
    grad.mask_weight += cache.output.transpose() * d_mask_logits;
    grad.mask_bias[0] += d_mask_logits.sum();
    d_out += d_mask_logits * params.mask_weight.transpose();
  }

  grad.weights[2] += d_out.transpose() * cache.a2;
  grad.biases[2] += d_out.colwise().sum().transpose();
  Eigen::MatrixXd d_z2 = (d_out * params.weights[2]).array() * (cache.z2.array() > 0.0).cast<double>();
  grad.weights[1] += d_z2.transpose() * cache.a1;
  grad.biases[1] += d_z2.colwise().sum().transpose();
  Eigen::MatrixXd d_z1 = (d_z2 * params.weights[1]).array() * (cache.z1.array() > 0.0).cast<double>();
  grad.weights[0] += d_z1.transpose() * cache.input;
  grad.biases[0] += d_z1.colwise().sum().transpose();

  const int c = static_cast<int>(cache.block_samples[0].cols());
  const Eigen::MatrixXd d_fused = (d_z1 * params.weights[0]).leftCols(c);
  Eigen::Vector3d d_w;
  for (int b = 0; b < kNumFeatureBlocks; ++b) {
    d_w[b] = (d_fused.array() * cache.block_samples[b].array()).sum();
  }
  const Eigen::Vector3d& w = cache.fusion_weights;
  grad.block_logits += (w.array() * (d_w.array() - w.dot(d_w))).matrix();
}

HeadOutput forward_dense(const EmbeddingHeadParams& params, const FeatureGrid& grid,
                         std::span<const Pixel> pixels, const FunctionEmbedding& function,
                         std::size_t chunk) {
  HeadOutput out;
  const auto n = static_cast<Eigen::Index>(pixels.size());
  out.embeddings.resize(n, params.weights[2].rows());
  if (params.has_mask_head()) out.mask_logits.resize(n);
  std::vector<PointQuery> queries;
  for (std::size_t start = 0; start < pixels.size(); start += chunk) {
    const std::size_t end = std::min(pixels.size(), start + chunk);
    queries.clear();
    for (std::size_t i = start; i < end; ++i) queries.push_back({&grid, pixels[i], &function});
    const HeadOutput part = forward(params, queries);
    out.embeddings.middleRows(start, end - start) = part.embeddings;
    if (params.has_mask_head()) out.mask_logits.segment(start, end - start) = part.mask_logits;
  }
  return out;
}

}  // namespace dfc
