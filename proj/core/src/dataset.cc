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

#include "dfc/dataset.h"

#include <utility>

#include "dfc/error.h"
#include "dfc/image.h"

namespace dfc {

const FunctionEmbedding& Dataset::function(const std::string& name) const {
  const auto it = functions.find(name);
  require(it != functions.end(), ErrorCode::kNotFound,
          "no embedding for function '" + name + "'");
  return it->second;
}

int Dataset::text_channels() const {
  require(!functions.empty(), ErrorCode::kEmpty, "dataset has no function embeddings");
  return static_cast<int>(functions.begin()->second.vector.size());
}

int Dataset::image_channels() const {
  for (const auto& o : objects) {
    if (!o.features.empty()) return o.features.front().channels;
  }
  fail(ErrorCode::kEmpty, "dataset has no feature grids");
}

Tensor mesh_vertices_tensor(const Mesh& mesh) {
  std::vector<double> v;
  v.reserve(mesh.vertices.size() * 3);
  for (const auto& p : mesh.vertices) v.insert(v.end(), {p.x(), p.y(), p.z()});
  return Tensor::from<double>({mesh.vertices.size(), 3}, v);
}

Tensor mesh_faces_tensor(const Mesh& mesh) {
  std::vector<std::int64_t> f;
  f.reserve(mesh.faces.size() * 3);
  for (const auto& t : mesh.faces) f.insert(f.end(), {t[0], t[1], t[2]});
  return Tensor::from<std::int64_t>({mesh.faces.size(), 3}, f);
}

Mesh mesh_from_tensors(const Tensor& vertices, const Tensor& faces) {
  require(vertices.ndim() == 2 && vertices.shape()[1] == 3, ErrorCode::kShapeMismatch,
          "mesh vertices must have shape [V, 3]");
  require(faces.ndim() == 2 && faces.shape()[1] == 3, ErrorCode::kShapeMismatch,
          "mesh faces must have shape [F, 3]");
  const auto v = vertices.values<double>();
  const auto f = faces.values<std::int64_t>();
  Mesh mesh;
  for (std::size_t i = 0; i < v.size(); i += 3) mesh.vertices.emplace_back(v[i], v[i + 1], v[i + 2]);
  const auto nv = static_cast<std::int64_t>(mesh.vertices.size());
  for (std::size_t i = 0; i < f.size(); i += 3) {
    for (int k = 0; k < 3; ++k) {
      require(f[i + k] >= 0 && f[i + k] < nv, ErrorCode::kOutOfRange, "mesh face index out of range");
    }
    mesh.faces.push_back({static_cast<int>(f[i]), static_cast<int>(f[i + 1]), static_cast<int>(f[i + 2])});
  }
  return mesh;
}

Tensor function_embedding_tensor(const FunctionEmbedding& embedding) {
  std::vector<float> v(embedding.vector.data(), embedding.vector.data() + embedding.vector.size());
  return Tensor::from<float>({v.size()}, v);
}

FunctionEmbedding function_embedding_from_tensor(const std::string& name, const Tensor& tensor) {
  require(tensor.ndim() == 1, ErrorCode::kShapeMismatch,
          "function embedding '" + name + "' must be 1-D");
  FunctionEmbedding e{name, Eigen::VectorXd(static_cast<Eigen::Index>(tensor.numel()))};
  if (tensor.dtype() == DType::kF32) {
    const auto v = tensor.values<float>();
    for (std::size_t i = 0; i < v.size(); ++i) e.vector[static_cast<Eigen::Index>(i)] = v[i];
  } else {
    const auto v = tensor.values<double>();
    for (std::size_t i = 0; i < v.size(); ++i) e.vector[static_cast<Eigen::Index>(i)] = v[i];
  }
  require(e.vector.allFinite(), ErrorCode::kNonFinite,
          "function embedding '" + name + "' is not finite");
  return e;
}

Dataset load_dataset(const std::filesystem::path& manifest_path, const DatasetLoadOptions& options) {
  return load_dataset(read_manifest(manifest_path), options);
}

Dataset load_dataset(Manifest manifest, const DatasetLoadOptions& options) {
  Dataset ds;
  ds.manifest = std::move(manifest);
  const Manifest& m = ds.manifest;
  for (const auto& rec : m.objects) {
    LoadedObject obj;
    obj.object_id = rec.object_id;
    if (options.meshes && rec.mesh) {
      obj.mesh = mesh_from_tensors(read_tensor(m.resolve(rec.mesh->vertices)),
                                   read_tensor(m.resolve(rec.mesh->faces)));
    }
    for (std::size_t vi = 0; vi < rec.views.size(); ++vi) {
      const ViewRecord& vr = rec.views[vi];
      CameraView view;
      view.camera = vr.camera;
      view.depth = image_from_tensor<float>(read_tensor(m.resolve(vr.depth)));
      view.object_mask = image_from_tensor<std::uint8_t>(read_tensor(m.resolve(vr.object_mask)));
      view.validate();
      if (options.features) {
        FeatureGrid grid;
        feature_planes_from_tensor(read_tensor(m.resolve(vr.features)), grid);
        grid.stride = m.stride;
        grid.image_height = vr.camera.height;
        grid.image_width = vr.camera.width;
        grid.object_mask = view.object_mask;
        for (const auto& [fn, path] : vr.part_masks) {
          grid.part_masks[fn] = image_from_tensor<std::uint8_t>(read_tensor(m.resolve(path)));
        }
        grid.validate();
        obj.features.push_back(std::move(grid));
      }
      obj.views.push_back(std::move(view));
    }
    ds.objects.push_back(std::move(obj));
  }
  if (options.function_embeddings) {
    for (const auto& [name, path] : m.function_embeddings) {
      ds.functions.emplace(name, function_embedding_from_tensor(name, read_tensor(m.resolve(path))));
    }
    std::size_t dims = 0;
    for (const auto& [name, e] : ds.functions) {
      if (dims == 0) dims = static_cast<std::size_t>(e.vector.size());
      require(static_cast<std::size_t>(e.vector.size()) == dims, ErrorCode::kShapeMismatch,
              "function embeddings differ in length");
    }
  }
  return ds;
}

}  // namespace dfc
