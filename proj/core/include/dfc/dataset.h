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

#ifndef DFC_DATASET_H_
#define DFC_DATASET_H_

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dfc/camera.h"
#include "dfc/embedding.h"
#include "dfc/manifest.h"
#include "dfc/scenes.h"
#include "dfc/tensor_store.h"

namespace dfc {

struct LoadedObject {
  std::string object_id;
  std::optional<Mesh> mesh;
  std::vector<CameraView> views;
  std::vector<FeatureGrid> features;  // parallel to views; part masks attached
};

struct DatasetLoadOptions {
  bool features = true;
  bool meshes = true;
  bool function_embeddings = true;
};

// In-memory view of a manifest and every tensor it references.
struct Dataset {
  Manifest manifest;
  std::vector<LoadedObject> objects;  // manifest order
  std::map<std::string, FunctionEmbedding> functions;

  const LoadedObject& object(const std::string& object_id) const {
    return objects[manifest.object_index(object_id)];
  }
  const FunctionEmbedding& function(const std::string& name) const;
  int text_channels() const;
  int image_channels() const;
};

Dataset load_dataset(const std::filesystem::path& manifest_path,
                     const DatasetLoadOptions& options = {});
Dataset load_dataset(Manifest manifest, const DatasetLoadOptions& options = {});

Tensor mesh_vertices_tensor(const Mesh& mesh);
Tensor mesh_faces_tensor(const Mesh& mesh);
Mesh mesh_from_tensors(const Tensor& vertices, const Tensor& faces);

Tensor function_embedding_tensor(const FunctionEmbedding& embedding);
FunctionEmbedding function_embedding_from_tensor(const std::string& name, const Tensor& tensor);

}  // namespace dfc

#endif  // DFC_DATASET_H_
