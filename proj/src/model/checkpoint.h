// Copyright (c) 2026 dvcb authors
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

#ifndef MODEL_CHECKPOINT_H_
#define MODEL_CHECKPOINT_H_

#include <map>
#include <string>

#include "json.hpp"
#include "model/model.h"

namespace dvcb {

inline constexpr int kCheckpointVersion = 1;

struct CheckpointInfo {
  std::string spec_hash;
  nlohmann::json meta;  // free-form, e.g. training stage and step count
};

// One JSON manifest line followed by a little-endian float32 payload laid
// out in manifest order.
void SaveCheckpoint(const std::string& path, const Model<float>& model,
                    const CheckpointInfo& info);
Model<float> LoadCheckpoint(const std::string& path,
                            CheckpointInfo* info = nullptr);

// Hex FNV-1a over the tensor's little-endian bytes.
std::string TensorDigest(const Tensor<float>& t);
// Digest of every parameter in the given partition, keyed by name.
std::map<std::string, std::string> PartitionDigests(const Model<float>& model,
                                                    Partition partition);

}  // namespace dvcb

#endif  // MODEL_CHECKPOINT_H_
