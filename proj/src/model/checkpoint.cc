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

#include "model/checkpoint.h"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "diffcore/rng.h"

namespace dvcb {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

std::string Hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::string TensorDigest(const Tensor<float>& t) {
  return Hex(Fnv1a64(std::string_view(reinterpret_cast<const char*>(t.data()),
                                      t.size() * sizeof(float))));
}

std::map<std::string, std::string> PartitionDigests(const Model<float>& model,
                                                    Partition partition) {
  std::map<std::string, std::string> out;
  const auto& p = model.params();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (model.PartitionOf(p[i].name) == partition) {
      out[p[i].name] = TensorDigest(p[i].value);
    }
  }
  return out;
}

void SaveCheckpoint(const std::string& path, const Model<float>& model,
                    const CheckpointInfo& info) {
  nlohmann::json tensors = nlohmann::json::array();
  std::size_t offset = 0;
  const auto& p = model.params();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const std::size_t bytes = p[i].value.size() * sizeof(float);
    tensors.push_back({{"name", p[i].name},
                       {"partition", PartitionName(model.PartitionOf(p[i].name))},
                       {"shape", p[i].value.shape()},
                       {"dtype", "float32"},
                       {"offset", offset},
                       {"length", bytes}});
    offset += bytes;
  }
  nlohmann::json manifest = {{"format_version", kCheckpointVersion},
                             {"config", model.config()},
                             {"spec_hash", info.spec_hash},
                             {"meta", info.meta.is_null() ? nlohmann::json::object() : info.meta},
                             {"tensors", tensors}};
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path);
    out << manifest.dump() << '\n';
    for (std::size_t i = 0; i < p.size(); ++i) {
      out.write(reinterpret_cast<const char*>(p[i].value.data()),
                static_cast<std::streamsize>(p[i].value.size() * sizeof(float)));
    }
    if (!out) throw std::runtime_error("short write on checkpoint " + path);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw std::runtime_error("cannot finalize checkpoint " + path);
  }
}

Model<float> LoadCheckpoint(const std::string& path, CheckpointInfo* info) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty checkpoint");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": bad checkpoint manifest: " + e.what());
  }
  if (manifest.value("format_version", 0) != kCheckpointVersion) {
    throw std::runtime_error(path + ": unsupported checkpoint version");
  }
  Model<float> model(manifest.at("config").get<ModelConfig>());
  std::ostringstream rest;
  rest << in.rdbuf();
  const std::string payload = rest.str();
  for (const auto& rec : manifest.at("tensors")) {
    const auto name = rec.at("name").get<std::string>();
    if (rec.at("dtype").get<std::string>() != "float32") {
      throw std::runtime_error(path + ": tensor " + name + " is not float32");
    }
    const auto offset = rec.at("offset").get<std::size_t>();
    const auto length = rec.at("length").get<std::size_t>();
    auto& p = model.params().Add(name, rec.at("shape").get<std::vector<std::size_t>>());
    if (length != p.value.size() * sizeof(float) || offset + length > payload.size()) {
      throw std::runtime_error(path + ": tensor " + name + " has a bad extent");
    }
    std::memcpy(p.value.data(), payload.data() + offset, length);
  }
  model.SetStage(model.has_biasing() ? Stage::kBias : Stage::kPretrain);
  if (info != nullptr) {
    info->spec_hash = manifest.value("spec_hash", "");
    info->meta = manifest.value("meta", nlohmann::json::object());
  }
  return model;
}

}  // namespace dvcb
