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

#ifndef MODEL_CONFIG_H_
#define MODEL_CONFIG_H_

#include <string>

#include "json.hpp"

namespace dvcb {

struct ModelConfig {
  int d = 128;
  int d_bias = 64;
  int feature_dim = 32;
  int vocab_size = 57;
  int enc_layers = 2;
  int dec_layers = 2;
  int bias_layers = 2;
  int heads = 4;
  int ffn_mult = 4;
  int max_len = 512;
  // Sinusoidal positions over a biasing word's subword tokens.
  bool bias_positions = true;
  // Keep the extended layers' static embedding and output projection frozen
  // at their backbone values during biasing training.
  bool freeze_static_layers = false;
  // A dynamic token takes the decoder position of its word's last subword,
  // so following tokens keep the positions static decoding would give them.
  bool span_positions = true;
  double dropout = 0.0;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(
    ModelConfig, d, d_bias, feature_dim, vocab_size, enc_layers, dec_layers,
    bias_layers, heads, ffn_mult, max_len, bias_positions,
    freeze_static_layers, span_positions, dropout)

// Throws std::invalid_argument naming the offending field.
void Validate(const ModelConfig& config);

}  // namespace dvcb

#endif  // MODEL_CONFIG_H_
