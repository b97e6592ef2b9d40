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

#ifndef DECODE_RUNNER_H_
#define DECODE_RUNNER_H_

#include <string>
#include <vector>

#include "decode/beam_search.h"
#include "json.hpp"

namespace dvcb {

struct UtteranceDecode {
  std::string id;
  std::string text;
  std::vector<int> ids;
  double logp = 0;
  double adjusted = 0;
  int steps = 0;
  int forwards = 0;
  bool truncated = false;
  // Decoder forwards and beam bookkeeping only; the encoder and biasing
  // encoder run before the clock starts.
  double wall_ms = 0;
};

nlohmann::json ToJson(const UtteranceDecode& d);

// Decodes one utterance from its encoder output. `bias` may be null for
// backbone decoding; `dyn` must match it.
UtteranceDecode DecodeUtterance(const std::string& id,
                                const IncrementalDecoder<float>& decoder,
                                const Tensor<float>& encoded,
                                const BiasCache<float>* bias,
                                const DynamicVocab& dyn,
                                const StaticVocab& vocab,
                                const BeamConfig& config);

}  // namespace dvcb

#endif  // DECODE_RUNNER_H_
