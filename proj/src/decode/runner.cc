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

#include "decode/runner.h"

#include <chrono>

namespace dvcb {

nlohmann::json ToJson(const UtteranceDecode& d) {
  return {{"id", d.id},         {"text", d.text},     {"ids", d.ids},
          {"logp", d.logp},     {"adjusted", d.adjusted},
          {"steps", d.steps},   {"truncated", d.truncated},
          {"wall_ms", d.wall_ms}};
}

UtteranceDecode DecodeUtterance(const std::string& id,
                                const IncrementalDecoder<float>& decoder,
                                const Tensor<float>& encoded,
                                const BiasCache<float>* bias,
                                const DynamicVocab& dyn,
                                const StaticVocab& vocab,
                                const BeamConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  const auto memory = decoder.Prepare(encoded);
  ModelScorer scorer(decoder, memory, bias);
  const DecodeResult r = config.beam == 1
                             ? GreedyDecode(scorer, config.mu, config.max_steps)
                             : BeamSearch(scorer, config);
  UtteranceDecode out;
  out.wall_ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - start)
                    .count();
  out.id = id;
  out.ids = r.best().ids;
  out.text = ExpandHypothesis(out.ids, dyn, vocab);
  out.logp = r.best().logp;
  out.adjusted = r.best().adjusted;
  out.steps = r.steps;
  out.forwards = r.forwards;
  out.truncated = r.truncated;
  return out;
}

}  // namespace dvcb
