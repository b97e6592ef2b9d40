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

#ifndef DECODE_BEAM_SEARCH_H_
#define DECODE_BEAM_SEARCH_H_

#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "model/inference.h"
#include "vocab/dynamic_vocab.h"
#include "vocab/static_vocab.h"

namespace dvcb {

struct BeamConfig {
  int beam = 3;
  double mu = 0.3;
  int max_steps = 200;
  // Rank finished hypotheses by adjusted score per emitted token.
  bool len_norm = false;
  // Return the best result over widths 1..beam, so widening the beam never
  // lowers the best score. Plain beam search gives no such guarantee.
  bool monotone = true;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(BeamConfig, beam, mu,
                                                max_steps, len_norm, monotone)

void Validate(const BeamConfig& config);

struct Hypothesis {
  std::vector<int> ids;  // starts with sos; ends with eos when finished
  double logp = 0;
  // logp + mu * (number of dynamic ids).
  double adjusted = 0;
  bool finished = false;
};

struct DecodeResult {
  std::vector<Hypothesis> hyps;  // best first
  // Decoder forwards behind the best hypothesis (|ids| - 1).
  int steps = 0;
  // Decoder forwards executed over the whole search.
  int forwards = 0;
  // No hypothesis finished within max_steps.
  bool truncated = false;

  const Hypothesis& best() const { return hyps.front(); }
};

// Next-token log-probabilities for incrementally extended prefixes. Ids at
// or above first_dynamic() are dynamic tokens.
class Scorer {
 public:
  struct State {
    virtual ~State() = default;
  };

  virtual ~Scorer() = default;
  virtual int vocab_size() const = 0;
  virtual int first_dynamic() const = 0;
  virtual int sos() const { return kSos; }
  virtual int eos() const { return kEos; }
  virtual std::unique_ptr<State> Initial() const = 0;
  virtual std::unique_ptr<State> Clone(const State& s) const = 0;
  // Consumes `token` and returns log-probabilities of the next token.
  virtual std::vector<double> Step(State& s, int token) const = 0;
};

DecodeResult BeamSearch(const Scorer& scorer, const BeamConfig& config);
// Single pass at exactly `config.beam`, ignoring `monotone`.
DecodeResult PlainBeamSearch(const Scorer& scorer, const BeamConfig& config);
DecodeResult GreedyDecode(const Scorer& scorer, double mu, int max_steps);

// Dynamic ids become their word surfaces, static ids are detokenized and
// specials dropped. Throws std::out_of_range on ids >= K + N.
std::string ExpandHypothesis(const std::vector<int>& ids,
                             const DynamicVocab& dyn, const StaticVocab& vocab);

// Scores with a trained model through the incremental decoder. The memory
// and cache must outlive the scorer.
class ModelScorer : public Scorer {
 public:
  ModelScorer(const IncrementalDecoder<float>& decoder,
              const IncrementalDecoder<float>::Memory& memory,
              const BiasCache<float>* bias);

  int vocab_size() const override { return vocab_size_; }
  int first_dynamic() const override { return decoder_.vocab_size(); }
  std::unique_ptr<State> Initial() const override;
  std::unique_ptr<State> Clone(const State& s) const override;
  std::vector<double> Step(State& s, int token) const override;

 private:
  struct DecState : State {
    IncrementalDecoder<float>::State inner;
  };
  const IncrementalDecoder<float>& decoder_;
  const IncrementalDecoder<float>::Memory& memory_;
  const BiasCache<float>* bias_;
  int vocab_size_;
};

}  // namespace dvcb

#endif  // DECODE_BEAM_SEARCH_H_
