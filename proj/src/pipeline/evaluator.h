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


#ifndef PIPELINE_EVALUATOR_H_
#define PIPELINE_EVALUATOR_H_

#include <cstdint>
#include <map>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "datagen/corpus.h"
#include "decode/runner.h"
#include "json.hpp"
#include "metrics/wer.h"
#include "model/inference.h"
#include "model/model.h"
#include "pipeline/spec.h"
#include "vocab/static_vocab.h"

namespace dvcb {

inline constexpr const char* kBaseline = "baseline";
inline constexpr const char* kBiased = "biased";

struct Condition {
  std::string split;
  std::string model;  // kBaseline or kBiased
  // List size used for scoring; the biased model also decodes with it.
  int n = 0;
  // Biasing weight; ignored by the baseline.
  double mu = 0;
  int beam = 3;

  std::string Label() const;
};

struct ConditionReport {
  Condition condition;
  long utterances = 0;
  ErrorCounts total;
  BiasedSplit split;
  double wer = 0;
  double b_wer = 0;  // NaN without list words in the references
  double u_wer = 0;
  long steps_total = 0;
  long forwards_total = 0;
  long dynamic_tokens = 0;
  long truncated = 0;
  double audio_s = 0;
  std::vector<double> decode_s;  // one entry per timing run
  double rtf = 0;                // median decode time over audio time

  // Timing fields (decode_s, rtf) are omitted unless `timing` is set.
  nlohmann::json ToJson(bool timing) const;
};

// Decodes and scores grid conditions against fixed per-utterance lists.
// The backbone and biased model share the frozen encoder, so encoder outputs
// are computed once per split.
class Evaluator {
 public:
  // `biased` may be null when only baseline conditions are evaluated.
  Evaluator(const Corpus& corpus, const StaticVocab& vocab,
            Model<float>& backbone, Model<float>* biased,
            const ExperimentSpec& spec);

  const std::vector<const Utterance*>& Utterances(const std::string& split);
  // Biasing list of utterance `i` of `split` with `n` entries: every target
  // word of the utterance plus distractors. Lists for growing n share their
  // distractors as a prefix.
  const std::vector<std::string>& List(const std::string& split, std::size_t i,
                                       int n);
  // Target words (unseen or rare in pretraining) of an utterance.
  bool IsTarget(const std::string& word) const;

  // Per-utterance decodes for a condition; memoized. Baseline decodes do
  // not depend on n.
  const std::vector<UtteranceDecode>& Decodes(const Condition& c);
  ConditionReport Evaluate(const Condition& c);

  // Iteration statistics over utterances where the biased condition emits
  // at least one dynamic token for a multi-token list word.
  nlohmann::json IterationComparison(const std::string& split, int n, double mu);

  // Static vs dynamic token counts for teacher-forced reference texts.
  nlohmann::json ReferenceStepComparison(const std::string& split, int n);

 private:
  using DecodeKey = std::tuple<std::string, std::string, int, double, int>;
  struct Timed {
    std::vector<UtteranceDecode> decodes;
    std::vector<double> seconds;
  };

  const Timed& Run(const Condition& c);
  const std::vector<Tensor<float>>& Encoded(const std::string& split);

  const Corpus& corpus_;
  const StaticVocab& vocab_;
  Model<float>& backbone_;
  Model<float>* biased_;
  ExperimentSpec spec_;
  std::unordered_map<std::string, int> pretrain_counts_;
  std::map<std::string, std::vector<const Utterance*>> utts_;
  std::map<std::string, std::vector<Tensor<float>>> encoded_;
  std::map<std::tuple<std::string, std::size_t, int>, std::vector<std::string>> lists_;
  std::map<DecodeKey, Timed> runs_;
};

}  // namespace dvcb

#endif  // PIPELINE_EVALUATOR_H_
