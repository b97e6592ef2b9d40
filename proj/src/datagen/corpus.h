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

#ifndef DATAGEN_CORPUS_H_
#define DATAGEN_CORPUS_H_

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "datagen/lexicon.h"
#include "diffcore/rng.h"
#include "diffcore/tensor.h"

namespace dvcb {

struct Utterance {
  std::string id;
  std::vector<std::string> words;
  Tensor<float> features;  // T x F
  double duration_s = 0;

  std::string Text() const;
};

inline constexpr const char* kSplitPretrain = "pretrain";
inline constexpr const char* kSplitBiasTrain = "bias-train";
inline constexpr const char* kSplitTestSeen = "test-seen";
inline constexpr const char* kSplitTestUnseen = "test-unseen";

struct CorpusSplit {
  std::string name;
  std::vector<Utterance> utterances;
};

struct Corpus {
  DatagenConfig config;
  std::uint64_t seed = 0;
  Lexicon lexicon;
  std::map<std::string, CorpusSplit> splits;
  // Hash of the experiment that produced the corpus; empty if none.
  std::string spec_hash;

  const CorpusSplit& split(const std::string& name) const;
  // Word counts over the pretrain split's references.
  std::unordered_map<std::string, int> PretrainCounts() const;
  // Unseen or at most config.rare_max_count occurrences in pretrain text.
  bool IsTarget(const std::string& word,
                const std::unordered_map<std::string, int>& counts) const;
};

// Mean vector of each unit repeated for a duration drawn from {2, 3, 4}
// frames (or exactly `fixed_duration` when nonzero), plus N(0, sigma^2)
// noise. Consecutive words are separated by a silence unit.
Tensor<float> SynthFeatures(const std::vector<std::string>& words,
                            const Lexicon& lexicon, double noise_sigma,
                            Rng& rng, int fixed_duration = 0);

// Generates one split; each split draws from its own named stream.
CorpusSplit GenerateSplit(const std::string& name, const DatagenConfig& config,
                          const Lexicon& lexicon, std::uint64_t seed);

Corpus GenerateCorpus(const DatagenConfig& config, std::uint64_t seed);

// Every target word (per `is_target`) occurring in `utterances`, padded to
// `n` with distractors drawn from the lexicon minus all reference words.
// Throws when n is smaller than the number of targets.
std::vector<std::string> BuildEvalBiasingList(
    const std::vector<const Utterance*>& utterances, int n,
    const Lexicon& lexicon,
    const std::function<bool(const std::string&)>& is_target,
    std::uint64_t seed);

// Feature file: "DVFT" magic, uint32 T, uint32 F (little endian), then T*F
// little-endian float32 values.
void WriteFeatures(const std::string& path, const Tensor<float>& features);
Tensor<float> ReadFeatures(const std::string& path);

// Writes lexicon.json, the static vocabulary, and per split a manifest.jsonl
// (id, text, features, duration) plus feature files.
void SaveCorpus(const Corpus& corpus, const std::string& dir);
Corpus LoadCorpus(const std::string& dir);

}  // namespace dvcb

#endif  // DATAGEN_CORPUS_H_
