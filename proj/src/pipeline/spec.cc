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


#include "pipeline/spec.h"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "diffcore/rng.h"
#include "vocab/static_vocab.h"

namespace dvcb {

ExperimentSpec DefaultSpec() {
  ExperimentSpec s;
  s.model.freeze_static_layers = true;
  s.bias.epochs = 20;
  s.bias.warmup_steps = 200;
  s.bias.bias_sampling.n_distractors = 20;
  return s;
}

ExperimentSpec Normalize(ExperimentSpec spec) {
  Validate(spec.datagen);
  spec.model.vocab_size = StaticVocab::CharacterLevel(spec.datagen.alphabet).size();
  spec.model.feature_dim = spec.datagen.feature_dim;
  Validate(spec.model);
  Validate(spec.pretrain);
  Validate(spec.bias);
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("experiment: ") + what);
  };
  const auto& g = spec.eval;
  require(!g.list_sizes.empty(), "eval.list_sizes is empty");
  for (int n : g.list_sizes) {
    require(n >= 0, "eval.list_sizes must be >= 0");
    // Distractors come from lexicon words absent from the utterance.
    require(n <= spec.datagen.num_words - spec.datagen.utt_max_words,
            "eval.list_sizes must not exceed num_words - utt_max_words");
  }
  require(g.sweep_list_size >= 0, "eval.sweep_list_size must be >= 0");
  require(g.timing_runs >= 1, "eval.timing_runs must be >= 1");
  require(g.max_utterances >= 0, "eval.max_utterances must be >= 0");
  require(!g.splits.empty(), "eval.splits is empty");
  for (const auto& s : g.splits) {
    require(s == kSplitTestSeen || s == kSplitTestUnseen,
            "eval.splits entries must be test-seen or test-unseen");
  }
  Validate(GridBeam(g, g.mu));
  require(spec.dev_size >= 0 && spec.dev_size < spec.datagen.n_bias_train,
          "dev_size must be in [0, n_bias_train)");
  require(!spec.output_dir.empty(), "output_dir is empty");
  return spec;
}

std::string SpecHash(const ExperimentSpec& spec) {
  nlohmann::json j = spec;
  j.erase("output_dir");
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(Fnv1a64(j.dump())));
  return buf;
}

ExperimentSpec LoadSpec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("config " + path + ": " + e.what());
  }
  nlohmann::json merged = DefaultSpec();
  merged.merge_patch(j);
  try {
    return merged.get<ExperimentSpec>();
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("config " + path + ": " + e.what());
  }
}

void SaveSpec(const std::string& path, const ExperimentSpec& spec) {
  nlohmann::json j = spec;
  j["spec_hash"] = SpecHash(spec);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

BeamConfig GridBeam(const EvalGrid& grid, double mu) {
  BeamConfig b;
  b.beam = grid.beam;
  b.mu = mu;
  b.max_steps = grid.max_steps;
  b.monotone = grid.monotone;
  return b;
}

}  // namespace dvcb
