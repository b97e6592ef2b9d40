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

#ifndef TRAIN_TRAINER_H_
#define TRAIN_TRAINER_H_

#include <cstdint>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "datagen/corpus.h"
#include "diffcore/rng.h"
#include "json.hpp"
#include "model/model.h"
#include "vocab/dynamic_vocab.h"
#include "vocab/static_vocab.h"

namespace dvcb {

// How each biasing-stage batch draws its biasing list.
struct BiasSampling {
  int n_pos_per_utt = 2;
  int n_distractors = 10;
  int n_min = 0;
  int n_max = 64;
  // Prefer positives spanning at least two subword tokens.
  bool multi_token_only = true;
};

struct TrainConfig {
  int epochs = 20;
  int batch_size = 16;
  double lr = 0.002;
  int warmup_steps = 300;
  double smoothing = 0.1;
  // Global gradient-norm clip; 0 disables.
  double grad_clip = 0.0;
  BiasSampling bias_sampling;
  int threads = 1;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(BiasSampling, n_pos_per_utt,
                                                n_distractors, n_min, n_max,
                                                multi_token_only)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainConfig, epochs,
                                                batch_size, lr, warmup_steps,
                                                smoothing, grad_clip,
                                                bias_sampling, threads)

void Validate(const TrainConfig& config);

struct TrainExample {
  std::string id;
  const Tensor<float>* features = nullptr;
  std::vector<std::string> words;
  std::vector<int> static_ids;
};

// Examples point into `split`, which must outlive them.
std::vector<TrainExample> MakeExamples(const CorpusSplit& split,
                                       const StaticVocab& vocab);

struct SampledList {
  DynamicVocab dyn;
  // Per batch item, extended-id labels.
  std::vector<std::vector<int>> labels;
  std::vector<std::string> positives;
  std::vector<std::string> distractors;
};

// Positives come from the batch references, distractors from `lexicon`
// minus every batch reference word.
SampledList SampleBiasingList(const std::vector<const TrainExample*>& batch,
                              const std::vector<std::string>& lexicon,
                              const BiasSampling& sampling,
                              const StaticVocab& vocab, Rng& rng);

// Appends one JSON record per line; a default-constructed logger drops
// everything.
class StepLogger {
 public:
  StepLogger() = default;
  // Every record gets the fields of `stamp` merged in.
  explicit StepLogger(const std::string& path,
                      nlohmann::json stamp = nlohmann::json::object());
  void Log(const nlohmann::json& record);

 private:
  std::ofstream out_;
  nlohmann::json stamp_;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0;
  // Loss on the held-out batch; NaN when none was given.
  double heldout_loss = 0;
  nlohmann::json extra;
};

struct TrainResult {
  std::int64_t steps = 0;
  // For the biasing stage, entry 0 is the untrained model (epoch 0).
  std::vector<EpochRecord> epochs;
};

// Called after every epoch; whatever it returns lands in EpochRecord::extra.
using EpochHook = std::function<nlohmann::json(int epoch, Model<float>& model)>;

struct TrainOptions {
  StepLogger* logger = nullptr;
  EpochHook on_epoch;
  std::uint64_t seed = 0;
};

// Teacher-forced training of the whole backbone over static labels.
TrainResult PretrainBackbone(Model<float>& model,
                             const std::vector<TrainExample>& train,
                             const TrainConfig& config,
                             const TrainOptions& options);

// Trains the biasing-side parameters with the backbone frozen. Throws
// std::runtime_error if any frozen tensor changes.
TrainResult TrainBiasing(Model<float>& model,
                         const std::vector<TrainExample>& train,
                         const std::vector<std::string>& lexicon,
                         const StaticVocab& vocab, const TrainConfig& config,
                         const TrainOptions& options,
                         const std::vector<TrainExample>* heldout = nullptr);

// Mean per-token loss of a batch under a given list (no parameter update).
double EvaluateBiasLoss(Model<float>& model,
                        const std::vector<const TrainExample*>& batch,
                        const SampledList& list, double smoothing);

}  // namespace dvcb

#endif  // TRAIN_TRAINER_H_
