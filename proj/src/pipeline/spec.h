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


#ifndef PIPELINE_SPEC_H_
#define PIPELINE_SPEC_H_

#include <cstdint>
#include <string>
#include <vector>

#include "datagen/config_json.h"
#include "datagen/lexicon.h"
#include "decode/beam_search.h"
#include "json.hpp"
#include "model/config.h"
#include "train/trainer.h"

namespace dvcb {

struct EvalGrid {
  std::vector<int> list_sizes = {0, 10, 20, 50, 100};
  std::vector<double> mu_values = {0.0, 0.1, 0.3, 0.5, 1.0};
  // Biasing weight used across the list-size grid.
  double mu = 0.3;
  int beam = 3;
  int max_steps = 200;
  bool monotone = true;
  // List size of the mu sweep and of the iteration comparison.
  int sweep_list_size = 20;
  int timing_runs = 3;
  std::vector<std::string> splits = {"test-seen", "test-unseen"};
  // Utterances decoded per split; 0 means all.
  int max_utterances = 0;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(EvalGrid, list_sizes, mu_values,
                                                mu, beam, max_steps, monotone,
                                                sweep_list_size, timing_runs,
                                                splits, max_utterances)

struct ExperimentSpec {
  std::uint64_t seed = 1;
  DatagenConfig datagen;
  ModelConfig model;
  TrainConfig pretrain;
  TrainConfig bias;
  EvalGrid eval;
  // Trailing bias-train utterances held out for validation in both stages.
  int dev_size = 64;
  std::string output_dir = "runs/default";
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ExperimentSpec, seed, datagen,
                                                model, pretrain, bias, eval,
                                                dev_size, output_dir)

// Defaults for the desk-scale experiment.
ExperimentSpec DefaultSpec();

// Derives the model's vocabulary size and feature dimension from the data
// config, then validates every section. Throws std::invalid_argument.
ExperimentSpec Normalize(ExperimentSpec spec);

// 16 hex digits over the canonical JSON of everything except output_dir.
std::string SpecHash(const ExperimentSpec& spec);

ExperimentSpec LoadSpec(const std::string& path);
void SaveSpec(const std::string& path, const ExperimentSpec& spec);

BeamConfig GridBeam(const EvalGrid& grid, double mu);

}  // namespace dvcb

#endif  // PIPELINE_SPEC_H_
