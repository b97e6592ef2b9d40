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


#ifndef PIPELINE_PIPELINE_H_
#define PIPELINE_PIPELINE_H_

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "datagen/corpus.h"
#include "json.hpp"
#include "model/model.h"
#include "pipeline/evaluator.h"
#include "pipeline/spec.h"
#include "vocab/static_vocab.h"

namespace dvcb {

inline constexpr const char* kStageGenData = "gen-data";
inline constexpr const char* kStagePretrain = "pretrain";
inline constexpr const char* kStageTrainBias = "train-bias";
inline constexpr const char* kStageEval = "eval";

// Raised when an artifact carries a different spec hash than the
// experiment reading it.
class SpecMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One experiment rooted at spec.output_dir. Layout:
//   spec.json  stages.json
//   data/                  corpus (see SaveCorpus)
//   backbone.ckpt  pretrain_log.jsonl
//   biased.ckpt    bias_log.jsonl   freeze.json
//   decode/<split>/<condition>.jsonl
//   metrics.json  report.json  report.txt  timing.txt
class Experiment {
 public:
  using Progress = std::function<void(const std::string&)>;

  // Throws SpecMismatch if the directory belongs to another spec.
  explicit Experiment(ExperimentSpec spec, Progress progress = nullptr);

  const ExperimentSpec& spec() const { return spec_; }
  const std::string& hash() const { return hash_; }
  std::string Path(const std::string& rel) const;

  bool Done(const std::string& stage) const;
  // Stages run unconditionally; Run skips the completed ones.
  void GenData();
  void Pretrain();
  void TrainBias();
  // Decodes the grid and writes the reports; returns metrics.json content.
  nlohmann::json Eval();
  nlohmann::json Run();

  // Artifact loaders; each verifies the spec hash.
  const Corpus& corpus();
  const StaticVocab& vocab() const { return vocab_; }
  Model<float>& backbone();
  Model<float>& biased();
  // Evaluator over the loaded models; the biased model is attached when its
  // stage has completed.
  Evaluator& evaluator();

  // Conditions of the configured grid, in report order.
  std::vector<Condition> GridConditions() const;

 private:
  void MarkDone(const std::string& stage, const nlohmann::json& info);
  void Log(const std::string& message) const;
  // Bias-train examples minus the dev tail, and the dev tail.
  std::pair<CorpusSplit, CorpusSplit> BiasSplits();
  nlohmann::json DevScores(Model<float>& model, bool biased);

  ExperimentSpec spec_;
  std::string hash_;
  Progress progress_;
  StaticVocab vocab_;
  std::unique_ptr<Corpus> corpus_;
  std::unique_ptr<Model<float>> backbone_;
  std::unique_ptr<Model<float>> biased_;
  std::unique_ptr<Evaluator> evaluator_;
  nlohmann::json stages_;
};

// Plain-text tables of a metrics record as written by Experiment::Eval.
std::string RenderReport(const nlohmann::json& metrics);
std::string RenderTiming(const nlohmann::json& report);

}  // namespace dvcb

#endif  // PIPELINE_PIPELINE_H_
