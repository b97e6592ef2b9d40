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


#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "pipeline/pipeline.h"

namespace dvcb {
namespace {

namespace fs = std::filesystem;

ExperimentSpec Tiny(const std::string& dir) {
  ExperimentSpec s = DefaultSpec();
  s.seed = 3;
  s.output_dir = (fs::path(testing::TempDir()) / dir).string();
  s.datagen.num_words = 60;
  s.datagen.num_unseen = 10;
  s.datagen.n_pretrain = 120;
  s.datagen.n_bias_train = 60;
  s.datagen.n_test_seen = 10;
  s.datagen.n_test_unseen = 10;
  s.datagen.utt_max_words = 5;
  s.model.d = 16;
  s.model.d_bias = 8;
  s.model.heads = 2;
  s.model.enc_layers = 1;
  s.model.dec_layers = 1;
  s.model.bias_layers = 1;
  s.pretrain.epochs = 2;
  s.pretrain.warmup_steps = 10;
  s.bias.epochs = 2;
  s.bias.warmup_steps = 5;
  s.dev_size = 8;
  s.eval.list_sizes = {0, 10, 20};
  s.eval.timing_runs = 1;
  fs::remove_all(s.output_dir);
  return s;
}

std::string Slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

TEST(PipelineTest, SpecRoundTripAndHash) {
  const auto a = Normalize(Tiny("hash_a"));
  nlohmann::json j = a;
  EXPECT_EQ(nlohmann::json(j.get<ExperimentSpec>()), j);
  auto b = a;
  b.output_dir = "elsewhere";
  EXPECT_EQ(SpecHash(a), SpecHash(b));
  b.seed = 4;
  EXPECT_NE(SpecHash(a), SpecHash(b));
  EXPECT_EQ(SpecHash(a).size(), 16u);
}

TEST(PipelineTest, LoadSpecMergesDefaults) {
  const auto path = (fs::path(testing::TempDir()) / "partial.json").string();
  std::ofstream(path) << R"({"seed": 9, "eval": {"beam": 5}})";
  const auto s = LoadSpec(path);
  EXPECT_EQ(s.seed, 9u);
  EXPECT_EQ(s.eval.beam, 5);
  EXPECT_EQ(s.eval.list_sizes, DefaultSpec().eval.list_sizes);
  EXPECT_EQ(s.bias.epochs, DefaultSpec().bias.epochs);
  std::ofstream(path) << R"({"seed": "nine"})";
  EXPECT_THROW(LoadSpec(path), std::invalid_argument);
}

TEST(PipelineTest, NormalizeRejectsBadSpecs) {
  auto s = Tiny("bad");
  s.eval.list_sizes = {200};
  EXPECT_THROW(Normalize(s), std::invalid_argument);
  s = Tiny("bad");
  s.eval.splits = {"pretrain"};
  EXPECT_THROW(Normalize(s), std::invalid_argument);
  s = Tiny("bad");
  s.eval.beam = 0;
  EXPECT_THROW(Normalize(s), std::invalid_argument);
  s = Tiny("bad");
  s.model.vocab_size = 3;
  EXPECT_EQ(Normalize(s).model.vocab_size, 57);
}

TEST(PipelineTest, BaselineOnlyGrid) {
  auto s = Tiny("grid0");
  s.eval.list_sizes = {0};
  s.eval.splits = {kSplitTestUnseen};
  Experiment e(s);
  const auto conds = e.GridConditions();
  ASSERT_EQ(conds.size(), 1u);
  EXPECT_EQ(conds[0].model, kBaseline);
  EXPECT_EQ(conds[0].n, 0);
  const auto metrics = e.Run();
  EXPECT_FALSE(e.Done(kStageTrainBias));
  ASSERT_EQ(metrics["conditions"].size(), 1u);
  EXPECT_EQ(metrics["conditions"][0]["model"], kBaseline);
}

TEST(PipelineTest, RunIsDeterministicAndResumable) {
  Experiment fresh(Tiny("fresh"));
  const auto m1 = fresh.Run();

  // Same spec elsewhere, interrupted after pretraining, then resumed by a
  // new process-equivalent object.
  auto spec = Tiny("resumed");
  {
    Experiment partial(spec);
    partial.GenData();
    partial.Pretrain();
  }
  Experiment resumed(spec);
  EXPECT_TRUE(resumed.Done(kStagePretrain));
  EXPECT_FALSE(resumed.Done(kStageTrainBias));
  const auto m2 = resumed.Run();

  EXPECT_EQ(m1, m2);
  for (const char* f : {"metrics.json", "report.txt", "backbone.ckpt", "biased.ckpt",
                        "freeze.json", "data/test-unseen/manifest.jsonl"}) {
    EXPECT_EQ(Slurp(fresh.Path(f)), Slurp(resumed.Path(f))) << f;
  }
  EXPECT_TRUE(m1["freezing"]["identical"].get<bool>());

  // Error attributions partition the total.
  for (const auto& c : m1["conditions"]) {
    const auto& k = c["counts"];
    EXPECT_EQ(k["biased_errors"].get<long>() + k["unbiased_errors"].get<long>(),
              k["sub"].get<long>() + k["del"].get<long>() + k["ins"].get<long>());
  }
  // Every decode record carries the spec hash.
  std::ifstream in(fresh.Path("decode/test-unseen/biased_n20_mu0.3_beam3.jsonl"));
  int lines = 0;
  for (std::string line; std::getline(in, line); ++lines) {
    EXPECT_EQ(nlohmann::json::parse(line)["spec_hash"], fresh.hash());
  }
  EXPECT_EQ(lines, 10);
}

TEST(PipelineTest, RefusesForeignArtifacts) {
  auto a = Tiny("foreign");
  {
    Experiment e(a);
    e.GenData();
  }
  auto b = a;
  b.seed = 99;
  EXPECT_THROW(Experiment e(b), SpecMismatch);

  // A corpus copied in from another spec is caught on load.
  auto c = Tiny("foreign_target");
  c.seed = 7;
  {
    Experiment e(c);
    e.GenData();
  }
  fs::remove_all(fs::path(c.output_dir) / "data");
  fs::copy(fs::path(a.output_dir) / "data", fs::path(c.output_dir) / "data",
           fs::copy_options::recursive);
  Experiment e(c);
  EXPECT_THROW(e.corpus(), SpecMismatch);
}

TEST(PipelineTest, StagesRequirePredecessors) {
  Experiment e(Tiny("order"));
  EXPECT_THROW(e.Pretrain(), std::runtime_error);
  e.GenData();
  EXPECT_THROW(e.TrainBias(), std::runtime_error);
}

}  // namespace
}  // namespace dvcb
