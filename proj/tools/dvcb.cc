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


#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "pipeline/pipeline.h"

namespace {

using dvcb::Experiment;
using dvcb::ExperimentSpec;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  int threads = 0;
};

void AddCommon(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "Experiment spec (JSON); defaults apply to missing fields");
  cmd->add_option("--seed", c.seed, "Override the spec seed");
  cmd->add_option("--out", c.out, "Override the output directory");
  cmd->add_option("--threads", c.threads, "Worker threads for training")->check(CLI::PositiveNumber);
}

ExperimentSpec MakeSpec(const Common& c) {
  ExperimentSpec spec = c.config.empty() ? dvcb::DefaultSpec() : dvcb::LoadSpec(c.config);
  if (c.seed) spec.seed = *c.seed;
  if (!c.out.empty()) spec.output_dir = c.out;
  if (c.threads > 0) {
    spec.pretrain.threads = c.threads;
    spec.bias.threads = c.threads;
  }
  return spec;
}

Experiment Open(const Common& c) {
  return Experiment(MakeSpec(c), [](const std::string& m) { std::cerr << "[dvcb] " << m << std::endl; });
}

void Require(const Experiment& e, const char* stage) {
  if (!e.Done(stage)) {
    throw std::runtime_error(std::string("stage ") + stage + " has not completed in " +
                             e.spec().output_dir);
  }
}

std::string ReadFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void PrintError(const std::string& command, const std::string& type, const std::string& message) {
  std::cerr << nlohmann::json{{"error", message}, {"type", type}, {"command", command}}.dump()
            << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic-vocabulary contextual biasing experiments"};
  app.require_subcommand(1);

  Common common;
  std::string split = dvcb::kSplitTestUnseen;
  std::string model = dvcb::kBiased;
  int n = 20;
  std::optional<double> mu;
  std::optional<int> beam;
  std::string output;
  std::string list_file;
  std::optional<int> runs;

  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic corpus");
  auto* pre = app.add_subcommand("pretrain", "Train the backbone on the pretrain split");
  auto* bias = app.add_subcommand("train-bias", "Train the biasing parameters with the backbone frozen");
  auto* dec = app.add_subcommand("decode", "Decode a split under one condition (JSONL)");
  auto* eval = app.add_subcommand("eval", "Decode and score the evaluation grid");
  auto* bench = app.add_subcommand("bench", "Time baseline and biased decoding of one condition");
  auto* run = app.add_subcommand("run", "Run every stage that has not completed");
  for (auto* cmd : {gen, pre, bias, dec, eval, bench, run}) AddCommon(cmd, common);
  for (auto* cmd : {dec, bench}) {
    cmd->add_option("--split", split, "Evaluation split")
        ->check(CLI::IsMember({dvcb::kSplitTestSeen, dvcb::kSplitTestUnseen}));
    cmd->add_option("--n", n, "Biasing list size")->check(CLI::NonNegativeNumber);
    cmd->add_option("--mu", mu, "Biasing weight (default from the spec)");
    cmd->add_option("--beam", beam, "Beam width (default from the spec)")->check(CLI::PositiveNumber);
  }
  dec->add_option("--model", model, "Model to decode with")
      ->check(CLI::IsMember({dvcb::kBaseline, dvcb::kBiased}));
  dec->add_option("--output", output, "Output file (default stdout)");
  dec->add_option("--list", list_file,
                  "One word per line; replaces the generated per-utterance lists");
  bench->add_option("--runs", runs, "Timing runs (default from the spec)")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    PrintError(app.get_subcommands().empty() ? "" : app.get_subcommands().front()->get_name(),
               "usage", e.what());
    return 2;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    Experiment exp = Open(common);
    if (name == "gen-data") {
      exp.GenData();
      std::cout << exp.spec().output_dir << "\n";
    } else if (name == "pretrain") {
      Require(exp, dvcb::kStageGenData);
      exp.Pretrain();
      std::cout << exp.Path("backbone.ckpt") << "\n";
    } else if (name == "train-bias") {
      Require(exp, dvcb::kStagePretrain);
      exp.TrainBias();
      std::cout << exp.Path("biased.ckpt") << "\n";
    } else if (name == "eval") {
      Require(exp, dvcb::kStagePretrain);
      exp.Eval();
      std::cout << ReadFile(exp.Path("report.txt"));
    } else if (name == "run") {
      exp.Run();
      std::cout << ReadFile(exp.Path("report.txt"));
    } else if (name == "decode") {
      Require(exp, dvcb::kStagePretrain);
      if (model == dvcb::kBiased) Require(exp, dvcb::kStageTrainBias);
      const bool biased = model == dvcb::kBiased;
      const auto& grid = exp.spec().eval;
      dvcb::BeamConfig config = dvcb::GridBeam(grid, biased ? mu.value_or(grid.mu) : 0.0);
      if (beam) config.beam = *beam;
      std::vector<std::string> custom;
      if (!list_file.empty()) {
        std::ifstream in(list_file);
        if (!in) throw std::runtime_error("cannot read " + list_file);
        for (std::string w; in >> w;) custom.push_back(w);
      }
      auto& ev = exp.evaluator();
      dvcb::Model<float>& m = biased ? exp.biased() : exp.backbone();
      dvcb::IncrementalDecoder<float> decoder(m, biased);
      std::ofstream file;
      if (!output.empty()) {
        file.open(output);
        if (!file) throw std::runtime_error("cannot write " + output);
      }
      std::ostream& out = output.empty() ? std::cout : file;
      const auto& utts = ev.Utterances(split);
      for (std::size_t i = 0; i < utts.size(); ++i) {
        const auto& list = list_file.empty() ? ev.List(split, i, n) : custom;
        const auto dyn = dvcb::DynamicVocab::Build(biased ? list : std::vector<std::string>{},
                                                   exp.vocab());
        dvcb::BiasCache<float> cache;
        if (biased) cache = dvcb::ComputeBiasCache(m, dyn);
        const auto h = dvcb::EncodeFeatures(m, utts[i]->features);
        auto d = dvcb::DecodeUtterance(utts[i]->id, decoder, h, biased ? &cache : nullptr, dyn,
                                       exp.vocab(), config);
        auto j = dvcb::ToJson(d);
        j["reference"] = utts[i]->Text();
        j["biasing_list"] = list;
        j["spec_hash"] = exp.hash();
        out << j.dump() << "\n";
      }
    } else if (name == "bench") {
      Require(exp, dvcb::kStagePretrain);
      Require(exp, dvcb::kStageTrainBias);
      ExperimentSpec spec = exp.spec();
      if (runs) spec.eval.timing_runs = *runs;
      dvcb::Evaluator ev(exp.corpus(), exp.vocab(), exp.backbone(), &exp.biased(), spec);
      const int width = beam.value_or(spec.eval.beam);
      const double weight = mu.value_or(spec.eval.mu);
      const auto base = ev.Evaluate({split, dvcb::kBaseline, n, 0.0, width});
      const auto bias_r = ev.Evaluate({split, dvcb::kBiased, n, weight, width});
      const nlohmann::json record = {
          {"spec_hash", exp.hash()},
          {"baseline", base.ToJson(true)},
          {"biased", bias_r.ToJson(true)},
          {"rtf_reduction_pct", 100 * (base.rtf - bias_r.rtf) / base.rtf},
          {"steps_reduction_pct",
           100.0 * static_cast<double>(base.steps_total - bias_r.steps_total) /
               static_cast<double>(base.steps_total)}};
      std::ofstream(exp.Path("bench.json")) << record.dump(2) << "\n";
      std::cout << record.dump(2) << "\n";
    }
  } catch (const dvcb::SpecMismatch& e) {
    PrintError(name, "spec_mismatch", e.what());
    return 1;
  } catch (const std::invalid_argument& e) {
    PrintError(name, "invalid_argument", e.what());
    return 1;
  } catch (const std::exception& e) {
    PrintError(name, "runtime_error", e.what());
    return 1;
  }
  return 0;
}
