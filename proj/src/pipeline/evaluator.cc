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


#include "pipeline/evaluator.h"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace dvcb {

namespace {

std::vector<std::string> Words(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

nlohmann::json RateJson(double r) {
  return std::isnan(r) ? nlohmann::json(nullptr) : nlohmann::json(r);
}

}  // namespace

std::string Condition::Label() const {
  std::ostringstream s;
  s << split << '/' << model << "/n" << n;
  if (model == kBiased) s << "/mu" << mu;
  s << "/beam" << beam;
  return s.str();
}

nlohmann::json ConditionReport::ToJson(bool timing) const {
  const auto& c = condition;
  nlohmann::json j = {
      {"label", c.Label()},
      {"split", c.split},
      {"model", c.model},
      {"n", c.n},
      {"mu", c.model == kBiased ? nlohmann::json(c.mu) : nlohmann::json(nullptr)},
      {"beam", c.beam},
      {"utterances", utterances},
      {"wer", wer},
      {"b_wer", RateJson(b_wer)},
      {"u_wer", RateJson(u_wer)},
      {"counts",
       {{"ref_words", total.ref_words},
        {"biasing_ref_words", split.biased.ref_words},
        {"sub", total.sub},
        {"del", total.del},
        {"ins", total.ins},
        {"biased_errors", split.biased.errors()},
        {"unbiased_errors", split.unbiased.errors()}}},
      {"steps_total", steps_total},
      {"forwards_total", forwards_total},
      {"dynamic_tokens", dynamic_tokens},
      {"truncated", truncated},
      {"audio_s", audio_s}};
  if (timing) {
    j["decode_s"] = decode_s;
    j["rtf"] = rtf;
  }
  return j;
}

Evaluator::Evaluator(const Corpus& corpus, const StaticVocab& vocab,
                     Model<float>& backbone, Model<float>* biased,
                     const ExperimentSpec& spec)
    : corpus_(corpus),
      vocab_(vocab),
      backbone_(backbone),
      biased_(biased),
      spec_(spec),
      pretrain_counts_(corpus.PretrainCounts()) {}

bool Evaluator::IsTarget(const std::string& word) const {
  return corpus_.IsTarget(word, pretrain_counts_);
}

const std::vector<const Utterance*>& Evaluator::Utterances(const std::string& split) {
  auto it = utts_.find(split);
  if (it != utts_.end()) return it->second;
  std::vector<const Utterance*> out;
  for (const auto& u : corpus_.split(split).utterances) {
    if (spec_.eval.max_utterances > 0 &&
        out.size() >= static_cast<std::size_t>(spec_.eval.max_utterances)) {
      break;
    }
    out.push_back(&u);
  }
  return utts_.emplace(split, std::move(out)).first->second;
}

const std::vector<Tensor<float>>& Evaluator::Encoded(const std::string& split) {
  auto it = encoded_.find(split);
  if (it != encoded_.end()) return it->second;
  std::vector<Tensor<float>> out;
  for (const auto* u : Utterances(split)) out.push_back(EncodeFeatures(backbone_, u->features));
  return encoded_.emplace(split, std::move(out)).first->second;
}

const std::vector<std::string>& Evaluator::List(const std::string& split,
                                                std::size_t i, int n) {
  const auto key = std::make_tuple(split, i, n);
  auto it = lists_.find(key);
  if (it != lists_.end()) return it->second;
  std::vector<std::string> list;
  if (n > 0) {
    const auto seed = Rng(spec_.seed).Stream("eval_list").Stream(split).Stream("utt", i).seed();
    list = BuildEvalBiasingList({Utterances(split).at(i)}, n, corpus_.lexicon,
                                [this](const std::string& w) { return IsTarget(w); }, seed);
  }
  return lists_.emplace(key, std::move(list)).first->second;
}

const Evaluator::Timed& Evaluator::Run(const Condition& c) {
  const bool biased = c.model == kBiased;
  if (!biased && c.model != kBaseline) throw std::invalid_argument("unknown model " + c.model);
  if (biased && biased_ == nullptr) throw std::invalid_argument("no biased model loaded");
  const DecodeKey key{c.split, c.model, biased ? c.n : 0, biased ? c.mu : 0.0, c.beam};
  auto it = runs_.find(key);
  if (it != runs_.end()) return it->second;

  const auto& utts = Utterances(c.split);
  const auto& encoded = Encoded(c.split);
  IncrementalDecoder<float> decoder(biased ? *biased_ : backbone_, biased);
  BeamConfig beam = GridBeam(spec_.eval, biased ? c.mu : 0.0);
  beam.beam = c.beam;

  std::vector<DynamicVocab> dyns;
  std::vector<BiasCache<float>> caches;
  for (std::size_t i = 0; i < utts.size(); ++i) {
    dyns.push_back(DynamicVocab::Build(biased ? List(c.split, i, c.n) : std::vector<std::string>{},
                                       vocab_));
    if (biased) caches.push_back(ComputeBiasCache(*biased_, dyns.back()));
  }

  Timed t;
  for (int run = 0; run < spec_.eval.timing_runs; ++run) {
    double seconds = 0;
    for (std::size_t i = 0; i < utts.size(); ++i) {
      auto d = DecodeUtterance(utts[i]->id, decoder, encoded[i],
                               biased ? &caches[i] : nullptr, dyns[i], vocab_, beam);
      seconds += d.wall_ms / 1000.0;
      if (run == 0) {
        t.decodes.push_back(std::move(d));
      } else if (d.ids != t.decodes[i].ids) {
        throw std::runtime_error("nondeterministic decode of " + utts[i]->id);
      }
    }
    t.seconds.push_back(seconds);
  }
  return runs_.emplace(key, std::move(t)).first->second;
}

const std::vector<UtteranceDecode>& Evaluator::Decodes(const Condition& c) {
  return Run(c).decodes;
}

ConditionReport Evaluator::Evaluate(const Condition& c) {
  const Timed& t = Run(c);
  const auto& utts = Utterances(c.split);
  ConditionReport r;
  r.condition = c;
  r.utterances = static_cast<long>(utts.size());
  for (std::size_t i = 0; i < utts.size(); ++i) {
    const auto& d = t.decodes[i];
    const auto& list = List(c.split, i, c.n);
    const Alignment a = Align(utts[i]->words, Words(d.text));
    r.total += Count(a);
    const BiasedSplit s =
        SplitByList(a, std::unordered_set<std::string>(list.begin(), list.end()));
    r.split.biased += s.biased;
    r.split.unbiased += s.unbiased;
    r.steps_total += d.steps;
    r.forwards_total += d.forwards;
    r.truncated += d.truncated ? 1 : 0;
    for (int id : d.ids) r.dynamic_tokens += id >= vocab_.size() ? 1 : 0;
    r.audio_s += utts[i]->duration_s;
  }
  r.wer = Rate(r.total);
  r.b_wer = Rate(r.split.biased);
  r.u_wer = Rate(r.split.unbiased);
  r.decode_s = t.seconds;
  r.rtf = RealTimeFactor(Median(t.seconds), r.audio_s);
  return r;
}

nlohmann::json Evaluator::IterationComparison(const std::string& split, int n,
                                              double mu) {
  const Condition biased{split, kBiased, n, mu, spec_.eval.beam};
  const Condition base{split, kBaseline, n, 0.0, spec_.eval.beam};
  const auto& bd = Decodes(biased);
  const auto& sd = Decodes(base);
  const int k = vocab_.size();
  long utterances = 0, steps_biased = 0, steps_baseline = 0, fewer = 0;
  for (std::size_t i = 0; i < bd.size(); ++i) {
    const auto& list = List(split, i, n);
    bool hit = false;
    for (int id : bd[i].ids) {
      if (id >= k && vocab_.Tokenize(list.at(static_cast<std::size_t>(id - k))).size() >= 2) {
        hit = true;
      }
    }
    if (!hit) continue;
    ++utterances;
    steps_biased += bd[i].steps;
    steps_baseline += sd[i].steps;
    fewer += bd[i].steps < sd[i].steps ? 1 : 0;
  }
  const double reduction =
      steps_baseline > 0
          ? 100.0 * static_cast<double>(steps_baseline - steps_biased) / static_cast<double>(steps_baseline)
          : std::nan("");
  return {{"split", split},
          {"n", n},
          {"mu", mu},
          {"utterances", utterances},
          {"utterances_with_fewer_steps", fewer},
          {"steps_biased", steps_biased},
          {"steps_baseline", steps_baseline},
          {"reduction_pct", RateJson(reduction)},
          {"reference_reduction_pct", 14.5}};
}

nlohmann::json Evaluator::ReferenceStepComparison(const std::string& split, int n) {
  const auto& utts = Utterances(split);
  long with_targets = 0, static_steps = 0, dynamic_steps = 0;
  for (std::size_t i = 0; i < utts.size(); ++i) {
    const auto& list = List(split, i, n);
    const auto dyn = DynamicVocab::Build(list, vocab_);
    const auto ids = vocab_.Tokenize(utts[i]->Text());
    const auto rewritten = dyn.RewriteLabels(ids);
    if (rewritten.size() == ids.size()) continue;
    ++with_targets;
    static_steps += static_cast<long>(ids.size()) + 1;
    dynamic_steps += static_cast<long>(rewritten.size()) + 1;
  }
  return {{"split", split},
          {"n", n},
          {"utterances", with_targets},
          {"static_steps", static_steps},
          {"dynamic_steps", dynamic_steps}};
}

}  // namespace dvcb
