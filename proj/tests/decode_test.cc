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

#include <cmath>
#include <functional>
#include <limits>
#include <map>

#include <gtest/gtest.h>

#include "decode/beam_search.h"
#include "decode/runner.h"
#include "diffcore/rng.h"
#include "model/inference.h"
#include "oracles.h"

namespace dvcb {
namespace {

// Follows a fixed token plan with probability ~1.
class PlanScorer : public Scorer {
 public:
  PlanScorer(int vocab, int first_dyn, std::vector<int> plan)
      : vocab_(vocab), first_dyn_(first_dyn), plan_(std::move(plan)) {}
  int vocab_size() const override { return vocab_; }
  int first_dynamic() const override { return first_dyn_; }
  struct Pos : State {
    std::size_t n = 0;
  };
  std::unique_ptr<State> Initial() const override { return std::make_unique<Pos>(); }
  std::unique_ptr<State> Clone(const State& s) const override {
    return std::make_unique<Pos>(static_cast<const Pos&>(s));
  }
  std::vector<double> Step(State& s, int) const override {
    auto& p = static_cast<Pos&>(s);
    std::vector<double> lp(static_cast<std::size_t>(vocab_), std::log(1e-6));
    const int want = p.n < plan_.size() ? plan_[p.n] : kEos;
    lp[static_cast<std::size_t>(want)] = std::log(1.0 - 1e-6 * (vocab_ - 1));
    ++p.n;
    return lp;
  }

 private:
  int vocab_, first_dyn_;
  std::vector<int> plan_;
};

TEST(BeamSearchTest, FullWidthMatchesExhaustiveSearch) {
  Rng rng(2024);
  int agree = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int vocab = 3 + static_cast<int>(rng.Below(3));
    const int max_len = 2 + static_cast<int>(rng.Below(3));
    const double mu = rng.Uniform(-1.0, 2.0);
    ToyScorer s(vocab, vocab - 2, 1000 + static_cast<std::uint64_t>(trial));
    Best oracle;
    std::vector<int> prefix{0};
    Enumerate(s, mu, max_len, prefix, 0.0, oracle);
    int space = 1;
    for (int i = 0; i < max_len; ++i) space *= vocab;
    const auto r = BeamSearch(s, {space, mu, max_len, false});
    if (r.best().ids == oracle.ids && std::abs(r.best().adjusted - oracle.adjusted) < 1e-12) ++agree;
  }
  EXPECT_EQ(agree, 200);
}

TEST(BeamSearchTest, WidthOneEqualsGreedy) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    ToyScorer s(5, 3, seed);
    const auto beam = BeamSearch(s, {1, 0.4, 8, false});
    const auto greedy = GreedyDecode(s, 0.4, 8);
    EXPECT_EQ(beam.best().ids, greedy.best().ids);
    EXPECT_EQ(beam.best().adjusted, greedy.best().adjusted);
    EXPECT_EQ(beam.steps, greedy.steps);
  }
}

TEST(BeamSearchTest, AdjustedScoreAndStepLaws) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    ToyScorer s(5, 3, seed);
    const double mu = 0.3;
    const auto r = BeamSearch(s, {3, mu, 10, false});
    for (const auto& h : r.hyps) {
      int dyn = 0;
      for (std::size_t i = 1; i < h.ids.size(); ++i) dyn += h.ids[i] >= 3;
      EXPECT_NEAR(h.adjusted, h.logp + mu * dyn, 1e-12);
      if (h.finished) EXPECT_EQ(h.ids.back(), 1);
    }
    EXPECT_EQ(r.steps, static_cast<int>(r.best().ids.size()) - 1);
  }
}

TEST(BeamSearchTest, MuIrrelevantWithoutDynamicTokens) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    ToyScorer s(5, 5, seed);
    const auto ref = BeamSearch(s, {3, 0.0, 8, false});
    for (double mu : {0.1, 0.3, 0.5, 1.0}) {
      const auto r = BeamSearch(s, {3, mu, 8, false});
      ASSERT_EQ(r.hyps.size(), ref.hyps.size());
      for (std::size_t i = 0; i < r.hyps.size(); ++i) EXPECT_EQ(r.hyps[i].ids, ref.hyps[i].ids);
    }
  }
}

TEST(BeamSearchTest, WiderBeamNeverScoresWorse) {
  int violations = 0, compared = 0;
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    ToyScorer s(5, 3, seed);
    DecodeResult prev;
    for (int b = 1; b <= 5; ++b) {
      const auto r = BeamSearch(s, {b, 0.3, 40, false});
      if (b > 1 && !r.truncated && !prev.truncated) {
        ++compared;
        if (r.best().adjusted < prev.best().adjusted) ++violations;
      }
      prev = r;
    }
  }
  EXPECT_GT(compared, 1000);
  EXPECT_EQ(violations, 0);
}

TEST(BeamSearchTest, PlainBeamCanRegressWhenWidened) {
  // The reason for the monotone default: a concrete counterexample exists.
  bool found = false;
  for (std::uint64_t seed = 0; seed < 300 && !found; ++seed) {
    ToyScorer s(5, 3, seed);
    for (int b = 1; b < 5 && !found; ++b) {
      found = PlainBeamSearch(s, {b + 1, 0.3, 6, false, false}).best().adjusted <
              PlainBeamSearch(s, {b, 0.3, 6, false, false}).best().adjusted - 1e-12;
    }
  }
  EXPECT_TRUE(found);
}

TEST(BeamSearchTest, TruncationIsFlagged) {
  const int k = 10;
  PlanScorer s(k, k, {4, 5, 6, 7, 8, 9});
  const auto r = BeamSearch(s, {2, 0.0, 3, false});
  EXPECT_TRUE(r.truncated);
  EXPECT_FALSE(r.best().finished);
  const auto g = GreedyDecode(s, 0.0, 3);
  EXPECT_TRUE(g.truncated);
  EXPECT_THROW(BeamSearch(s, {0, 0.0, 3, false}), std::invalid_argument);
}

// Only <eos> and one other token are reachable; feeding any other token fails.
class NarrowScorer : public Scorer {
 public:
  int vocab_size() const override { return 6; }
  int first_dynamic() const override { return 6; }
  std::unique_ptr<State> Initial() const override { return std::make_unique<State>(); }
  std::unique_ptr<State> Clone(const State&) const override {
    return std::make_unique<State>();
  }
  std::vector<double> Step(State&, int token) const override {
    if (token != kSos && token != 4) throw std::logic_error("fed an unreachable token");
    std::vector<double> lp(6, -std::numeric_limits<double>::infinity());
    lp[4] = std::log(0.6);
    lp[kEos] = std::log(0.4);
    return lp;
  }
};

TEST(BeamSearchTest, UnreachableTokensAreNeverExpanded) {
  NarrowScorer s;
  const auto r = BeamSearch(s, {4, 0.0, 5, true});
  EXPECT_TRUE(r.best().finished);
  for (const auto& h : r.hyps) EXPECT_TRUE(std::isfinite(h.logp));
}

const StaticVocab& Vocab() {
  static const StaticVocab v = StaticVocab::CharacterLevel("abcdefghijklmnopqrstuvwxyz");
  return v;
}

TEST(GreedyTest, DynamicTokenSavesSteps) {
  const int k = static_cast<int>(Vocab().size());
  const auto dyn = DynamicVocab::Build({"alligator"}, Vocab());
  std::vector<int> stat = Vocab().Tokenize("alligator");
  ASSERT_EQ(stat.size(), 9u);
  PlanScorer static_plan(k + 1, k, stat);
  PlanScorer dynamic_plan(k + 1, k, {k});
  const auto a = GreedyDecode(static_plan, 0.3, 50);
  const auto b = GreedyDecode(dynamic_plan, 0.3, 50);
  EXPECT_EQ(ExpandHypothesis(a.best().ids, dyn, Vocab()), "alligator");
  EXPECT_EQ(ExpandHypothesis(b.best().ids, dyn, Vocab()), "alligator");
  EXPECT_EQ(a.steps, 10);  // 9 subwords + eos
  EXPECT_EQ(b.steps, 2);   // <alligator> + eos
  EXPECT_EQ(a.steps - b.steps, 8);
}

TEST(GreedyTest, HugeMuForcesDynamicToken) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ToyScorer s(6, 4, seed);
    const auto r = GreedyDecode(s, 1e9, 5);
    EXPECT_GE(r.best().ids[1], 4);
    EXPECT_EQ(GreedyDecode(s, 0.2, 5).best().ids, GreedyDecode(s, 0.2, 5).best().ids);
  }
}

TEST(ExpandTest, SubstitutesDynamicTokens) {
  const int k = static_cast<int>(Vocab().size());
  const auto dyn = DynamicVocab::Build({"alligator"}, Vocab());
  const int an = Vocab().Find(std::string(kBoundary) + "a");
  const int n = Vocab().Find("n");
  EXPECT_EQ(ExpandHypothesis({kSos, an, n, k, kEos}, dyn, Vocab()), "an alligator");
  EXPECT_EQ(ExpandHypothesis(Vocab().Tokenize("plain words"),
                             DynamicVocab::Build({}, Vocab()), Vocab()),
            "plain words");
  EXPECT_THROW(ExpandHypothesis({kSos, k + 1}, dyn, Vocab()), std::out_of_range);
}

TEST(ExpandTest, RoundTripOverRandomLines) {
  Rng rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::string> words;
    const int n = 1 + static_cast<int>(rng.Below(8));
    for (int i = 0; i < n; ++i) {
      std::string w;
      const int len = 1 + static_cast<int>(rng.Below(6));
      for (int j = 0; j < len; ++j) w += static_cast<char>('a' + rng.Below(4));
      words.push_back(w);
    }
    std::string text;
    for (const auto& w : words) text += (text.empty() ? "" : " ") + w;
    std::vector<std::string> list{words[rng.Below(words.size())], "zzz"};
    const auto dyn = DynamicVocab::Build(list, Vocab());
    const auto ids = Vocab().Tokenize(text);
    EXPECT_EQ(ExpandHypothesis(dyn.RewriteLabels(ids), dyn, Vocab()), Vocab().Detokenize(ids));
  }
}

ModelConfig TinyModel() {
  ModelConfig c;
  c.d = 16;
  c.d_bias = 8;
  c.feature_dim = 6;
  c.vocab_size = static_cast<int>(Vocab().size());
  c.enc_layers = 1;
  c.dec_layers = 1;
  c.bias_layers = 1;
  c.heads = 2;
  c.ffn_mult = 2;
  c.max_len = 64;
  return c;
}

TEST(ModelDecodeTest, EmptyListMatchesBackboneAndWidthOneIsGreedy) {
  auto m = Model<float>::InitBackbone(TinyModel(), 3);
  m.InitBiasing(4);
  Rng rng(5);
  Tensor<float> x(12, 6);
  for (auto& v : x.vec()) v = static_cast<float>(rng.Normal());
  const auto h = EncodeFeatures(m, x);
  IncrementalDecoder<float> base(m, false), ext(m, true);
  const auto empty = ComputeBiasCache(m, DynamicVocab());
  const auto mb = base.Prepare(h), me = ext.Prepare(h);
  ModelScorer sb(base, mb, nullptr), se(ext, me, &empty);
  const auto rb = BeamSearch(sb, {3, 0.0, 20, false});
  const auto re = BeamSearch(se, {3, 0.0, 20, false});
  ASSERT_EQ(rb.hyps.size(), re.hyps.size());
  for (std::size_t i = 0; i < rb.hyps.size(); ++i) {
    EXPECT_EQ(rb.hyps[i].ids, re.hyps[i].ids);
    EXPECT_EQ(rb.hyps[i].logp, re.hyps[i].logp);
  }
  const auto dyn = DynamicVocab::Build({"cab", "dog"}, Vocab());
  const auto cache = ComputeBiasCache(m, dyn);
  ModelScorer sd(ext, me, &cache);
  EXPECT_EQ(sd.vocab_size(), TinyModel().vocab_size + 2);
  EXPECT_EQ(BeamSearch(sd, {1, 0.3, 20, false}).best().ids,
            GreedyDecode(sd, 0.3, 20).best().ids);
  const auto d = DecodeUtterance("u1", ext, h, &cache, dyn, Vocab(), {3, 0.3, 20, false});
  EXPECT_EQ(d.steps, static_cast<int>(d.ids.size()) - 1);
  const auto j = ToJson(d);
  for (const char* key : {"id", "text", "ids", "logp", "adjusted", "steps", "wall_ms"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
}

}  // namespace
}  // namespace dvcb
