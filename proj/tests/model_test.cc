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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "diffcore/adam.h"
#include "diffcore/grad_check.h"
#include "model/checkpoint.h"
#include "model/inference.h"
#include "model/model.h"
#include "vocab/static_vocab.h"

namespace dvcb {
namespace {

const StaticVocab& Vocab() {
  static const StaticVocab v = StaticVocab::CharacterLevel("abcdefghijklmnopqrstuvwxyz");
  return v;
}

ModelConfig Tiny() {
  ModelConfig c;
  c.d = 16;
  c.d_bias = 8;
  c.feature_dim = 6;
  c.vocab_size = static_cast<int>(Vocab().size());
  c.enc_layers = 1;
  c.dec_layers = 2;
  c.bias_layers = 1;
  c.heads = 2;
  c.ffn_mult = 2;
  c.max_len = 64;
  return c;
}

template <typename Real>
Tensor<Real> RandomMatrix(std::size_t r, std::size_t c, std::uint64_t seed,
                          double scale = 1.0) {
  Rng rng(seed);
  Tensor<Real> t(r, c);
  for (auto& v : t.vec()) v = static_cast<Real>(scale * rng.Normal());
  return t;
}

Model<float> BiasedModel(const ModelConfig& c, std::uint64_t seed = 1) {
  auto m = Model<float>::InitBackbone(c, seed);
  m.InitBiasing(seed + 1);
  return m;
}

DynamicVocab Dyn(std::vector<std::string> words) {
  return DynamicVocab::Build(words, Vocab());
}

std::vector<int> Ids(const std::string& text) { return Vocab().Tokenize(text); }

TEST(ModelTest, EncodeShapeAndPurity) {
  auto c = Tiny();
  c.d = 128;
  c.heads = 4;
  c.feature_dim = 32;
  auto m = Model<float>::InitBackbone(c, 3);
  const auto x = RandomMatrix<float>(7, 32, 1);
  const auto h1 = EncodeFeatures(m, x);
  const auto h2 = EncodeFeatures(m, x);
  EXPECT_EQ(h1.shape(), (std::vector<std::size_t>{7, 128}));
  EXPECT_EQ(h1.vec(), h2.vec());
  EXPECT_THROW(EncodeFeatures(m, Tensor<float>(0, 32)), std::invalid_argument);
}

TEST(ModelTest, EncodeGradientMatchesFiniteDifferences) {
  auto c = Tiny();
  c.d = 8;
  c.d_bias = 4;
  auto m = Model<float>::InitBackbone(c, 5).Cast<double>();
  Parameter<double> x{"x", RandomMatrix<double>(4, c.feature_dim, 2), {}, true};
  auto f = [&](Tape<double>& t) {
    auto ctx = m.Context(t);
    return Mean(m.Encode(ctx, t.Param(x)));
  };
  std::vector<Parameter<double>*> params{&x};
  for (auto* p : m.params().All()) params.push_back(p);
  const auto report = GradCheck(f, params);
  EXPECT_TRUE(report.passed) << report.max_rel_err;
  EXPECT_LT(report.max_rel_err, 1e-4);
}

TEST(ModelTest, BiasEncodeShapesAndEmptyList) {
  auto c = Tiny();
  auto m = BiasedModel(c);
  EXPECT_EQ(ComputeBiasCache(m, Dyn({})).v.rows(), 0u);
  c.d_bias = 256;
  auto big = BiasedModel(c);
  std::vector<std::string> words;
  Rng rng(4);
  while (words.size() < 100) {
    std::string w;
    for (int i = 0; i < 5; ++i) w += static_cast<char>('a' + rng.Below(26));
    if (std::find(words.begin(), words.end(), w) == words.end()) words.push_back(w);
  }
  const auto v = ComputeBiasCache(big, Dyn(words)).v;
  EXPECT_EQ(v.shape(), (std::vector<std::size_t>{100, 256}));
}

TEST(ModelTest, BiasEncodeRowsAreIndependent) {
  auto m = BiasedModel(Tiny());
  const auto a = ComputeBiasCache(m, Dyn({"alligator", "brahman", "cat"})).v;
  const auto perm = ComputeBiasCache(m, Dyn({"cat", "alligator", "brahman"})).v;
  const auto edit = ComputeBiasCache(m, Dyn({"alligator", "bramble", "cat"})).v;
  const std::size_t map[3] = {1, 2, 0};
  for (std::size_t r = 0; r < 3; ++r) {
    EXPECT_TRUE(std::ranges::equal(a.row(r), perm.row(map[r])));
  }
  EXPECT_TRUE(std::ranges::equal(a.row(0), edit.row(0)));
  EXPECT_FALSE(std::ranges::equal(a.row(1), edit.row(1)));
  EXPECT_TRUE(std::ranges::equal(a.row(2), edit.row(2)));
}

TEST(ModelTest, ExtendedEmbeddingRoutesIds) {
  auto c = Tiny();
  auto m = BiasedModel(c);
  const auto dyn = Dyn({"aa", "bb", "cc", "alligator"});
  const int k = c.vocab_size;
  Tape<float> t;
  auto ctx = m.Context(t);
  Var<float> v = m.BiasEncode(ctx, dyn);
  // Static ids read the static table unchanged.
  const std::vector<int> stat = Ids("an ate");
  Var<float> base = m.Embed(ctx, stat, nullptr);
  Var<float> ext = m.Embed(ctx, stat, &v);
  EXPECT_EQ(base.value().vec(), ext.value().vec());
  // Dynamic id K + 3 selects row 3 of V, projected by W_e.
  const std::vector<int> mixed{kSos, stat[0], k + 3, k + 0, kEos};
  Var<float> e = m.Embed(ctx, mixed, &v);
  EXPECT_EQ(e.value().shape(), (std::vector<std::size_t>{5, 16}));
  const auto& we = m.params().at("bias.W_e.w").value;
  for (std::size_t j = 0; j < 16; ++j) {
    double want = 0;
    for (std::size_t i = 0; i < 8; ++i) want += double(v.value().at(3, i)) * we.at(i, j);
    EXPECT_NEAR(e.value().at(2, j), want, 1e-5);
  }
  const std::vector<int> bad{kSos, k + 4};
  EXPECT_THROW(m.Embed(ctx, bad, &v), std::out_of_range);
}

TEST(ModelTest, DecoderIsCausal) {
  auto m = BiasedModel(Tiny());
  const auto x = RandomMatrix<float>(9, 6, 8);
  Tape<float> t;
  auto ctx = m.Context(t);
  Var<float> h = m.Encode(ctx, t.Ref(x));
  std::vector<int> prefix{kSos, 5, 9, 12};
  Var<float> s1 = m.DecoderStates(ctx, h, prefix, nullptr);
  Var<float> s1b = m.DecoderStates(ctx, h, prefix, nullptr);
  EXPECT_EQ(s1.value().vec(), s1b.value().vec());
  prefix.push_back(20);
  Var<float> s2 = m.DecoderStates(ctx, h, prefix, nullptr);
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t j = 0; j < 16; ++j) {
      EXPECT_NEAR(s1.value().at(r, j), s2.value().at(r, j), 1e-6);
    }
  }
}

TEST(ModelTest, DecoderGradientMatchesFiniteDifferences) {
  auto c = Tiny();
  c.d = 8;
  c.d_bias = 4;
  auto m = Model<double>::InitBackbone(c, 7);
  const auto x = RandomMatrix<double>(5, c.feature_dim, 9);
  const std::vector<int> labels = Ids("ab");
  auto f = [&](Tape<double>& t) {
    auto ctx = m.Context(t);
    return m.TeacherForcedLoss(ctx, m.Encode(ctx, t.Ref(x)), labels, nullptr,
                               0.1, 1.0);
  };
  const auto report = GradCheck(f, m.params().All());
  EXPECT_TRUE(report.passed) << report.max_rel_err;
}

TEST(ModelTest, OutputReducesToBackboneWithEmptyList) {
  auto c = Tiny();
  auto m = BiasedModel(c);
  for (int trial = 0; trial < 5; ++trial) {
    const auto x = RandomMatrix<float>(6 + trial, 6, 30 + trial);
    Tape<float> t;
    auto ctx = m.Context(t);
    Var<float> h = m.Encode(ctx, t.Ref(x));
    Var<float> v = m.BiasEncode(ctx, Dyn({}));
    const auto prev = Ids("hello there");
    auto base = m.OutputLogits(ctx, m.DecoderStates(ctx, h, prev, nullptr), nullptr);
    auto ext = m.OutputLogits(ctx, m.DecoderStates(ctx, h, prev, &v), &v);
    EXPECT_EQ(base.value().vec(), ext.value().vec());
  }
}

TEST(ModelTest, ExtendedDistributionHasKPlusN) {
  auto c = Tiny();
  c.vocab_size = 64;
  auto m = BiasedModel(c);
  Tape<float> t;
  auto ctx = m.Context(t);
  Var<float> v = t.Input(RandomMatrix<float>(10, 8, 3));
  Var<float> u = t.Input(RandomMatrix<float>(1, 16, 4));
  Var<float> z = SoftmaxRows(m.OutputLogits(ctx, u, &v));
  ASSERT_EQ(z.value().cols(), 74u);
  double sum = 0;
  for (float p : z.value().vec()) sum += p;
  EXPECT_NEAR(sum, 1.0, 1e-6);
}

TEST(ModelTest, DynamicScoresMatchHandComputation) {
  auto c = Tiny();
  c.d = 4;
  c.d_bias = 2;
  auto m = Model<double>::InitBackbone(c, 2);
  m.InitBiasing(3);
  const auto u = RandomMatrix<double>(1, 4, 5);
  const auto vv = RandomMatrix<double>(3, 2, 6);
  Tape<double> t;
  auto ctx = m.Context(t);
  Var<double> v = t.Ref(vv);
  auto logits = m.OutputLogits(ctx, t.Ref(u), &v).value();
  const auto& wq = m.params().at("bias.W_q.w").value;
  const auto& wk = m.params().at("bias.W_k.w").value;
  for (std::size_t n = 0; n < 3; ++n) {
    double dot = 0;
    for (std::size_t j = 0; j < 4; ++j) {
      double q = 0, k = 0;
      for (std::size_t i = 0; i < 4; ++i) q += u.at(0, i) * wq.at(i, j);
      for (std::size_t i = 0; i < 2; ++i) k += vv.at(n, i) * wk.at(i, j);
      dot += q * k;
    }
    EXPECT_NEAR(logits.at(0, static_cast<std::size_t>(c.vocab_size) + n), dot / 2.0, 1e-12);
  }
}

TEST(ModelTest, QueryKeyScalingIsBilinear) {
  auto c = Tiny();
  auto m = Model<double>::InitBackbone(c, 2);
  m.InitBiasing(3);
  const auto u = RandomMatrix<double>(3, 16, 5);
  const auto vv = RandomMatrix<double>(4, 8, 6);
  auto scores = [&]() {
    Tape<double> t;
    auto ctx = m.Context(t);
    Var<double> v = t.Ref(vv);
    return m.OutputLogits(ctx, t.Ref(u), &v).value();
  };
  const auto before = scores();
  const double s = 1.5;
  for (const char* n : {"bias.W_q.w", "bias.W_k.w"}) {
    for (auto& x : m.params().at(n).value.vec()) x *= s;
  }
  const auto after = scores();
  const auto k = static_cast<std::size_t>(c.vocab_size);
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t j = 0; j < k; ++j) EXPECT_EQ(before.at(r, j), after.at(r, j));
    for (std::size_t j = k; j < k + 4; ++j) {
      EXPECT_NEAR(after.at(r, j), s * s * before.at(r, j), 1e-12 * (1 + std::abs(after.at(r, j))));
    }
  }
}

TEST(ModelTest, GarbageWeLeavesStaticPassesUntouched) {
  auto m = BiasedModel(Tiny());
  const auto x = RandomMatrix<float>(8, 6, 12);
  const auto dyn = Dyn({"alligator", "brahman"});
  auto run = [&]() {
    Tape<float> t;
    auto ctx = m.Context(t);
    Var<float> h = m.Encode(ctx, t.Ref(x));
    Var<float> v = m.BiasEncode(ctx, dyn);
    return m.OutputLogits(ctx, m.DecoderStates(ctx, h, Ids("an ate"), &v), &v).value();
  };
  const auto before = run();
  for (auto& w : m.params().at("bias.W_e.w").value.vec()) w = 1e3f;
  EXPECT_EQ(before.vec(), run().vec());
}

TEST(ModelTest, TeacherForcedLossIsReproducibleAndOverfits) {
  auto c = Tiny();
  auto m = Model<float>::InitBackbone(c, 4);
  const auto x1 = RandomMatrix<float>(10, 6, 40);
  const auto x2 = RandomMatrix<float>(12, 6, 41);
  const std::vector<int> y1 = Ids("cab dog"), y2 = Ids("egg");
  const float norm = static_cast<float>(y1.size() + y2.size() + 2);
  auto loss = [&](bool update, AdamState<float>* adam) {
    m.params().ZeroGrads();
    float total = 0;
    for (int i = 0; i < 2; ++i) {
      Tape<float> t;
      auto ctx = m.Context(t);
      auto l = m.TeacherForcedLoss(ctx, m.Encode(ctx, t.Ref(i ? x2 : x1)),
                                   i ? y2 : y1, nullptr, 0.0f, norm);
      total += l.value()[0];
      if (update) {
        t.Backward(l);
        t.AccumulateParamGrads();
      }
    }
    if (update) AdamStep(m.params().Trainable(), *adam, 0.005f);
    return total;
  };
  EXPECT_EQ(loss(false, nullptr), loss(false, nullptr));
  AdamState<float> adam;
  float last = 0;
  for (int step = 0; step < 200; ++step) last = loss(true, &adam);
  EXPECT_LT(loss(false, nullptr), 0.05f) << "last training loss " << last;
}

TEST(ModelTest, IncrementalDecoderMatchesTeacherForcing) {
  auto c = Tiny();
  auto m = BiasedModel(c);
  const auto x = RandomMatrix<float>(11, 6, 14);
  const auto dyn = Dyn({"alligator", "cab"});
  const int k = c.vocab_size;
  const std::vector<int> prev{kSos, 5, k + 1, 9, k, 14};
  for (bool extended : {false, true}) {
    std::vector<int> p = prev;
    if (!extended) p = {kSos, 5, 6, 9, 10, 14};
    Tape<float> t;
    auto ctx = m.Context(t);
    Var<float> h = m.Encode(ctx, t.Ref(x));
    Var<float> v = m.BiasEncode(ctx, dyn);
    const Var<float>* vp = extended ? &v : nullptr;
    Var<float> logp = SoftmaxRows(m.OutputLogits(ctx, m.DecoderStates(ctx, h, p, vp, dyn.Widths()), vp));

    IncrementalDecoder<float> dec(m, extended);
    const auto cache = ComputeBiasCache(m, dyn);
    const auto mem = dec.Prepare(h.value());
    auto state = dec.Start();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const auto step = dec.Step(mem, extended ? &cache : nullptr, state, p[i]);
      ASSERT_EQ(step.size(), logp.value().cols());
      for (std::size_t j = 0; j < step.size(); ++j) {
        EXPECT_NEAR(std::exp(step[j]), logp.value().at(i, j), 1e-5);
      }
    }
  }
}

TEST(ModelTest, DynamicTokensSpanTheirSubwordPositions) {
  auto c = Tiny();
  auto m = BiasedModel(c);
  const int k = c.vocab_size;
  // Widths 3 and 1; the prefix reads <sos> a [w0] b [w1].
  const std::vector<int> widths{3, 1};
  const std::vector<int> prev{kSos, 5, k, 6, k + 1};
  const std::vector<std::size_t> want{0, 1, 4, 5, 6};
  EXPECT_EQ(m.PrefixPositions(prev, widths), want);
  EXPECT_THROW(m.PrefixPositions(prev, {}), std::exception);
  c.span_positions = false;
  auto flat = BiasedModel(c);
  const std::vector<std::size_t> seq{0, 1, 2, 3, 4};
  EXPECT_EQ(flat.PrefixPositions(prev, widths), seq);
}

TEST(ModelTest, PartitionTagsFollowRoles) {
  auto c = Tiny();
  auto m = BiasedModel(c);
  EXPECT_EQ(m.PartitionOf("enc.l0.self.q.w"), Partition::kFrozen);
  EXPECT_EQ(m.PartitionOf("dec.out.w"), Partition::kFrozen);
  EXPECT_EQ(m.PartitionOf("bias.W_e.w"), Partition::kTrainable);
  EXPECT_EQ(m.PartitionOf("bias.embed_static"), Partition::kTrainable);
  for (auto* p : m.params().All()) {
    EXPECT_EQ(p->trainable, m.PartitionOf(p->name) == Partition::kTrainable) << p->name;
  }
  c.freeze_static_layers = true;
  auto frozen = BiasedModel(c);
  EXPECT_EQ(frozen.PartitionOf("bias.out_static.w"), Partition::kFrozen);
  EXPECT_FALSE(frozen.params().at("bias.embed_static").trainable);
  m.SetStage(Stage::kPretrain);
  EXPECT_TRUE(m.params().at("dec.l0.cross.q.w").trainable);
  EXPECT_FALSE(m.params().at("bias.W_q.w").trainable);
}

TEST(ModelTest, BiasingModulesSmallerThanBackboneAtDefaults) {
  ModelConfig c;
  auto m = Model<float>::InitBackbone(c, 1);
  m.InitBiasing(2);
  const auto backbone = m.params().NumElements("enc.") + m.params().NumElements("dec.");
  const auto biasing = m.params().NumElements("bias.tok_embed") +
                       m.params().NumElements("bias.enc.") +
                       m.params().NumElements("bias.W_");
  EXPECT_LT(biasing, backbone);
}

TEST(ModelTest, RejectsInvalidConfig) {
  auto c = Tiny();
  c.heads = 3;
  EXPECT_THROW(Model<float>::InitBackbone(c, 1), std::invalid_argument);
  c = Tiny();
  c.bias_layers = 0;
  EXPECT_THROW(Model<float>::InitBackbone(c, 1), std::invalid_argument);
}

std::string Slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(CheckpointTest, RoundTripIsByteExact) {
  const auto dir = std::filesystem::temp_directory_path() / "dvcb_ckpt_test";
  std::filesystem::create_directories(dir);
  const auto a = (dir / "a.ckpt").string(), b = (dir / "b.ckpt").string();
  auto m = BiasedModel(Tiny());
  CheckpointInfo info{"abc123", {{"stage", "bias"}}};
  SaveCheckpoint(a, m, info);
  CheckpointInfo back_info;
  auto back = LoadCheckpoint(a, &back_info);
  EXPECT_EQ(back_info.spec_hash, "abc123");
  EXPECT_EQ(back_info.meta["stage"], "bias");
  ASSERT_EQ(back.params().size(), m.params().size());
  for (std::size_t i = 0; i < m.params().size(); ++i) {
    EXPECT_EQ(back.params()[i].name, m.params()[i].name);
    EXPECT_EQ(back.params()[i].value.vec(), m.params()[i].value.vec());
    EXPECT_EQ(back.params()[i].trainable, m.params()[i].trainable);
  }
  SaveCheckpoint(b, back, back_info);
  EXPECT_EQ(Slurp(a), Slurp(b));
  const auto manifest = nlohmann::json::parse(Slurp(a).substr(0, Slurp(a).find('\n')));
  EXPECT_EQ(manifest["tensors"][0]["partition"], "frozen");
  EXPECT_EQ(PartitionDigests(m, Partition::kFrozen), PartitionDigests(back, Partition::kFrozen));

  std::ofstream(dir / "bad.ckpt") << "{\"format_version\": 99}\n";
  EXPECT_THROW(LoadCheckpoint((dir / "bad.ckpt").string()), std::runtime_error);
  std::string truncated = Slurp(a);
  truncated.resize(truncated.size() - 4);
  std::ofstream(dir / "short.ckpt", std::ios::binary) << truncated;
  EXPECT_THROW(LoadCheckpoint((dir / "short.ckpt").string()), std::runtime_error);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace dvcb
