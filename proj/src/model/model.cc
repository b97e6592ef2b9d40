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

#include "model/model.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "diffcore/kernels.h"
#include "vocab/static_vocab.h"

namespace dvcb {

namespace {

bool StartsWith(const std::string& s, const char* prefix) {
  return s.rfind(prefix, 0) == 0;
}

template <typename Real>
Tensor<Real> PositionTable(std::size_t rows, std::size_t dim) {
  return Tensor<Real>::Matrix(rows, dim, SinusoidalPositions<Real>(rows, dim));
}

}  // namespace

const char* PartitionName(Partition p) {
  return p == Partition::kFrozen ? "frozen" : "trainable";
}

void Validate(const ModelConfig& c) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("model config: ") + what);
  };
  require(c.d >= 1 && c.d_bias >= 1, "hidden sizes must be positive");
  require(c.heads >= 1, "heads must be >= 1");
  require(c.d % c.heads == 0, "d must be divisible by heads");
  require(c.d_bias % c.heads == 0, "d_bias must be divisible by heads");
  require(c.enc_layers >= 1 && c.dec_layers >= 1 && c.bias_layers >= 1,
          "layer counts must be >= 1");
  require(c.feature_dim >= 1, "feature_dim must be positive");
  require(c.vocab_size > kNumSpecials, "vocab_size must exceed the specials");
  require(c.ffn_mult >= 1, "ffn_mult must be >= 1");
  require(c.max_len >= 2, "max_len must be >= 2");
  require(c.dropout >= 0 && c.dropout < 1, "dropout must be in [0, 1)");
}

template <typename Real>
Model<Real>::Model(ModelConfig config) : config_(config) {
  Validate(config_);
  const auto len = static_cast<std::size_t>(config_.max_len);
  positions_ = PositionTable<Real>(len, static_cast<std::size_t>(config_.d));
  bias_positions_ =
      PositionTable<Real>(len, static_cast<std::size_t>(config_.d_bias));
}

template <typename Real>
Model<Real> Model<Real>::InitBackbone(const ModelConfig& config,
                                      std::uint64_t seed) {
  Model m(config);
  const Rng rng = Rng(seed).Stream("init");
  const auto d = static_cast<std::size_t>(config.d);
  const auto ffn = d * static_cast<std::size_t>(config.ffn_mult);
  const auto k = static_cast<std::size_t>(config.vocab_size);
  auto& p = m.params_;
  InitLinear(p, "enc.in", static_cast<std::size_t>(config.feature_dim), d,
             true, rng);
  for (int l = 0; l < config.enc_layers; ++l) {
    InitEncoderLayer(p, "enc.l" + std::to_string(l), d, ffn, rng);
  }
  InitNorm(p, "enc.ln_f", d);
  InitNormal(p, "dec.embed", k, d, 1.0, rng);
  for (int l = 0; l < config.dec_layers; ++l) {
    InitDecoderLayer(p, "dec.l" + std::to_string(l), d, ffn, rng);
  }
  InitNorm(p, "dec.ln_f", d);
  InitLinear(p, "dec.out", d, k, true, rng);
  m.SetStage(Stage::kPretrain);
  return m;
}

template <typename Real>
void Model<Real>::InitBiasing(std::uint64_t seed) {
  if (has_biasing()) throw std::logic_error("biasing parameters already exist");
  const Rng rng = Rng(seed).Stream("init").Stream("bias");
  const auto d = static_cast<std::size_t>(config_.d);
  const auto db = static_cast<std::size_t>(config_.d_bias);
  const auto k = static_cast<std::size_t>(config_.vocab_size);
  auto& p = params_;
  p.Add("bias.embed_static", {k, d}).value = p.at("dec.embed").value;
  p.Add("bias.out_static.w", {d, k}).value = p.at("dec.out.w").value;
  p.Add("bias.out_static.b", {k}).value = p.at("dec.out.b").value;
  InitNormal(p, "bias.tok_embed", k, db, 1.0 / std::sqrt(static_cast<double>(db)),
             rng);
  for (int l = 0; l < config_.bias_layers; ++l) {
    InitEncoderLayer(p, "bias.enc.l" + std::to_string(l), db,
                     db * static_cast<std::size_t>(config_.ffn_mult), rng);
  }
  InitNorm(p, "bias.enc.ln_f", db);
  InitLinear(p, "bias.W_e", db, d, false, rng);
  InitLinear(p, "bias.W_q", d, d, false, rng);
  InitLinear(p, "bias.W_k", db, d, false, rng);
  SetStage(Stage::kBias);
}

template <typename Real>
Partition Model<Real>::PartitionOf(const std::string& name) const {
  if (StartsWith(name, "enc.") || StartsWith(name, "dec.")) {
    return Partition::kFrozen;
  }
  if (StartsWith(name, "bias.embed_static") ||
      StartsWith(name, "bias.out_static")) {
    return config_.freeze_static_layers ? Partition::kFrozen
                                        : Partition::kTrainable;
  }
  return Partition::kTrainable;
}

template <typename Real>
void Model<Real>::SetStage(Stage stage) {
  for (auto* p : params_.All()) {
    if (stage == Stage::kPretrain) {
      p->trainable = !StartsWith(p->name, "bias.");
    } else {
      p->trainable = PartitionOf(p->name) == Partition::kTrainable;
    }
  }
}

template <typename Real>
Ctx<Real> Model<Real>::Context(Tape<Real>& tape, Rng* dropout_rng) {
  return Ctx<Real>{&tape, &params_, static_cast<Real>(config_.dropout),
                   dropout_rng};
}

template <typename Real>
Var<Real> Model<Real>::AddPositions(const Ctx<Real>& c, Var<Real> x,
                                    const Tensor<Real>& table) const {
  const std::size_t n = x.rows(), dim = x.cols();
  if (n > table.rows()) {
    throw std::invalid_argument("sequence of length " + std::to_string(n) +
                                " exceeds max_len " +
                                std::to_string(table.rows()));
  }
  std::vector<Real> slice(table.data(), table.data() + n * dim);
  return Add(x, c.tape->Constant(Tensor<Real>::Matrix(n, dim, std::move(slice))));
}

template <typename Real>
Var<Real> Model<Real>::Encode(const Ctx<Real>& c, Var<Real> x) {
  if (x.rows() == 0) throw std::invalid_argument("encode: empty feature sequence");
  if (x.cols() != static_cast<std::size_t>(config_.feature_dim)) {
    throw std::invalid_argument("encode: expected " +
                                std::to_string(config_.feature_dim) +
                                " feature columns, got " +
                                std::to_string(x.cols()));
  }
  Var<Real> h = AddPositions(c, Linear(c, "enc.in", x), positions_);
  const auto heads = static_cast<std::size_t>(config_.heads);
  for (int l = 0; l < config_.enc_layers; ++l) {
    h = EncoderLayer(c, "enc.l" + std::to_string(l), h, heads);
  }
  return Norm(c, "enc.ln_f", h);
}

template <typename Real>
Var<Real> Model<Real>::BiasEncode(const Ctx<Real>& c, const DynamicVocab& dyn) {
  if (!has_biasing()) throw std::logic_error("model has no biasing parameters");
  const auto db = static_cast<std::size_t>(config_.d_bias);
  if (dyn.size() == 0) return c.tape->Constant(Tensor<Real>(0, db));
  const auto heads = static_cast<std::size_t>(config_.heads);
  Var<Real> table = c.P("bias.tok_embed");
  std::vector<Var<Real>> rows;
  for (const auto& word : dyn.words()) {
    Var<Real> x = Gather(table, std::span<const int>(word.subword_ids));
    if (config_.bias_positions) x = AddPositions(c, x, bias_positions_);
    for (int l = 0; l < config_.bias_layers; ++l) {
      x = EncoderLayer(c, "bias.enc.l" + std::to_string(l), x, heads);
    }
    rows.push_back(MeanRows(Norm(c, "bias.enc.ln_f", x)));
  }
  return ConcatRows(rows);
}

template <typename Real>
Var<Real> Model<Real>::Embed(const Ctx<Real>& c, std::span<const int> prev,
                             const Var<Real>* v) {
  if (prev.empty()) throw std::invalid_argument("decoder: empty prefix");
  Var<Real> table;
  int limit = config_.vocab_size;
  if (v != nullptr) {
    if (!has_biasing()) throw std::logic_error("model has no biasing parameters");
    table = c.P("bias.embed_static");
    if (v->rows() > 0) {
      // Only dynamic rows pass through W_e; static rows stay untouched.
      table = ConcatRows<Real>({table, Linear(c, "bias.W_e", *v, false)});
      limit += static_cast<int>(v->rows());
    }
  } else {
    table = c.P("dec.embed");
  }
  for (int id : prev) {
    if (id < 0 || id >= limit) {
      throw std::out_of_range("decoder: token id " + std::to_string(id) +
                              " outside [0, " + std::to_string(limit) + ")");
    }
  }
  return Gather(table, prev);
}

template <typename Real>
std::vector<std::size_t> Model<Real>::PrefixPositions(
    std::span<const int> prev, std::span<const int> widths) const {
  std::vector<std::size_t> out;
  out.reserve(prev.size());
  std::size_t end = 0;
  for (int id : prev) {
    std::size_t w = 1;
    if (id >= config_.vocab_size && config_.span_positions) {
      const auto n = static_cast<std::size_t>(id - config_.vocab_size);
      if (n >= widths.size()) {
        throw std::invalid_argument("decoder: no width for dynamic id " + std::to_string(id));
      }
      w = static_cast<std::size_t>(widths[n]);
    }
    end += w;
    out.push_back(end - 1);
  }
  if (!out.empty() && out.back() >= positions_.rows()) {
    throw std::invalid_argument("decoder position " + std::to_string(out.back()) +
                                " exceeds max_len " + std::to_string(positions_.rows()));
  }
  return out;
}

template <typename Real>
Var<Real> Model<Real>::DecoderStates(const Ctx<Real>& c, Var<Real> memory,
                                     std::span<const int> prev,
                                     const Var<Real>* v,
                                     std::span<const int> widths) {
  const auto pos = PrefixPositions(prev, widths);
  const auto d = static_cast<std::size_t>(config_.d);
  Tensor<Real> table(pos.size(), d);
  for (std::size_t i = 0; i < pos.size(); ++i) {
    std::copy_n(positions_.data() + pos[i] * d, d, table.data() + i * d);
  }
  Var<Real> x = Add(Embed(c, prev, v), c.tape->Constant(std::move(table)));
  const auto heads = static_cast<std::size_t>(config_.heads);
  for (int l = 0; l < config_.dec_layers; ++l) {
    x = DecoderLayer(c, "dec.l" + std::to_string(l), x, memory, heads);
  }
  return Norm(c, "dec.ln_f", x);
}

template <typename Real>
Var<Real> Model<Real>::OutputLogits(const Ctx<Real>& c, Var<Real> states,
                                    const Var<Real>* v) {
  if (v == nullptr) return Linear(c, "dec.out", states);
  Var<Real> stat = Linear(c, "bias.out_static", states);
  if (v->rows() == 0) return stat;
  Var<Real> q = Linear(c, "bias.W_q", states, false);
  Var<Real> k = Linear(c, "bias.W_k", *v, false);
  Var<Real> dyn = Scale(MatMul(q, k, /*trans_b=*/true),
                        Real(1) / std::sqrt(static_cast<Real>(config_.d)));
  return ConcatCols(stat, dyn);
}

template <typename Real>
Var<Real> Model<Real>::TeacherForcedLoss(const Ctx<Real>& c, Var<Real> memory,
                                         std::span<const int> labels,
                                         const Var<Real>* v, Real smoothing,
                                         Real normalizer,
                                         std::span<const int> widths) {
  std::vector<int> prev{kSos};
  prev.insert(prev.end(), labels.begin(), labels.end());
  std::vector<int> target(labels.begin(), labels.end());
  target.push_back(kEos);
  Var<Real> logits = OutputLogits(c, DecoderStates(c, memory, prev, v, widths), v);
  return SoftmaxCrossEntropy(logits, std::span<const int>(target), -1,
                             smoothing, normalizer);
}

template class Model<float>;
template class Model<double>;

}  // namespace dvcb
