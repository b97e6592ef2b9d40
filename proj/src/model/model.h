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

#ifndef MODEL_MODEL_H_
#define MODEL_MODEL_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "diffcore/rng.h"
#include "diffcore/tape.h"
#include "model/config.h"
#include "model/layers.h"
#include "model/params.h"
#include "vocab/dynamic_vocab.h"

namespace dvcb {

enum class Partition { kFrozen, kTrainable };
const char* PartitionName(Partition p);

enum class Stage { kPretrain, kBias };

// Parameter layout:
//   enc.*, dec.*            backbone (dec.embed K x d, dec.out d -> K)
//   bias.embed_static       extended-layer copy of dec.embed
//   bias.out_static         extended-layer copy of dec.out
//   bias.tok_embed          K x d'
//   bias.enc.*              biasing Transformer over d'
//   bias.W_e, W_q, W_k      d' -> d, d -> d, d' -> d (no bias terms)
template <typename Real>
class Model {
 public:
  Model() = default;
  explicit Model(ModelConfig config);

  static Model InitBackbone(const ModelConfig& config, std::uint64_t seed);
  // Adds the biasing parameters. The extended static layers start as copies
  // of the backbone's.
  void InitBiasing(std::uint64_t seed);
  bool has_biasing() const { return params_.Has("bias.W_e.w"); }

  const ModelConfig& config() const { return config_; }
  ParamStore<Real>& params() { return params_; }
  const ParamStore<Real>& params() const { return params_; }

  Partition PartitionOf(const std::string& name) const;
  // Sets Parameter::trainable for the given training stage.
  void SetStage(Stage stage);

  template <typename To>
  Model<To> Cast() const {
    Model<To> out(config_);
    out.params() = params_.template Cast<To>();
    return out;
  }

  Ctx<Real> Context(Tape<Real>& tape, Rng* dropout_rng = nullptr);

  // x: T x F -> T x d.
  Var<Real> Encode(const Ctx<Real>& c, Var<Real> x);
  // N x d'. Each word is encoded on its own; N = 0 gives a 0-row result.
  Var<Real> BiasEncode(const Ctx<Real>& c, const DynamicVocab& dyn);
  // Extended embedding of a prefix before positions are added: static ids
  // read the static table, id K + n reads row n of V W_e. With `v` null the
  // backbone's table is used and only static ids are valid.
  Var<Real> Embed(const Ctx<Real>& c, std::span<const int> prev,
                  const Var<Real>* v);
  // Decoder position of each prefix entry. `widths` holds the subword count
  // of each dynamic token and is required when span_positions is set and
  // the prefix holds dynamic ids.
  std::vector<std::size_t> PrefixPositions(std::span<const int> prev,
                                           std::span<const int> widths) const;
  // Final decoder states for each prefix position. `v` selects the extended
  // layers; null runs the backbone's own embedding.
  Var<Real> DecoderStates(const Ctx<Real>& c, Var<Real> memory,
                          std::span<const int> prev, const Var<Real>* v,
                          std::span<const int> widths = {});
  // Logits over K (backbone) or K + N (extended).
  Var<Real> OutputLogits(const Ctx<Real>& c, Var<Real> states,
                         const Var<Real>* v);
  // Summed smoothed cross entropy of `labels` followed by eos, fed
  // sos + labels, divided by `normalizer`.
  Var<Real> TeacherForcedLoss(const Ctx<Real>& c, Var<Real> memory,
                              std::span<const int> labels, const Var<Real>* v,
                              Real smoothing, Real normalizer,
                              std::span<const int> widths = {});

  // Sinusoidal tables, max_len x d and max_len x d'.
  const Tensor<Real>& positions() const { return positions_; }
  const Tensor<Real>& bias_positions() const { return bias_positions_; }

 private:
  Var<Real> AddPositions(const Ctx<Real>& c, Var<Real> x,
                         const Tensor<Real>& table) const;

  ModelConfig config_;
  ParamStore<Real> params_;
  Tensor<Real> positions_;
  Tensor<Real> bias_positions_;
};

}  // namespace dvcb

#endif  // MODEL_MODEL_H_
