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

#ifndef MODEL_INFERENCE_H_
#define MODEL_INFERENCE_H_

#include <cstddef>
#include <vector>

#include "diffcore/tensor.h"
#include "model/model.h"
#include "vocab/dynamic_vocab.h"

namespace dvcb {

// Per-list biasing tensors. Computed once per biasing list and reused for
// every utterance and decoding step.
template <typename Real>
struct BiasCache {
  Tensor<Real> v;          // N x d'
  Tensor<Real> dyn_embed;  // N x d, V W_e
  Tensor<Real> dyn_keys;   // N x d, V W_k
  std::vector<int> widths;  // subword count per entry
  std::size_t size() const { return v.rows(); }
};

template <typename Real>
BiasCache<Real> ComputeBiasCache(Model<Real>& model, const DynamicVocab& dyn);

// Encoder forward without gradient bookkeeping beyond the tape. T x d.
template <typename Real>
Tensor<Real> EncodeFeatures(Model<Real>& model, const Tensor<Real>& x);

// Incremental decoder with per-layer key/value caches. Holds raw pointers
// into the model's parameters; the model must outlive it and stay unchanged.
template <typename Real>
class IncrementalDecoder {
 public:
  struct Memory {
    std::vector<Tensor<Real>> keys, values;  // per layer, T x d
  };
  struct State {
    std::vector<std::vector<Real>> keys, values;  // per layer, len x d
    std::size_t len = 0;
    // Decoder position one past the last fed token's span.
    std::size_t end = 0;
  };

  // `extended` selects the biasing-aware embedding and output layers.
  IncrementalDecoder(const Model<Real>& model, bool extended);

  Memory Prepare(const Tensor<Real>& h) const;
  State Start() const;
  // Feeds `token` at the next position and returns log-probabilities over
  // K (+ N when extended and `bias` is non-null).
  std::vector<Real> Step(const Memory& memory, const BiasCache<Real>* bias,
                         State& state, int token) const;
  // True if feeding `token` next stays within the position table.
  bool Fits(const BiasCache<Real>* bias, const State& state, int token) const;

  bool extended() const { return extended_; }
  int vocab_size() const { return k_; }

 private:
  std::size_t Width(const BiasCache<Real>* bias, int token) const;
  struct Lin {
    const Real* w = nullptr;
    const Real* b = nullptr;
    std::size_t in = 0, out = 0;
  };
  struct NormP {
    const Real* g = nullptr;
    const Real* b = nullptr;
  };
  struct AttnP {
    Lin q, k, v, o;
  };
  struct Layer {
    NormP ln1, ln2, ln3;
    AttnP self, cross;
    Lin ffn1, ffn2;
  };

  Lin GetLin(const std::string& name, bool bias) const;
  NormP GetNorm(const std::string& name) const;
  AttnP GetAttn(const std::string& name) const;
  void Apply(const Lin& l, const Real* x, std::size_t rows, Real* out) const;
  void Normalize(const NormP& n, const Real* x, Real* out) const;

  const Model<Real>* model_;
  bool extended_;
  int k_;
  std::size_t d_, heads_;
  const Real* embed_ = nullptr;
  std::vector<Layer> layers_;
  NormP ln_f_;
  Lin out_, wq_;
};

}  // namespace dvcb

#endif  // MODEL_INFERENCE_H_
