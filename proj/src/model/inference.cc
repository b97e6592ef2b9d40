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

#include "model/inference.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "diffcore/kernels.h"

namespace dvcb {

template <typename Real>
BiasCache<Real> ComputeBiasCache(Model<Real>& model, const DynamicVocab& dyn) {
  Tape<Real> tape;
  auto c = model.Context(tape);
  BiasCache<Real> out;
  Var<Real> v = model.BiasEncode(c, dyn);
  out.v = v.value();
  out.widths = dyn.Widths();
  const auto d = static_cast<std::size_t>(model.config().d);
  if (dyn.size() == 0) {
    out.dyn_embed = Tensor<Real>(0, d);
    out.dyn_keys = Tensor<Real>(0, d);
    return out;
  }
  out.dyn_embed = Linear(c, "bias.W_e", v, false).value();
  out.dyn_keys = Linear(c, "bias.W_k", v, false).value();
  return out;
}

template <typename Real>
Tensor<Real> EncodeFeatures(Model<Real>& model, const Tensor<Real>& x) {
  Tape<Real> tape;
  auto c = model.Context(tape);
  return model.Encode(c, tape.Ref(x)).value();
}

template <typename Real>
IncrementalDecoder<Real>::IncrementalDecoder(const Model<Real>& model,
                                             bool extended)
    : model_(&model),
      extended_(extended),
      k_(model.config().vocab_size),
      d_(static_cast<std::size_t>(model.config().d)),
      heads_(static_cast<std::size_t>(model.config().heads)) {
  if (extended && !model.has_biasing()) {
    throw std::logic_error("extended decoding needs biasing parameters");
  }
  const auto& p = model.params();
  embed_ = p.at(extended ? "bias.embed_static" : "dec.embed").value.data();
  for (int l = 0; l < model.config().dec_layers; ++l) {
    const std::string pre = "dec.l" + std::to_string(l);
    Layer layer;
    layer.ln1 = GetNorm(pre + ".ln1");
    layer.ln2 = GetNorm(pre + ".ln2");
    layer.ln3 = GetNorm(pre + ".ln3");
    layer.self = GetAttn(pre + ".self");
    layer.cross = GetAttn(pre + ".cross");
    layer.ffn1 = GetLin(pre + ".ffn1", true);
    layer.ffn2 = GetLin(pre + ".ffn2", true);
    layers_.push_back(layer);
  }
  ln_f_ = GetNorm("dec.ln_f");
  out_ = GetLin(extended ? "bias.out_static" : "dec.out", true);
  if (extended) wq_ = GetLin("bias.W_q", false);
}

template <typename Real>
typename IncrementalDecoder<Real>::Lin IncrementalDecoder<Real>::GetLin(
    const std::string& name, bool bias) const {
  const auto& w = model_->params().at(name + ".w").value;
  Lin l;
  l.w = w.data();
  l.in = w.shape()[0];
  l.out = w.shape()[1];
  if (bias) l.b = model_->params().at(name + ".b").value.data();
  return l;
}

template <typename Real>
typename IncrementalDecoder<Real>::NormP IncrementalDecoder<Real>::GetNorm(
    const std::string& name) const {
  return {model_->params().at(name + ".g").value.data(),
          model_->params().at(name + ".b").value.data()};
}

template <typename Real>
typename IncrementalDecoder<Real>::AttnP IncrementalDecoder<Real>::GetAttn(
    const std::string& name) const {
  return {GetLin(name + ".q", true), GetLin(name + ".k", true),
          GetLin(name + ".v", true), GetLin(name + ".o", true)};
}

template <typename Real>
void IncrementalDecoder<Real>::Apply(const Lin& l, const Real* x,
                                     std::size_t rows, Real* out) const {
  Gemm<Real>(false, false, rows, l.out, l.in, x, l.w, out, Real(0));
  if (l.b == nullptr) return;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < l.out; ++j) out[r * l.out + j] += l.b[j];
  }
}

template <typename Real>
void IncrementalDecoder<Real>::Normalize(const NormP& n, const Real* x,
                                         Real* out) const {
  LayerNormForward<Real>(x, n.g, n.b, 1, d_, Real(1e-5), out, nullptr, nullptr);
}

template <typename Real>
typename IncrementalDecoder<Real>::Memory IncrementalDecoder<Real>::Prepare(
    const Tensor<Real>& h) const {
  Memory m;
  const std::size_t t = h.rows();
  for (const auto& layer : layers_) {
    Tensor<Real> k(t, d_), v(t, d_);
    Apply(layer.cross.k, h.data(), t, k.data());
    Apply(layer.cross.v, h.data(), t, v.data());
    m.keys.push_back(std::move(k));
    m.values.push_back(std::move(v));
  }
  return m;
}

template <typename Real>
typename IncrementalDecoder<Real>::State IncrementalDecoder<Real>::Start()
    const {
  State s;
  s.keys.resize(layers_.size());
  s.values.resize(layers_.size());
  return s;
}

template <typename Real>
std::vector<Real> IncrementalDecoder<Real>::Step(const Memory& memory,
                                                 const BiasCache<Real>* bias,
                                                 State& state,
                                                 int token) const {
  const std::size_t n_dyn = extended_ && bias ? bias->size() : 0;
  if (token < 0 || token >= k_ + static_cast<int>(n_dyn)) {
    throw std::out_of_range("decoder step: token id " + std::to_string(token) +
                            " outside the vocabulary");
  }
  const auto& pos = model_->positions();
  const std::size_t at = state.end + Width(bias, token) - 1;
  if (at >= pos.rows()) {
    throw std::invalid_argument("decoder step: exceeded max_len");
  }
  const Real* row = token < k_ ? embed_ + static_cast<std::size_t>(token) * d_
                               : bias->dyn_embed.row(static_cast<std::size_t>(token - k_)).data();
  std::vector<Real> x(d_), n(d_), q(d_), a(d_), tmp(d_);
  for (std::size_t j = 0; j < d_; ++j) x[j] = row[j] + pos.at(at, j);

  const std::size_t len = state.len + 1;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& L = layers_[l];
    Normalize(L.ln1, x.data(), n.data());
    Apply(L.self.q, n.data(), 1, q.data());
    auto& kc = state.keys[l];
    auto& vc = state.values[l];
    kc.resize(len * d_);
    vc.resize(len * d_);
    Apply(L.self.k, n.data(), 1, kc.data() + state.len * d_);
    Apply(L.self.v, n.data(), 1, vc.data() + state.len * d_);
    AttentionForward<Real>(q.data(), kc.data(), vc.data(), 1, len, d_, heads_,
                           AttentionMask::None(), a.data(), nullptr);
    Apply(L.self.o, a.data(), 1, tmp.data());
    for (std::size_t j = 0; j < d_; ++j) x[j] += tmp[j];

    Normalize(L.ln2, x.data(), n.data());
    Apply(L.cross.q, n.data(), 1, q.data());
    const std::size_t t = memory.keys[l].rows();
    AttentionForward<Real>(q.data(), memory.keys[l].data(),
                           memory.values[l].data(), 1, t, d_, heads_,
                           AttentionMask::None(), a.data(), nullptr);
    Apply(L.cross.o, a.data(), 1, tmp.data());
    for (std::size_t j = 0; j < d_; ++j) x[j] += tmp[j];

    Normalize(L.ln3, x.data(), n.data());
    std::vector<Real> hid(L.ffn1.out);
    Apply(L.ffn1, n.data(), 1, hid.data());
    for (auto& h : hid) h = std::max(h, Real(0));
    Apply(L.ffn2, hid.data(), 1, tmp.data());
    for (std::size_t j = 0; j < d_; ++j) x[j] += tmp[j];
  }
  state.len = len;
  state.end = at + 1;

  Normalize(ln_f_, x.data(), n.data());
  std::vector<Real> logits(static_cast<std::size_t>(k_) + n_dyn);
  Apply(out_, n.data(), 1, logits.data());
  if (n_dyn > 0) {
    Apply(wq_, n.data(), 1, q.data());
    Gemm<Real>(false, true, 1, n_dyn, d_, q.data(), bias->dyn_keys.data(),
               logits.data() + k_, Real(0));
    const Real inv = Real(1) / std::sqrt(static_cast<Real>(d_));
    for (std::size_t j = 0; j < n_dyn; ++j) logits[static_cast<std::size_t>(k_) + j] *= inv;
  }
  CheckFinite<Real>(logits, "decoder logits");
  const Real mx = *std::max_element(logits.begin(), logits.end());
  Real sum = 0;
  for (Real v : logits) sum += std::exp(v - mx);
  const Real lse = mx + std::log(sum);
  for (auto& v : logits) v -= lse;
  return logits;
}

template <typename Real>
std::size_t IncrementalDecoder<Real>::Width(const BiasCache<Real>* bias,
                                            int token) const {
  if (token < k_ || !model_->config().span_positions) return 1;
  return static_cast<std::size_t>(bias->widths.at(static_cast<std::size_t>(token - k_)));
}

template <typename Real>
bool IncrementalDecoder<Real>::Fits(const BiasCache<Real>* bias,
                                    const State& state, int token) const {
  return state.end + Width(bias, token) <= model_->positions().rows();
}

template struct BiasCache<float>;
template struct BiasCache<double>;
template BiasCache<float> ComputeBiasCache<float>(Model<float>&, const DynamicVocab&);
template BiasCache<double> ComputeBiasCache<double>(Model<double>&, const DynamicVocab&);
template Tensor<float> EncodeFeatures<float>(Model<float>&, const Tensor<float>&);
template Tensor<double> EncodeFeatures<double>(Model<double>&, const Tensor<double>&);
template class IncrementalDecoder<float>;
template class IncrementalDecoder<double>;

}  // namespace dvcb
