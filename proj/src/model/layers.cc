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

#include "model/layers.h"

#include <cmath>

namespace dvcb {

namespace {

template <typename Real>
Var<Real> MaybeDropout(const Ctx<Real>& c, Var<Real> x) {
  if (c.rng == nullptr || c.dropout <= Real(0)) return x;
  return Dropout(x, c.dropout, *c.rng);
}

template <typename Real>
void InitAttention(ParamStore<Real>& store, const std::string& prefix,
                   std::size_t d, const Rng& rng) {
  for (const char* w : {".q", ".k", ".v", ".o"}) {
    InitLinear(store, prefix + w, d, d, true, rng);
  }
}

}  // namespace

template <typename Real>
void InitLinear(ParamStore<Real>& store, const std::string& name,
                std::size_t in, std::size_t out, bool bias, const Rng& rng) {
  Rng r = rng.Stream(name);
  const double a = std::sqrt(6.0 / static_cast<double>(in + out));
  auto& w = store.Add(name + ".w", {in, out});
  for (auto& v : w.value.vec()) v = static_cast<Real>(r.Uniform(-a, a));
  if (bias) store.Add(name + ".b", {out});
}

template <typename Real>
void InitNorm(ParamStore<Real>& store, const std::string& name,
              std::size_t dim) {
  store.Add(name + ".g", {dim}).value.Fill(Real(1));
  store.Add(name + ".b", {dim});
}

template <typename Real>
void InitNormal(ParamStore<Real>& store, const std::string& name,
                std::size_t rows, std::size_t cols, double stddev,
                const Rng& rng) {
  Rng r = rng.Stream(name);
  auto& p = store.Add(name, {rows, cols});
  for (auto& v : p.value.vec()) v = static_cast<Real>(stddev * r.Normal());
}

template <typename Real>
void InitEncoderLayer(ParamStore<Real>& store, const std::string& prefix,
                      std::size_t d, std::size_t ffn, const Rng& rng) {
  InitNorm(store, prefix + ".ln1", d);
  InitAttention(store, prefix + ".self", d, rng);
  InitNorm(store, prefix + ".ln2", d);
  InitLinear(store, prefix + ".ffn1", d, ffn, true, rng);
  InitLinear(store, prefix + ".ffn2", ffn, d, true, rng);
}

template <typename Real>
void InitDecoderLayer(ParamStore<Real>& store, const std::string& prefix,
                      std::size_t d, std::size_t ffn, const Rng& rng) {
  InitNorm(store, prefix + ".ln1", d);
  InitAttention(store, prefix + ".self", d, rng);
  InitNorm(store, prefix + ".ln2", d);
  InitAttention(store, prefix + ".cross", d, rng);
  InitNorm(store, prefix + ".ln3", d);
  InitLinear(store, prefix + ".ffn1", d, ffn, true, rng);
  InitLinear(store, prefix + ".ffn2", ffn, d, true, rng);
}

template <typename Real>
Var<Real> Linear(const Ctx<Real>& c, const std::string& name, Var<Real> x,
                 bool bias) {
  Var<Real> y = MatMul(x, c.P(name + ".w"));
  return bias ? AddRow(y, c.P(name + ".b")) : y;
}

template <typename Real>
Var<Real> Norm(const Ctx<Real>& c, const std::string& name, Var<Real> x) {
  return LayerNorm(x, c.P(name + ".g"), c.P(name + ".b"));
}

template <typename Real>
Var<Real> MultiHead(const Ctx<Real>& c, const std::string& prefix,
                    Var<Real> xq, Var<Real> xkv, std::size_t heads,
                    const AttentionMask& mask) {
  Var<Real> q = Linear(c, prefix + ".q", xq);
  Var<Real> k = Linear(c, prefix + ".k", xkv);
  Var<Real> v = Linear(c, prefix + ".v", xkv);
  return Linear(c, prefix + ".o", Attention(q, k, v, heads, mask));
}

template <typename Real>
Var<Real> FeedForward(const Ctx<Real>& c, const std::string& prefix,
                      Var<Real> x) {
  return Linear(c, prefix + ".ffn2", Relu(Linear(c, prefix + ".ffn1", x)));
}

template <typename Real>
Var<Real> EncoderLayer(const Ctx<Real>& c, const std::string& prefix,
                       Var<Real> x, std::size_t heads) {
  Var<Real> n = Norm(c, prefix + ".ln1", x);
  x = Add(x, MaybeDropout(c, MultiHead(c, prefix + ".self", n, n, heads,
                                       AttentionMask::None())));
  n = Norm(c, prefix + ".ln2", x);
  return Add(x, MaybeDropout(c, FeedForward(c, prefix, n)));
}

template <typename Real>
Var<Real> DecoderLayer(const Ctx<Real>& c, const std::string& prefix,
                       Var<Real> x, Var<Real> memory, std::size_t heads) {
  Var<Real> n = Norm(c, prefix + ".ln1", x);
  x = Add(x, MaybeDropout(c, MultiHead(c, prefix + ".self", n, n, heads,
                                       AttentionMask::Causal())));
  n = Norm(c, prefix + ".ln2", x);
  x = Add(x, MaybeDropout(c, MultiHead(c, prefix + ".cross", n, memory, heads,
                                       AttentionMask::None())));
  n = Norm(c, prefix + ".ln3", x);
  return Add(x, MaybeDropout(c, FeedForward(c, prefix, n)));
}

#define DVCB_INSTANTIATE_LAYERS(Real)                                          \
  template void InitLinear<Real>(ParamStore<Real>&, const std::string&,        \
                                 std::size_t, std::size_t, bool, const Rng&);  \
  template void InitNorm<Real>(ParamStore<Real>&, const std::string&,          \
                               std::size_t);                                   \
  template void InitNormal<Real>(ParamStore<Real>&, const std::string&,        \
                                 std::size_t, std::size_t, double,             \
                                 const Rng&);                                  \
  template void InitEncoderLayer<Real>(ParamStore<Real>&, const std::string&,  \
                                       std::size_t, std::size_t, const Rng&);  \
  template void InitDecoderLayer<Real>(ParamStore<Real>&, const std::string&,  \
                                       std::size_t, std::size_t, const Rng&);  \
  template Var<Real> Linear<Real>(const Ctx<Real>&, const std::string&,        \
                                  Var<Real>, bool);                            \
  template Var<Real> Norm<Real>(const Ctx<Real>&, const std::string&,          \
                                Var<Real>);                                    \
  template Var<Real> MultiHead<Real>(const Ctx<Real>&, const std::string&,     \
                                     Var<Real>, Var<Real>, std::size_t,        \
                                     const AttentionMask&);                    \
  template Var<Real> FeedForward<Real>(const Ctx<Real>&, const std::string&,   \
                                       Var<Real>);                             \
  template Var<Real> EncoderLayer<Real>(const Ctx<Real>&, const std::string&,  \
                                        Var<Real>, std::size_t);               \
  template Var<Real> DecoderLayer<Real>(const Ctx<Real>&, const std::string&,  \
                                        Var<Real>, Var<Real>, std::size_t);

DVCB_INSTANTIATE_LAYERS(float)
DVCB_INSTANTIATE_LAYERS(double)

}  // namespace dvcb
