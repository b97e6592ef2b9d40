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

#ifndef MODEL_LAYERS_H_
#define MODEL_LAYERS_H_

#include <cstddef>
#include <string>

#include "diffcore/ops.h"
#include "diffcore/rng.h"
#include "diffcore/tape.h"
#include "model/params.h"

namespace dvcb {

// Everything a forward pass needs besides its inputs. `rng` is only used for
// dropout and may be null.
template <typename Real>
struct Ctx {
  Tape<Real>* tape;
  ParamStore<Real>* params;
  Real dropout = Real(0);
  Rng* rng = nullptr;

  Var<Real> P(const std::string& name) const {
    return tape->Param(params->at(name));
  }
};

// Initializers draw from rng.Stream(name), so values do not depend on the
// order parameters are created in.
template <typename Real>
void InitLinear(ParamStore<Real>& store, const std::string& name,
                std::size_t in, std::size_t out, bool bias, const Rng& rng);
template <typename Real>
void InitNorm(ParamStore<Real>& store, const std::string& name,
              std::size_t dim);
template <typename Real>
void InitNormal(ParamStore<Real>& store, const std::string& name,
                std::size_t rows, std::size_t cols, double stddev,
                const Rng& rng);
template <typename Real>
void InitEncoderLayer(ParamStore<Real>& store, const std::string& prefix,
                      std::size_t d, std::size_t ffn, const Rng& rng);
template <typename Real>
void InitDecoderLayer(ParamStore<Real>& store, const std::string& prefix,
                      std::size_t d, std::size_t ffn, const Rng& rng);

// x W (+ b) with W stored in x out.
template <typename Real>
Var<Real> Linear(const Ctx<Real>& c, const std::string& name, Var<Real> x,
                 bool bias = true);
template <typename Real>
Var<Real> Norm(const Ctx<Real>& c, const std::string& name, Var<Real> x);
template <typename Real>
Var<Real> MultiHead(const Ctx<Real>& c, const std::string& prefix,
                    Var<Real> xq, Var<Real> xkv, std::size_t heads,
                    const AttentionMask& mask);
template <typename Real>
Var<Real> FeedForward(const Ctx<Real>& c, const std::string& prefix,
                      Var<Real> x);

// Pre-norm residual blocks.
template <typename Real>
Var<Real> EncoderLayer(const Ctx<Real>& c, const std::string& prefix,
                       Var<Real> x, std::size_t heads);
template <typename Real>
Var<Real> DecoderLayer(const Ctx<Real>& c, const std::string& prefix,
                       Var<Real> x, Var<Real> memory, std::size_t heads);

}  // namespace dvcb

#endif  // MODEL_LAYERS_H_
