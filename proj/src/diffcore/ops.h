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

#ifndef DIFFCORE_OPS_H_
#define DIFFCORE_OPS_H_

#include <cstdint>
#include <span>
#include <vector>

#include "diffcore/kernels.h"
#include "diffcore/rng.h"
#include "diffcore/tape.h"
#include "diffcore/tensor.h"

namespace dvcb {

// Value-level helpers.

template <typename Real>
std::vector<Real> Softmax(std::span<const Real> logits);

// Mean over non-ignored rows of -log p(label), mixed with a uniform target at
// rate `smoothing`. Rows must already be probability vectors.
template <typename Real>
Real CrossEntropy(const Tensor<Real>& probs, std::span<const int> labels,
                  int ignore_id, Real smoothing);

// Differentiable ops. All operate on the 2-D view of their inputs.

template <typename Real>
Var<Real> MatMul(Var<Real> a, Var<Real> b, bool trans_b = false);

template <typename Real>
Var<Real> Add(Var<Real> a, Var<Real> b);

// a: n x c, row: 1 x c (or c).
template <typename Real>
Var<Real> AddRow(Var<Real> a, Var<Real> row);

template <typename Real>
Var<Real> Scale(Var<Real> a, Real c);

template <typename Real>
Var<Real> Relu(Var<Real> a);

template <typename Real>
Var<Real> LayerNorm(Var<Real> x, Var<Real> gamma, Var<Real> beta,
                    Real eps = Real(1e-5));

template <typename Real>
Var<Real> Attention(Var<Real> q, Var<Real> k, Var<Real> v, std::size_t heads,
                    const AttentionMask& mask);

// Single-head attention with softmax(Q K^T / sqrt(d)) weights.
template <typename Real>
Var<Real> ScaledDotAttention(Var<Real> q, Var<Real> k, Var<Real> v,
                             const AttentionMask& mask) {
  return Attention(q, k, v, 1, mask);
}

// Rows of `table` selected by `ids`.
template <typename Real>
Var<Real> Gather(Var<Real> table, std::span<const int> ids);

template <typename Real>
Var<Real> ConcatRows(const std::vector<Var<Real>>& parts);

template <typename Real>
Var<Real> ConcatCols(Var<Real> a, Var<Real> b);

template <typename Real>
Var<Real> SliceRows(Var<Real> x, std::size_t begin, std::size_t count);

// 1 x c column means.
template <typename Real>
Var<Real> MeanRows(Var<Real> x);

template <typename Real>
Var<Real> Sum(Var<Real> x);

template <typename Real>
Var<Real> Mean(Var<Real> x);

template <typename Real>
Var<Real> SoftmaxRows(Var<Real> x);

// Sum over non-ignored rows of the smoothed cross entropy, divided by
// `normalizer`. Fuses log-softmax; the gradient w.r.t. logits is
// (p - target) / normalizer.
template <typename Real>
Var<Real> SoftmaxCrossEntropy(Var<Real> logits, std::span<const int> labels,
                              int ignore_id, Real smoothing, Real normalizer);

// Inverted dropout; identity when rate == 0.
template <typename Real>
Var<Real> Dropout(Var<Real> x, Real rate, Rng& rng);

}  // namespace dvcb

#endif  // DIFFCORE_OPS_H_
