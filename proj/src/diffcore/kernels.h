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

#ifndef DIFFCORE_KERNELS_H_
#define DIFFCORE_KERNELS_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace dvcb {

// Row-major GEMM: C[m x n] = op(A) * op(B) + beta * C, where op(A) is m x k
// and A is stored k x m when trans_a is set (likewise for B).
template <typename Real>
void Gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
          std::size_t k, const Real* a, const Real* b, Real* c, Real beta);

// Throws std::invalid_argument on NaN/Inf input.
template <typename Real>
void SoftmaxInPlace(std::span<Real> row);

template <typename Real>
void CheckFinite(std::span<const Real> values, const char* what);

struct AttentionMask {
  enum class Kind { kNone, kCausal, kExplicit };
  Kind kind = Kind::kNone;
  // kExplicit only: n x m, 1 = allow, 0 = forbid.
  std::vector<std::uint8_t> allow;

  static AttentionMask None() { return {}; }
  static AttentionMask Causal() { return {Kind::kCausal, {}}; }
  static AttentionMask Explicit(std::vector<std::uint8_t> allow) {
    return {Kind::kExplicit, std::move(allow)};
  }

  // Queries are aligned with the last n keys for causal masking, so a single
  // query against m cached keys sees all of them.
  bool Allowed(std::size_t i, std::size_t j, std::size_t n,
               std::size_t m) const {
    switch (kind) {
      case Kind::kNone:
        return true;
      case Kind::kCausal:
        return j <= i + (m - n);
      case Kind::kExplicit:
        return allow[i * m + j] != 0;
    }
    return true;
  }
};

// Multi-head scaled dot-product attention. q: n x d, k, v: m x d. Heads split
// the d columns evenly; each head is scaled by 1/sqrt(d / heads). probs, if
// non-null, receives heads x n x m attention weights.
template <typename Real>
void AttentionForward(const Real* q, const Real* k, const Real* v,
                      std::size_t n, std::size_t m, std::size_t d,
                      std::size_t heads, const AttentionMask& mask, Real* out,
                      std::vector<Real>* probs);

// Accumulates into dq, dk, dv (any may be null).
template <typename Real>
void AttentionBackward(const Real* q, const Real* k, const Real* v,
                       const Real* probs, const Real* dout, std::size_t n,
                       std::size_t m, std::size_t d, std::size_t heads,
                       Real* dq, Real* dk, Real* dv);

// Per-row layer normalization. mean/rstd (length rows) may be null.
template <typename Real>
void LayerNormForward(const Real* x, const Real* gamma, const Real* beta,
                      std::size_t rows, std::size_t cols, Real eps, Real* out,
                      Real* mean, Real* rstd);

template <typename Real>
void LayerNormBackward(const Real* x, const Real* gamma, const Real* mean,
                       const Real* rstd, const Real* dout, std::size_t rows,
                       std::size_t cols, Real* dx, Real* dgamma, Real* dbeta);

// Sinusoidal position table, rows x dim.
template <typename Real>
std::vector<Real> SinusoidalPositions(std::size_t rows, std::size_t dim);

}  // namespace dvcb

#endif  // DIFFCORE_KERNELS_H_
