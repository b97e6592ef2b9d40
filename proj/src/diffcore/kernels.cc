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

#include "diffcore/kernels.h"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace dvcb {

namespace {

template <typename Real>
using RowMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic,
                             Eigen::RowMajor>;
template <typename Real>
using ConstMap = Eigen::Map<const RowMat<Real>, 0, Eigen::OuterStride<>>;
template <typename Real>
using MutMap = Eigen::Map<RowMat<Real>, 0, Eigen::OuterStride<>>;

}  // namespace

template <typename Real>
void Gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
          std::size_t k, const Real* a, const Real* b, Real* c, Real beta) {
  if (m == 0 || n == 0) return;
  MutMap<Real> cm(c, m, n, Eigen::OuterStride<>(n));
  if (k == 0) {
    if (beta == Real(0)) {
      cm.setZero();
    } else {
      cm *= beta;
    }
    return;
  }
  const auto ar = trans_a ? k : m;
  const auto ac = trans_a ? m : k;
  const auto br = trans_b ? n : k;
  const auto bc = trans_b ? k : n;
  ConstMap<Real> am(a, ar, ac, Eigen::OuterStride<>(ac));
  ConstMap<Real> bm(b, br, bc, Eigen::OuterStride<>(bc));
  if (beta == Real(0)) {
    cm.setZero();
  } else if (beta != Real(1)) {
    cm *= beta;
  }
  if (!trans_a && !trans_b) {
    cm.noalias() += am * bm;
  } else if (!trans_a && trans_b) {
    cm.noalias() += am * bm.transpose();
  } else if (trans_a && !trans_b) {
    cm.noalias() += am.transpose() * bm;
  } else {
    cm.noalias() += am.transpose() * bm.transpose();
  }
}

template <typename Real>
void CheckFinite(std::span<const Real> values, const char* what) {
  for (Real v : values) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument(std::string(what) +
                                  ": non-finite input value");
    }
  }
}

template <typename Real>
void SoftmaxInPlace(std::span<Real> row) {
  if (row.empty()) throw std::invalid_argument("softmax: empty input");
  CheckFinite<Real>(row, "softmax");
  const Real mx = *std::max_element(row.begin(), row.end());
  Real sum = 0;
  for (Real& v : row) {
    v = std::exp(v - mx);
    sum += v;
  }
  const Real inv = Real(1) / sum;
  for (Real& v : row) v *= inv;
}

template <typename Real>
void AttentionForward(const Real* q, const Real* k, const Real* v,
                      std::size_t n, std::size_t m, std::size_t d,
                      std::size_t heads, const AttentionMask& mask, Real* out,
                      std::vector<Real>* probs) {
  if (heads == 0 || d % heads != 0) {
    throw std::invalid_argument("attention: d must be divisible by heads");
  }
  if (mask.kind == AttentionMask::Kind::kExplicit && mask.allow.size() != n * m) {
    throw std::invalid_argument("attention: mask shape mismatch");
  }
  const std::size_t dh = d / heads;
  const Real scale = Real(1) / std::sqrt(static_cast<Real>(dh));
  std::vector<Real> local;
  std::vector<Real>& p = probs ? *probs : local;
  p.assign(heads * n * m, Real(0));
  for (std::size_t h = 0; h < heads; ++h) {
    ConstMap<Real> qh(q + h * dh, n, dh, Eigen::OuterStride<>(d));
    ConstMap<Real> kh(k + h * dh, m, dh, Eigen::OuterStride<>(d));
    ConstMap<Real> vh(v + h * dh, m, dh, Eigen::OuterStride<>(d));
    MutMap<Real> ph(p.data() + h * n * m, n, m, Eigen::OuterStride<>(m));
    ph.noalias() = (qh * kh.transpose()) * scale;
    for (std::size_t i = 0; i < n; ++i) {
      Real mx = -std::numeric_limits<Real>::infinity();
      bool any = false;
      for (std::size_t j = 0; j < m; ++j) {
        if (mask.Allowed(i, j, n, m)) {
          mx = std::max(mx, ph(i, j));
          any = true;
        }
      }
      if (!any) {
        throw std::invalid_argument("attention: query row " +
                                    std::to_string(i) +
                                    " has every key forbidden");
      }
      Real sum = 0;
      for (std::size_t j = 0; j < m; ++j) {
        if (mask.Allowed(i, j, n, m)) {
          ph(i, j) = std::exp(ph(i, j) - mx);
          sum += ph(i, j);
        } else {
          ph(i, j) = 0;
        }
      }
      ph.row(i) *= Real(1) / sum;
    }
    MutMap<Real> oh(out + h * dh, n, dh, Eigen::OuterStride<>(d));
    oh.noalias() = ph * vh;
  }
}

template <typename Real>
void AttentionBackward(const Real* q, const Real* k, const Real* v,
                       const Real* probs, const Real* dout, std::size_t n,
                       std::size_t m, std::size_t d, std::size_t heads,
                       Real* dq, Real* dk, Real* dv) {
  const std::size_t dh = d / heads;
  const Real scale = Real(1) / std::sqrt(static_cast<Real>(dh));
  RowMat<Real> dp(n, m);
  for (std::size_t h = 0; h < heads; ++h) {
    ConstMap<Real> qh(q + h * dh, n, dh, Eigen::OuterStride<>(d));
    ConstMap<Real> kh(k + h * dh, m, dh, Eigen::OuterStride<>(d));
    ConstMap<Real> vh(v + h * dh, m, dh, Eigen::OuterStride<>(d));
    ConstMap<Real> ph(probs + h * n * m, n, m, Eigen::OuterStride<>(m));
    ConstMap<Real> doh(dout + h * dh, n, dh, Eigen::OuterStride<>(d));
    if (dv) {
      MutMap<Real> dvh(dv + h * dh, m, dh, Eigen::OuterStride<>(d));
      dvh.noalias() += ph.transpose() * doh;
    }
    if (!dq && !dk) continue;
    dp.noalias() = doh * vh.transpose();
    for (std::size_t i = 0; i < n; ++i) {
      Real dot = 0;
      for (std::size_t j = 0; j < m; ++j) dot += dp(i, j) * ph(i, j);
      for (std::size_t j = 0; j < m; ++j) {
        dp(i, j) = ph(i, j) * (dp(i, j) - dot) * scale;
      }
    }
    if (dq) {
      MutMap<Real> dqh(dq + h * dh, n, dh, Eigen::OuterStride<>(d));
      dqh.noalias() += dp * kh;
    }
    if (dk) {
      MutMap<Real> dkh(dk + h * dh, m, dh, Eigen::OuterStride<>(d));
      dkh.noalias() += dp.transpose() * qh;
    }
  }
}

template <typename Real>
void LayerNormForward(const Real* x, const Real* gamma, const Real* beta,
                      std::size_t rows, std::size_t cols, Real eps, Real* out,
                      Real* mean, Real* rstd) {
  for (std::size_t r = 0; r < rows; ++r) {
    const Real* xr = x + r * cols;
    Real mu = 0;
    for (std::size_t c = 0; c < cols; ++c) mu += xr[c];
    mu /= static_cast<Real>(cols);
    Real var = 0;
    for (std::size_t c = 0; c < cols; ++c) {
      const Real t = xr[c] - mu;
      var += t * t;
    }
    var /= static_cast<Real>(cols);
    const Real rs = Real(1) / std::sqrt(var + eps);
    Real* o = out + r * cols;
    for (std::size_t c = 0; c < cols; ++c) {
      o[c] = (xr[c] - mu) * rs * gamma[c] + beta[c];
    }
    if (mean) mean[r] = mu;
    if (rstd) rstd[r] = rs;
  }
}

template <typename Real>
void LayerNormBackward(const Real* x, const Real* gamma, const Real* mean,
                       const Real* rstd, const Real* dout, std::size_t rows,
                       std::size_t cols, Real* dx, Real* dgamma, Real* dbeta) {
  const Real inv_n = Real(1) / static_cast<Real>(cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const Real* xr = x + r * cols;
    const Real* g = dout + r * cols;
    const Real mu = mean[r];
    const Real rs = rstd[r];
    Real sum_dy = 0;
    Real sum_dy_xhat = 0;
    for (std::size_t c = 0; c < cols; ++c) {
      const Real xhat = (xr[c] - mu) * rs;
      const Real dy = g[c] * gamma[c];
      sum_dy += dy;
      sum_dy_xhat += dy * xhat;
      if (dgamma) dgamma[c] += g[c] * xhat;
      if (dbeta) dbeta[c] += g[c];
    }
    if (!dx) continue;
    Real* dxr = dx + r * cols;
    for (std::size_t c = 0; c < cols; ++c) {
      const Real xhat = (xr[c] - mu) * rs;
      const Real dy = g[c] * gamma[c];
      dxr[c] += rs * (dy - inv_n * sum_dy - xhat * inv_n * sum_dy_xhat);
    }
  }
}

template <typename Real>
std::vector<Real> SinusoidalPositions(std::size_t rows, std::size_t dim) {
  std::vector<Real> table(rows * dim);
  for (std::size_t pos = 0; pos < rows; ++pos) {
    for (std::size_t i = 0; i < dim; i += 2) {
      const double freq =
          std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(dim));
      const double angle = static_cast<double>(pos) * freq;
      table[pos * dim + i] = static_cast<Real>(std::sin(angle));
      if (i + 1 < dim) {
        table[pos * dim + i + 1] = static_cast<Real>(std::cos(angle));
      }
    }
  }
  return table;
}

#define DVCB_INSTANTIATE_KERNELS(Real)                                        \
  template void Gemm<Real>(bool, bool, std::size_t, std::size_t, std::size_t, \
                           const Real*, const Real*, Real*, Real);            \
  template void SoftmaxInPlace<Real>(std::span<Real>);                        \
  template void CheckFinite<Real>(std::span<const Real>, const char*);        \
  template void AttentionForward<Real>(                                       \
      const Real*, const Real*, const Real*, std::size_t, std::size_t,        \
      std::size_t, std::size_t, const AttentionMask&, Real*,                  \
      std::vector<Real>*);                                                    \
  template void AttentionBackward<Real>(                                      \
      const Real*, const Real*, const Real*, const Real*, const Real*,        \
      std::size_t, std::size_t, std::size_t, std::size_t, Real*, Real*,       \
      Real*);                                                                 \
  template void LayerNormForward<Real>(const Real*, const Real*, const Real*, \
                                       std::size_t, std::size_t, Real, Real*, \
                                       Real*, Real*);                         \
  template void LayerNormBackward<Real>(                                      \
      const Real*, const Real*, const Real*, const Real*, const Real*,         \
      std::size_t, std::size_t, Real*, Real*, Real*);                         \
  template std::vector<Real> SinusoidalPositions<Real>(std::size_t,           \
                                                       std::size_t);

DVCB_INSTANTIATE_KERNELS(float)
DVCB_INSTANTIATE_KERNELS(double)

#undef DVCB_INSTANTIATE_KERNELS

}  // namespace dvcb
