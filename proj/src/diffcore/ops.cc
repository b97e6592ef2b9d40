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

#include "diffcore/ops.h"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>

namespace dvcb {

namespace {

template <typename Real>
void Require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

template <typename Real>
void AccumulateInto(Tape<Real>& t, int id, const Tensor<Real>& g) {
  if (!t.RequiresGrad(id)) return;
  Tensor<Real>& dst = t.GradBuffer(id);
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

}  // namespace

template <typename Real>
std::vector<Real> Softmax(std::span<const Real> logits) {
  std::vector<Real> out(logits.begin(), logits.end());
  SoftmaxInPlace<Real>(out);
  return out;
}

template <typename Real>
Real CrossEntropy(const Tensor<Real>& probs, std::span<const int> labels,
                  int ignore_id, Real smoothing) {
  const std::size_t rows = probs.rows();
  const std::size_t classes = probs.cols();
  Require<Real>(labels.size() == rows, "cross_entropy: label count mismatch");
  Require<Real>(smoothing >= Real(0) && smoothing < Real(1),
                "cross_entropy: smoothing must be in [0, 1)");
  double total = 0;
  std::size_t counted = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    const int y = labels[r];
    if (y == ignore_id) continue;
    Require<Real>(y >= 0 && static_cast<std::size_t>(y) < classes,
                  "cross_entropy: label " + std::to_string(y) +
                      " out of range");
    auto row = probs.row(r);
    double sum = 0;
    for (Real p : row) sum += p;
    Require<Real>(std::abs(sum - 1.0) <= 1e-6,
                  "cross_entropy: row " + std::to_string(r) +
                      " does not sum to 1");
    double loss = -std::log(static_cast<double>(row[y]));
    if (smoothing > 0) {
      double uniform = 0;
      for (Real p : row) uniform -= std::log(static_cast<double>(p));
      uniform /= static_cast<double>(classes);
      loss = (1.0 - smoothing) * loss + smoothing * uniform;
    }
    total += loss;
    ++counted;
  }
  Require<Real>(counted > 0, "cross_entropy: every position is ignored");
  return static_cast<Real>(total / static_cast<double>(counted));
}

template <typename Real>
Var<Real> MatMul(Var<Real> a, Var<Real> b, bool trans_b) {
  Tape<Real>& t = *a.tape();
  const auto& av = a.value();
  const auto& bv = b.value();
  const std::size_t m = av.rows(), k = av.cols();
  const std::size_t n = trans_b ? bv.rows() : bv.cols();
  const std::size_t bk = trans_b ? bv.cols() : bv.rows();
  Require<Real>(k == bk, "matmul: inner dimensions disagree " +
                             ShapeString(av.shape()) + " * " +
                             ShapeString(bv.shape()) +
                             (trans_b ? "^T" : ""));
  Tensor<Real> out(m, n);
  Gemm<Real>(false, trans_b, m, n, k, av.data(), bv.data(), out.data(),
             Real(0));
  const int ia = a.id(), ib = b.id();
  return t.Record(std::move(out), {a, b},
                  [ia, ib, m, n, k, trans_b](Tape<Real>& t,
                                             const Tensor<Real>& g) {
                    if (t.RequiresGrad(ia)) {
                      // dA = G * op(B)^T
                      Gemm<Real>(false, !trans_b, m, k, n, g.data(),
                                 t.Value(ib).data(), t.GradBuffer(ia).data(),
                                 Real(1));
                    }
                    if (t.RequiresGrad(ib)) {
                      if (trans_b) {
                        // B is n x k: dB = G^T * A
                        Gemm<Real>(true, false, n, k, m, g.data(),
                                   t.Value(ia).data(),
                                   t.GradBuffer(ib).data(), Real(1));
                      } else {
                        Gemm<Real>(true, false, k, n, m, t.Value(ia).data(),
                                   g.data(), t.GradBuffer(ib).data(),
                                   Real(1));
                      }
                    }
                  });
}

template <typename Real>
Var<Real> Add(Var<Real> a, Var<Real> b) {
  Require<Real>(a.value().size() == b.value().size(),
                "add: shape mismatch " + ShapeString(a.value().shape()) +
                    " vs " + ShapeString(b.value().shape()));
  Tensor<Real> out = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  const int ia = a.id(), ib = b.id();
  return a.tape()->Record(std::move(out), {a, b},
                          [ia, ib](Tape<Real>& t, const Tensor<Real>& g) {
                            AccumulateInto(t, ia, g);
                            AccumulateInto(t, ib, g);
                          });
}

template <typename Real>
Var<Real> AddRow(Var<Real> a, Var<Real> row) {
  const std::size_t n = a.rows(), c = a.cols();
  Require<Real>(row.value().size() == c, "add_row: width mismatch");
  Tensor<Real> out = a.value();
  const auto& rv = row.value();
  for (std::size_t r = 0; r < n; ++r) {
    Real* o = out.data() + r * c;
    for (std::size_t j = 0; j < c; ++j) o[j] += rv[j];
  }
  const int ia = a.id(), ir = row.id();
  return a.tape()->Record(
      std::move(out), {a, row},
      [ia, ir, n, c](Tape<Real>& t, const Tensor<Real>& g) {
        AccumulateInto(t, ia, g);
        if (t.RequiresGrad(ir)) {
          Tensor<Real>& dr = t.GradBuffer(ir);
          for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t j = 0; j < c; ++j) dr[j] += g[r * c + j];
          }
        }
      });
}

template <typename Real>
Var<Real> Scale(Var<Real> a, Real c) {
  Tensor<Real> out = a.value();
  for (auto& v : out.vec()) v *= c;
  const int ia = a.id();
  return a.tape()->Record(std::move(out), {a},
                          [ia, c](Tape<Real>& t, const Tensor<Real>& g) {
                            if (!t.RequiresGrad(ia)) return;
                            Tensor<Real>& d = t.GradBuffer(ia);
                            for (std::size_t i = 0; i < g.size(); ++i) {
                              d[i] += g[i] * c;
                            }
                          });
}

template <typename Real>
Var<Real> Relu(Var<Real> a) {
  Tensor<Real> out = a.value();
  for (auto& v : out.vec()) v = v > Real(0) ? v : Real(0);
  const int ia = a.id(), io = static_cast<int>(a.tape()->size());
  return a.tape()->Record(std::move(out), {a},
                          [ia, io](Tape<Real>& t, const Tensor<Real>& g) {
                            if (!t.RequiresGrad(ia)) return;
                            const auto& y = t.Value(io);
                            Tensor<Real>& d = t.GradBuffer(ia);
                            for (std::size_t i = 0; i < g.size(); ++i) {
                              if (y[i] > Real(0)) d[i] += g[i];
                            }
                          });
}

template <typename Real>
Var<Real> LayerNorm(Var<Real> x, Var<Real> gamma, Var<Real> beta, Real eps) {
  const std::size_t rows = x.rows(), cols = x.cols();
  Require<Real>(gamma.value().size() == cols && beta.value().size() == cols,
                "layer_norm: parameter width mismatch");
  Tensor<Real> out(x.value().shape());
  auto stats = std::make_shared<std::vector<Real>>(2 * rows);
  LayerNormForward<Real>(x.value().data(), gamma.value().data(),
                         beta.value().data(), rows, cols, eps, out.data(),
                         stats->data(), stats->data() + rows);
  const int ix = x.id(), ig = gamma.id(), ib = beta.id();
  return x.tape()->Record(
      std::move(out), {x, gamma, beta},
      [ix, ig, ib, rows, cols, stats](Tape<Real>& t, const Tensor<Real>& g) {
        Real* dx = t.RequiresGrad(ix) ? t.GradBuffer(ix).data() : nullptr;
        Real* dg = t.RequiresGrad(ig) ? t.GradBuffer(ig).data() : nullptr;
        Real* db = t.RequiresGrad(ib) ? t.GradBuffer(ib).data() : nullptr;
        LayerNormBackward<Real>(t.Value(ix).data(), t.Value(ig).data(),
                                stats->data(), stats->data() + rows, g.data(),
                                rows, cols, dx, dg, db);
      });
}

template <typename Real>
Var<Real> Attention(Var<Real> q, Var<Real> k, Var<Real> v, std::size_t heads,
                    const AttentionMask& mask) {
  const std::size_t n = q.rows(), m = k.rows(), d = q.cols();
  Require<Real>(k.cols() == d && v.cols() == d && v.rows() == m,
                "attention: Q/K/V shapes disagree");
  Require<Real>(m > 0, "attention: no keys");
  Tensor<Real> out(n, d);
  auto probs = std::make_shared<std::vector<Real>>();
  AttentionForward<Real>(q.value().data(), k.value().data(), v.value().data(),
                         n, m, d, heads, mask, out.data(), probs.get());
  const int iq = q.id(), ik = k.id(), iv = v.id();
  return q.tape()->Record(
      std::move(out), {q, k, v},
      [iq, ik, iv, n, m, d, heads, probs](Tape<Real>& t,
                                          const Tensor<Real>& g) {
        Real* dq = t.RequiresGrad(iq) ? t.GradBuffer(iq).data() : nullptr;
        Real* dk = t.RequiresGrad(ik) ? t.GradBuffer(ik).data() : nullptr;
        Real* dv = t.RequiresGrad(iv) ? t.GradBuffer(iv).data() : nullptr;
        AttentionBackward<Real>(t.Value(iq).data(), t.Value(ik).data(),
                                t.Value(iv).data(), probs->data(), g.data(),
                                n, m, d, heads, dq, dk, dv);
      });
}

template <typename Real>
Var<Real> Gather(Var<Real> table, std::span<const int> ids) {
  const std::size_t rows = table.rows(), c = table.cols();
  Tensor<Real> out(ids.size(), c);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    Require<Real>(ids[i] >= 0 && static_cast<std::size_t>(ids[i]) < rows,
                  "gather: id " + std::to_string(ids[i]) +
                      " outside table of " + std::to_string(rows) + " rows");
    auto src = table.value().row(static_cast<std::size_t>(ids[i]));
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  const int it = table.id();
  std::vector<int> idx(ids.begin(), ids.end());
  return table.tape()->Record(
      std::move(out), {table},
      [it, c, idx = std::move(idx)](Tape<Real>& t, const Tensor<Real>& g) {
        Tensor<Real>& d = t.GradBuffer(it);
        for (std::size_t i = 0; i < idx.size(); ++i) {
          Real* dst = d.data() + static_cast<std::size_t>(idx[i]) * c;
          for (std::size_t j = 0; j < c; ++j) dst[j] += g[i * c + j];
        }
      });
}

template <typename Real>
Var<Real> ConcatRows(const std::vector<Var<Real>>& parts) {
  Require<Real>(!parts.empty(), "concat_rows: no inputs");
  const std::size_t c = parts.front().cols();
  std::size_t rows = 0;
  for (const auto& p : parts) {
    Require<Real>(p.cols() == c || p.rows() == 0,
                  "concat_rows: width mismatch");
    rows += p.rows();
  }
  Tensor<Real> out(rows, c);
  std::vector<int> ids;
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    const auto& v = p.value();
    std::copy(v.vec().begin(), v.vec().end(), out.data() + off * c);
    ids.push_back(p.id());
    offsets.push_back(off);
    off += p.rows();
  }
  return parts.front().tape()->Record(
      std::move(out), parts,
      [ids, offsets, c](Tape<Real>& t, const Tensor<Real>& g) {
        for (std::size_t i = 0; i < ids.size(); ++i) {
          if (!t.RequiresGrad(ids[i])) continue;
          Tensor<Real>& d = t.GradBuffer(ids[i]);
          const Real* src = g.data() + offsets[i] * c;
          for (std::size_t j = 0; j < d.size(); ++j) d[j] += src[j];
        }
      });
}

template <typename Real>
Var<Real> ConcatCols(Var<Real> a, Var<Real> b) {
  const std::size_t n = a.rows(), ca = a.cols(), cb = b.cols();
  Require<Real>(b.rows() == n, "concat_cols: row count mismatch");
  Tensor<Real> out(n, ca + cb);
  for (std::size_t r = 0; r < n; ++r) {
    auto ar = a.value().row(r);
    std::copy(ar.begin(), ar.end(), out.data() + r * (ca + cb));
    if (cb) {
      auto br = b.value().row(r);
      std::copy(br.begin(), br.end(), out.data() + r * (ca + cb) + ca);
    }
  }
  const int ia = a.id(), ib = b.id();
  return a.tape()->Record(
      std::move(out), {a, b},
      [ia, ib, n, ca, cb](Tape<Real>& t, const Tensor<Real>& g) {
        if (t.RequiresGrad(ia)) {
          Tensor<Real>& d = t.GradBuffer(ia);
          for (std::size_t r = 0; r < n; ++r)
            for (std::size_t j = 0; j < ca; ++j)
              d[r * ca + j] += g[r * (ca + cb) + j];
        }
        if (cb && t.RequiresGrad(ib)) {
          Tensor<Real>& d = t.GradBuffer(ib);
          for (std::size_t r = 0; r < n; ++r)
            for (std::size_t j = 0; j < cb; ++j)
              d[r * cb + j] += g[r * (ca + cb) + ca + j];
        }
      });
}

template <typename Real>
Var<Real> SliceRows(Var<Real> x, std::size_t begin, std::size_t count) {
  const std::size_t c = x.cols();
  Require<Real>(begin + count <= x.rows(), "slice_rows: out of range");
  std::vector<Real> data(x.value().data() + begin * c,
                         x.value().data() + (begin + count) * c);
  const int ix = x.id();
  return x.tape()->Record(
      Tensor<Real>::Matrix(count, c, std::move(data)), {x},
      [ix, begin, c](Tape<Real>& t, const Tensor<Real>& g) {
        Tensor<Real>& d = t.GradBuffer(ix);
        for (std::size_t i = 0; i < g.size(); ++i) d[begin * c + i] += g[i];
      });
}

template <typename Real>
Var<Real> MeanRows(Var<Real> x) {
  const std::size_t n = x.rows(), c = x.cols();
  Require<Real>(n > 0, "mean_rows: no rows");
  Tensor<Real> out(1, c);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < c; ++j) out[j] += x.value()[r * c + j];
  const Real inv = Real(1) / static_cast<Real>(n);
  for (auto& v : out.vec()) v *= inv;
  const int ix = x.id();
  return x.tape()->Record(
      std::move(out), {x}, [ix, n, c, inv](Tape<Real>& t, const Tensor<Real>& g) {
        Tensor<Real>& d = t.GradBuffer(ix);
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t j = 0; j < c; ++j) d[r * c + j] += g[j] * inv;
      });
}

template <typename Real>
Var<Real> Sum(Var<Real> x) {
  Real s = 0;
  for (Real v : x.value().vec()) s += v;
  const int ix = x.id();
  return x.tape()->Record(
      Tensor<Real>::FromData({1}, {s}), {x},
      [ix](Tape<Real>& t, const Tensor<Real>& g) {
        Tensor<Real>& d = t.GradBuffer(ix);
        for (auto& v : d.vec()) v += g[0];
      });
}

template <typename Real>
Var<Real> Mean(Var<Real> x) {
  const auto n = static_cast<Real>(x.value().size());
  return Scale(Sum(x), Real(1) / n);
}

template <typename Real>
Var<Real> SoftmaxRows(Var<Real> x) {
  const std::size_t n = x.rows(), c = x.cols();
  Tensor<Real> out = x.value();
  for (std::size_t r = 0; r < n; ++r) SoftmaxInPlace<Real>(out.row(r));
  const int ix = x.id(), io = static_cast<int>(x.tape()->size());
  return x.tape()->Record(
      std::move(out), {x}, [ix, io, n, c](Tape<Real>& t, const Tensor<Real>& g) {
        const auto& y = t.Value(io);
        Tensor<Real>& d = t.GradBuffer(ix);
        for (std::size_t r = 0; r < n; ++r) {
          Real dot = 0;
          for (std::size_t j = 0; j < c; ++j) dot += g[r * c + j] * y[r * c + j];
          for (std::size_t j = 0; j < c; ++j)
            d[r * c + j] += y[r * c + j] * (g[r * c + j] - dot);
        }
      });
}

template <typename Real>
Var<Real> SoftmaxCrossEntropy(Var<Real> logits, std::span<const int> labels,
                              int ignore_id, Real smoothing, Real normalizer) {
  const std::size_t n = logits.rows(), c = logits.cols();
  Require<Real>(labels.size() == n, "softmax_cross_entropy: label count");
  Require<Real>(smoothing >= Real(0) && smoothing < Real(1),
                "softmax_cross_entropy: smoothing must be in [0, 1)");
  Require<Real>(normalizer > Real(0),
                "softmax_cross_entropy: normalizer must be positive");
  auto probs = std::make_shared<Tensor<Real>>(logits.value());
  std::vector<int> lab(labels.begin(), labels.end());
  Real total = 0;
  for (std::size_t r = 0; r < n; ++r) {
    const int y = lab[r];
    if (y == ignore_id) continue;
    Require<Real>(y >= 0 && static_cast<std::size_t>(y) < c,
                  "softmax_cross_entropy: label " + std::to_string(y) +
                      " outside [0, " + std::to_string(c) + ")");
    auto row = probs->row(r);
    CheckFinite<Real>(row, "softmax_cross_entropy");
    const Real mx = *std::max_element(row.begin(), row.end());
    Real z = 0;
    for (Real v : row) z += std::exp(v - mx);
    const Real log_z = mx + std::log(z);
    Real loss = log_z - row[static_cast<std::size_t>(y)];
    if (smoothing > Real(0)) {
      Real mean_nll = 0;
      for (Real v : row) mean_nll += log_z - v;
      mean_nll /= static_cast<Real>(c);
      loss = (Real(1) - smoothing) * loss + smoothing * mean_nll;
    }
    total += loss;
    for (Real& v : row) v = std::exp(v - log_z);
  }
  const int il = logits.id();
  return logits.tape()->Record(
      Tensor<Real>::FromData({1}, {total / normalizer}), {logits},
      [il, n, c, probs, lab = std::move(lab), ignore_id, smoothing,
       normalizer](Tape<Real>& t, const Tensor<Real>& g) {
        Tensor<Real>& d = t.GradBuffer(il);
        const Real scale = g[0] / normalizer;
        const Real off = smoothing / static_cast<Real>(c);
        for (std::size_t r = 0; r < n; ++r) {
          const int y = lab[r];
          if (y == ignore_id) continue;
          for (std::size_t j = 0; j < c; ++j) {
            Real target = off;
            if (static_cast<int>(j) == y) target += Real(1) - smoothing;
            d[r * c + j] += scale * ((*probs)[r * c + j] - target);
          }
        }
      });
}

template <typename Real>
Var<Real> Dropout(Var<Real> x, Real rate, Rng& rng) {
  if (rate <= Real(0)) return x;
  Require<Real>(rate < Real(1), "dropout: rate must be < 1");
  auto mask = std::make_shared<std::vector<Real>>(x.value().size());
  const Real keep = Real(1) / (Real(1) - rate);
  Tensor<Real> out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) {
    (*mask)[i] = rng.Uniform() < rate ? Real(0) : keep;
    out[i] *= (*mask)[i];
  }
  const int ix = x.id();
  return x.tape()->Record(std::move(out), {x},
                          [ix, mask](Tape<Real>& t, const Tensor<Real>& g) {
                            Tensor<Real>& d = t.GradBuffer(ix);
                            for (std::size_t i = 0; i < g.size(); ++i)
                              d[i] += g[i] * (*mask)[i];
                          });
}

#define DVCB_INSTANTIATE_OPS(Real)                                             \
  template std::vector<Real> Softmax<Real>(std::span<const Real>);             \
  template Real CrossEntropy<Real>(const Tensor<Real>&, std::span<const int>,  \
                                   int, Real);                                 \
  template Var<Real> MatMul<Real>(Var<Real>, Var<Real>, bool);                 \
  template Var<Real> Add<Real>(Var<Real>, Var<Real>);                          \
  template Var<Real> AddRow<Real>(Var<Real>, Var<Real>);                       \
  template Var<Real> Scale<Real>(Var<Real>, Real);                             \
  template Var<Real> Relu<Real>(Var<Real>);                                    \
  template Var<Real> LayerNorm<Real>(Var<Real>, Var<Real>, Var<Real>, Real);   \
  template Var<Real> Attention<Real>(Var<Real>, Var<Real>, Var<Real>,          \
                                     std::size_t, const AttentionMask&);       \
  template Var<Real> Gather<Real>(Var<Real>, std::span<const int>);            \
  template Var<Real> ConcatRows<Real>(const std::vector<Var<Real>>&);          \
  template Var<Real> ConcatCols<Real>(Var<Real>, Var<Real>);                   \
  template Var<Real> SliceRows<Real>(Var<Real>, std::size_t, std::size_t);     \
  template Var<Real> MeanRows<Real>(Var<Real>);                                \
  template Var<Real> Sum<Real>(Var<Real>);                                     \
  template Var<Real> Mean<Real>(Var<Real>);                                    \
  template Var<Real> SoftmaxRows<Real>(Var<Real>);                             \
  template Var<Real> SoftmaxCrossEntropy<Real>(                                \
      Var<Real>, std::span<const int>, int, Real, Real);                       \
  template Var<Real> Dropout<Real>(Var<Real>, Real, Rng&);

DVCB_INSTANTIATE_OPS(float)
DVCB_INSTANTIATE_OPS(double)

#undef DVCB_INSTANTIATE_OPS

}  // namespace dvcb
