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

#include "diffcore/adam.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dvcb {

template <typename Real>
void AdamStep(const std::vector<Parameter<Real>*>& params,
              AdamState<Real>& state, double lr) {
  if (!(lr > 0)) throw std::invalid_argument("adam: lr must be positive");
  if (state.m.empty()) {
    for (const auto* p : params) {
      state.m.emplace_back(p->value.shape());
      state.v.emplace_back(p->value.shape());
    }
  }
  if (state.m.size() != params.size()) {
    throw std::invalid_argument("adam: parameter list changed size");
  }
  ++state.step;
  const auto& o = state.options;
  const double bc1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter<Real>& p = *params[i];
    if (!p.grad.SameShape(p.value) || !state.m[i].SameShape(p.value)) {
      throw std::invalid_argument("adam: shape mismatch for " + p.name);
    }
    Tensor<Real>& m = state.m[i];
    Tensor<Real>& v = state.v[i];
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const double g = p.grad[j];
      const double mj = o.beta1 * m[j] + (1.0 - o.beta1) * g;
      const double vj = o.beta2 * v[j] + (1.0 - o.beta2) * g * g;
      m[j] = static_cast<Real>(mj);
      v[j] = static_cast<Real>(vj);
      if (g == 0.0 && mj == 0.0) continue;
      const double update = lr * (mj / bc1) / (std::sqrt(vj / bc2) + o.eps);
      p.value[j] = static_cast<Real>(p.value[j] - update);
    }
  }
}

double InverseSqrtLr(double peak, std::int64_t warmup, std::int64_t step) {
  if (step < 1) step = 1;
  if (warmup <= 0) return peak;
  const double s = static_cast<double>(step);
  const double w = static_cast<double>(warmup);
  return peak * std::min(s / w, std::sqrt(w / s));
}

template void AdamStep<float>(const std::vector<Parameter<float>*>&,
                              AdamState<float>&, double);
template void AdamStep<double>(const std::vector<Parameter<double>*>&,
                               AdamState<double>&, double);

}  // namespace dvcb
