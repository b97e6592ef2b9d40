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

#ifndef DIFFCORE_ADAM_H_
#define DIFFCORE_ADAM_H_

#include <cstdint>
#include <vector>

#include "diffcore/tape.h"
#include "diffcore/tensor.h"

namespace dvcb {

struct AdamOptions {
  double lr = 0.002;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Moment estimates for an ordered parameter list.
template <typename Real>
struct AdamState {
  std::int64_t step = 0;
  std::vector<Tensor<Real>> m;
  std::vector<Tensor<Real>> v;
  AdamOptions options;
};

// One bias-corrected Adam update at learning rate `lr` for every parameter
// in `params`, reading Parameter::grad. Parameters with zero gradient keep
// their exact values.
template <typename Real>
void AdamStep(const std::vector<Parameter<Real>*>& params,
              AdamState<Real>& state, double lr);

template <typename Real>
void AdamStep(const std::vector<Parameter<Real>*>& params,
              AdamState<Real>& state) {
  AdamStep(params, state, state.options.lr);
}

// Linear warmup to `peak` at step `warmup`, then peak * sqrt(warmup / step).
double InverseSqrtLr(double peak, std::int64_t warmup, std::int64_t step);

}  // namespace dvcb

#endif  // DIFFCORE_ADAM_H_
