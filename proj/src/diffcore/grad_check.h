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

#ifndef DIFFCORE_GRAD_CHECK_H_
#define DIFFCORE_GRAD_CHECK_H_

#include <functional>
#include <string>
#include <vector>

#include "diffcore/tape.h"

namespace dvcb {

struct ParamCheck {
  std::string name;
  std::size_t worst_index = 0;
  double analytic = 0;
  double numeric = 0;
  double max_rel_err = 0;
};

struct GradCheckReport {
  std::vector<ParamCheck> params;
  double max_rel_err = 0;
  std::size_t coordinates = 0;
  bool passed = true;
};

// Compares reverse-mode gradients of a scalar function against central
// differences (f(x+h) - f(x-h)) / 2h, one coordinate at a time. Relative
// error is |a - n| / max(|a|, |n|, floor).
GradCheckReport GradCheck(
    const std::function<Var<double>(Tape<double>&)>& f,
    const std::vector<Parameter<double>*>& params, double h = 1e-4,
    double tol = 1e-4, double floor = 1e-6);

}  // namespace dvcb

#endif  // DIFFCORE_GRAD_CHECK_H_
