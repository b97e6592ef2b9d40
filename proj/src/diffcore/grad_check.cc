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

#include "diffcore/grad_check.h"

#include <algorithm>
#include <cmath>

namespace dvcb {

namespace {

double Evaluate(const std::function<Var<double>(Tape<double>&)>& f) {
  Tape<double> tape;
  return f(tape).value()[0];
}

}  // namespace

GradCheckReport GradCheck(const std::function<Var<double>(Tape<double>&)>& f,
                          const std::vector<Parameter<double>*>& params,
                          double h, double tol, double floor) {
  std::vector<Tensor<double>> analytic;
  {
    Tape<double> tape;
    for (auto* p : params) tape.Param(*p);
    Var<double> loss = f(tape);
    tape.Backward(loss);
    for (auto* p : params) {
      const Tensor<double>& g = tape.Grad(tape.Param(*p));
      analytic.push_back(g.empty() ? Tensor<double>(p->value.shape()) : g);
    }
  }

  GradCheckReport report;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter<double>& p = *params[i];
    ParamCheck pc;
    pc.name = p.name;
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const double saved = p.value[j];
      p.value[j] = saved + h;
      const double up = Evaluate(f);
      p.value[j] = saved - h;
      const double down = Evaluate(f);
      p.value[j] = saved;
      const double numeric = (up - down) / (2 * h);
      const double a = analytic[i][j];
      const double rel = std::abs(a - numeric) /
                         std::max({std::abs(a), std::abs(numeric), floor});
      if (rel >= pc.max_rel_err) {
        pc.max_rel_err = rel;
        pc.worst_index = j;
        pc.analytic = a;
        pc.numeric = numeric;
      }
      ++report.coordinates;
    }
    report.max_rel_err = std::max(report.max_rel_err, pc.max_rel_err);
    report.params.push_back(pc);
  }
  report.passed = report.max_rel_err < tol;
  return report;
}

}  // namespace dvcb
