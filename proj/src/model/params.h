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

#ifndef MODEL_PARAMS_H_
#define MODEL_PARAMS_H_

#include <cstddef>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "diffcore/tape.h"
#include "diffcore/tensor.h"

namespace dvcb {

// Named parameters in insertion order. Addresses are stable, so tapes may
// bind them by pointer.
template <typename Real>
class ParamStore {
 public:
  ParamStore() = default;
  ParamStore(const ParamStore& other) { *this = other; }
  ParamStore& operator=(const ParamStore& other) {
    if (this == &other) return *this;
    params_.clear();
    index_.clear();
    for (const auto& p : other.params_) {
      Parameter<Real>& q = Add(p->name, p->value.shape());
      q.value = p->value;
      q.trainable = p->trainable;
    }
    return *this;
  }
  ParamStore(ParamStore&&) noexcept = default;
  ParamStore& operator=(ParamStore&&) noexcept = default;

  Parameter<Real>& Add(const std::string& name, std::vector<std::size_t> shape) {
    if (index_.count(name)) {
      throw std::invalid_argument("duplicate parameter " + name);
    }
    auto p = std::make_unique<Parameter<Real>>();
    p->name = name;
    p->value = Tensor<Real>(std::move(shape));
    index_.emplace(name, params_.size());
    params_.push_back(std::move(p));
    return *params_.back();
  }

  bool Has(const std::string& name) const { return index_.count(name) > 0; }

  Parameter<Real>& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("no parameter " + name);
    return *params_[it->second];
  }
  const Parameter<Real>& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("no parameter " + name);
    return *params_[it->second];
  }

  std::size_t size() const { return params_.size(); }
  Parameter<Real>& operator[](std::size_t i) { return *params_[i]; }
  const Parameter<Real>& operator[](std::size_t i) const { return *params_[i]; }

  std::vector<Parameter<Real>*> All() {
    std::vector<Parameter<Real>*> out;
    for (auto& p : params_) out.push_back(p.get());
    return out;
  }
  std::vector<Parameter<Real>*> Trainable() {
    std::vector<Parameter<Real>*> out;
    for (auto& p : params_) {
      if (p->trainable) out.push_back(p.get());
    }
    return out;
  }

  // Total element count of parameters whose name starts with `prefix`.
  std::size_t NumElements(const std::string& prefix = "") const {
    std::size_t n = 0;
    for (const auto& p : params_) {
      if (p->name.rfind(prefix, 0) == 0) n += p->value.size();
    }
    return n;
  }

  void ZeroGrads() {
    for (auto& p : params_) p->ZeroGrad();
  }

  template <typename To>
  ParamStore<To> Cast() const {
    ParamStore<To> out;
    for (const auto& p : params_) {
      Parameter<To>& q = out.Add(p->name, p->value.shape());
      q.value = p->value.template Cast<To>();
      q.trainable = p->trainable;
    }
    return out;
  }

 private:
  std::vector<std::unique_ptr<Parameter<Real>>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace dvcb

#endif  // MODEL_PARAMS_H_
