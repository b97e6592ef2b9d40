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

#ifndef DIFFCORE_TAPE_H_
#define DIFFCORE_TAPE_H_

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "diffcore/tensor.h"

namespace dvcb {

// A named, persistent array with a gradient accumulator. `trainable` decides
// whether a tape tracks gradients for it.
template <typename Real>
struct Parameter {
  std::string name;
  Tensor<Real> value;
  Tensor<Real> grad;
  bool trainable = true;

  void ZeroGrad() {
    if (!grad.SameShape(value)) grad = Tensor<Real>(value.shape());
    grad.Fill(Real(0));
  }
};

template <typename Real>
class Tape;

template <typename Real>
class Var {
 public:
  Var() = default;
  Var(Tape<Real>* tape, int id) : tape_(tape), id_(id) {}

  bool valid() const { return tape_ != nullptr; }
  int id() const { return id_; }
  Tape<Real>* tape() const { return tape_; }
  const Tensor<Real>& value() const { return tape_->Value(id_); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool requires_grad() const { return tape_->RequiresGrad(id_); }

 private:
  Tape<Real>* tape_ = nullptr;
  int id_ = -1;
};

// Records a forward computation and replays it backwards. Nodes are appended
// in evaluation order, so reverse insertion order is a valid topological
// order for the backward sweep.
template <typename Real>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor<Real>&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<Real> Constant(Tensor<Real> value) {
    return Push(std::move(value), nullptr, false, nullptr);
  }
  Var<Real> Input(Tensor<Real> value) {
    return Push(std::move(value), nullptr, true, nullptr);
  }
  // Non-owning leaf; `value` must outlive the tape.
  Var<Real> Ref(const Tensor<Real>& value, bool requires_grad = false) {
    return Push(Tensor<Real>(), &value, requires_grad, nullptr);
  }
  // Binds a parameter once per tape; repeated calls return the same node.
  Var<Real> Param(Parameter<Real>& p) {
    auto it = param_nodes_.find(&p);
    if (it != param_nodes_.end()) return Var<Real>(this, it->second);
    Var<Real> v = Push(Tensor<Real>(), &p.value, p.trainable, nullptr);
    param_nodes_.emplace(&p, v.id());
    bound_params_.emplace_back(&p, v.id());
    return v;
  }

  // Appends an op result. The backward closure is kept only when some input
  // requires a gradient.
  Var<Real> Record(Tensor<Real> value, std::initializer_list<Var<Real>> inputs,
                   BackwardFn backward) {
    bool needs = false;
    for (const auto& in : inputs) needs = needs || RequiresGrad(in.id());
    return Push(std::move(value), nullptr, needs,
                needs ? std::move(backward) : BackwardFn());
  }
  Var<Real> Record(Tensor<Real> value, const std::vector<Var<Real>>& inputs,
                   BackwardFn backward) {
    bool needs = false;
    for (const auto& in : inputs) needs = needs || RequiresGrad(in.id());
    return Push(std::move(value), nullptr, needs,
                needs ? std::move(backward) : BackwardFn());
  }

  const Tensor<Real>& Value(int id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    return n.external ? *n.external : n.value;
  }
  bool RequiresGrad(int id) const {
    return nodes_[static_cast<std::size_t>(id)].requires_grad;
  }

  // Zero-initialized on first use.
  Tensor<Real>& GradBuffer(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.grad.SameShape(Value(id))) n.grad = Tensor<Real>(Value(id).shape());
    return n.grad;
  }
  // Empty tensor when no gradient reached the node.
  const Tensor<Real>& Grad(Var<Real> v) const {
    return nodes_[static_cast<std::size_t>(v.id())].grad;
  }

  void Backward(Var<Real> root) {
    if (root.value().size() != 1) {
      throw std::invalid_argument("Backward: root must be a scalar, got " +
                                  ShapeString(root.value().shape()));
    }
    Tensor<Real> seed(root.value().shape(), Real(1));
    Backward(root, seed);
  }

  void Backward(Var<Real> root, const Tensor<Real>& seed) {
    if (!seed.SameShape(root.value())) {
      throw std::invalid_argument("Backward: seed shape mismatch");
    }
    if (!RequiresGrad(root.id())) return;
    Tensor<Real>& g = GradBuffer(root.id());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += seed[i];
    for (int id = root.id(); id >= 0; --id) {
      Node& n = nodes_[static_cast<std::size_t>(id)];
      if (!n.backward || n.grad.empty()) continue;
      // The closure may grow other nodes' grads but never this node's.
      n.backward(*this, n.grad);
    }
  }

  // Parameter gradients accumulated on this tape, in binding order.
  std::vector<std::pair<Parameter<Real>*, const Tensor<Real>*>> ParamGrads()
      const {
    std::vector<std::pair<Parameter<Real>*, const Tensor<Real>*>> out;
    for (const auto& [p, id] : bound_params_) {
      const Node& n = nodes_[static_cast<std::size_t>(id)];
      if (n.requires_grad && !n.grad.empty()) out.emplace_back(p, &n.grad);
    }
    return out;
  }

  // Adds this tape's parameter gradients into Parameter::grad.
  void AccumulateParamGrads() const {
    for (const auto& [p, g] : ParamGrads()) {
      if (!p->grad.SameShape(p->value)) p->ZeroGrad();
      for (std::size_t i = 0; i < g->size(); ++i) p->grad[i] += (*g)[i];
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<Real> value;
    const Tensor<Real>* external = nullptr;
    Tensor<Real> grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  Var<Real> Push(Tensor<Real> value, const Tensor<Real>* external,
                 bool requires_grad, BackwardFn backward) {
    Node n;
    n.value = std::move(value);
    n.external = external;
    n.requires_grad = requires_grad;
    n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return Var<Real>(this, static_cast<int>(nodes_.size() - 1));
  }

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter<Real>*, int> param_nodes_;
  std::vector<std::pair<Parameter<Real>*, int>> bound_params_;
};

}  // namespace dvcb

#endif  // DIFFCORE_TAPE_H_
