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

#ifndef DIFFCORE_TENSOR_H_
#define DIFFCORE_TENSOR_H_

#include <algorithm>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dvcb {

// Dense row-major array. Two-dimensional views treat the first extent as
// rows and the product of the remaining extents as columns.
template <typename Real>
class Tensor {
 public:
  using value_type = Real;

  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape, Real fill = Real(0))
      : shape_(std::move(shape)), data_(NumElements(shape_), fill) {}

  Tensor(std::size_t rows, std::size_t cols, Real fill = Real(0))
      : Tensor(std::vector<std::size_t>{rows, cols}, fill) {}

  static Tensor FromData(std::vector<std::size_t> shape,
                         std::vector<Real> data) {
    if (NumElements(shape) != data.size()) {
      throw std::invalid_argument("Tensor: data length " +
                                  std::to_string(data.size()) +
                                  " does not match shape");
    }
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = std::move(data);
    return t;
  }

  static Tensor Matrix(std::size_t rows, std::size_t cols,
                       std::vector<Real> data) {
    return FromData({rows, cols}, std::move(data));
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return shape_.empty(); }

  std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
  std::size_t cols() const {
    if (shape_.empty()) return 0;
    std::size_t c = 1;
    for (std::size_t i = 1; i < shape_.size(); ++i) c *= shape_[i];
    return c;
  }

  Real* data() { return data_.data(); }
  const Real* data() const { return data_.data(); }
  std::span<Real> span() { return data_; }
  std::span<const Real> span() const { return data_; }
  std::vector<Real>& vec() { return data_; }
  const std::vector<Real>& vec() const { return data_; }

  Real& operator[](std::size_t i) { return data_[i]; }
  const Real& operator[](std::size_t i) const { return data_[i]; }
  Real& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  const Real& at(std::size_t r, std::size_t c) const {
    return data_[r * cols() + c];
  }

  std::span<Real> row(std::size_t r) {
    const std::size_t c = cols();
    return std::span<Real>(data_).subspan(r * c, c);
  }
  std::span<const Real> row(std::size_t r) const {
    const std::size_t c = cols();
    return std::span<const Real>(data_).subspan(r * c, c);
  }

  void Fill(Real v) { std::fill(data_.begin(), data_.end(), v); }

  bool SameShape(const Tensor& o) const { return shape_ == o.shape_; }

  template <typename To>
  Tensor<To> Cast() const {
    std::vector<To> out(data_.begin(), data_.end());
    return Tensor<To>::FromData(shape_, std::move(out));
  }

  static std::size_t NumElements(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           std::multiplies<>());
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<Real> data_;
};

std::string ShapeString(const std::vector<std::size_t>& shape);

}  // namespace dvcb

#endif  // DIFFCORE_TENSOR_H_
