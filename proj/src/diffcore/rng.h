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

#ifndef DIFFCORE_RNG_H_
#define DIFFCORE_RNG_H_

#include <cstdint>
#include <random>
#include <string_view>

namespace dvcb {

std::uint64_t SplitMix64(std::uint64_t x);
std::uint64_t Fnv1a64(std::string_view bytes);

// Seeded generator that can be split into independent named streams
// ("init", "dropout", "sampling", "datagen", ...). Splitting never advances
// the parent, so adding a consumer does not perturb the others.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(SplitMix64(seed)) {}

  Rng Stream(std::string_view name) const {
    return Rng(SplitMix64(seed_ ^ Fnv1a64(name)));
  }
  Rng Stream(std::string_view name, std::uint64_t index) const {
    return Rng(SplitMix64(Stream(name).seed_ + SplitMix64(index + 1)));
  }

  std::uint64_t seed() const { return seed_; }

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  // Uniform integer in [0, n).
  std::uint64_t Below(std::uint64_t n);
  // Uniform real in [0, 1).
  double Uniform();
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }
  double Normal();

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace dvcb

#endif  // DIFFCORE_RNG_H_
