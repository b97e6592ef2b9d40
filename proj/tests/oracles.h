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


// Independent reference implementations shared by the unit tests and the
// acceptance suite.

#ifndef TESTS_ORACLES_H_
#define TESTS_ORACLES_H_

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "decode/beam_search.h"
#include "diffcore/rng.h"

namespace dvcb {

// Prefix-dependent random distributions, reproducible from a seed.
class ToyScorer : public Scorer {
 public:
  ToyScorer(int vocab, int first_dyn, std::uint64_t seed)
      : vocab_(vocab), first_dyn_(first_dyn), seed_(seed) {}

  int vocab_size() const override { return vocab_; }
  int first_dynamic() const override { return first_dyn_; }
  int sos() const override { return 0; }
  int eos() const override { return 1; }

  struct Prefix : State {
    std::vector<int> ids;
  };
  std::unique_ptr<State> Initial() const override { return std::make_unique<Prefix>(); }
  std::unique_ptr<State> Clone(const State& s) const override {
    return std::make_unique<Prefix>(static_cast<const Prefix&>(s));
  }
  std::vector<double> Step(State& s, int token) const override {
    auto& p = static_cast<Prefix&>(s);
    p.ids.push_back(token);
    return Distribution(p.ids);
  }

  std::vector<double> Distribution(const std::vector<int>& prefix) const {
    Rng rng(seed_);
    for (int id : prefix) rng = rng.Stream("t", static_cast<std::uint64_t>(id));
    std::vector<double> logits(static_cast<std::size_t>(vocab_));
    double mx = -1e300;
    for (auto& l : logits) {
      l = 2.0 * rng.Normal();
      mx = std::max(mx, l);
    }
    double sum = 0;
    for (double l : logits) sum += std::exp(l - mx);
    for (auto& l : logits) l -= mx + std::log(sum);
    return logits;
  }

 private:
  int vocab_, first_dyn_;
  std::uint64_t seed_;
};

struct Best {
  std::vector<int> ids;
  double adjusted = -1e300;
};

inline void Enumerate(const ToyScorer& s, double mu, int max_len, std::vector<int>& prefix,
               double adjusted, Best& best) {
  const auto lp = s.Distribution(prefix);
  const int emitted = static_cast<int>(prefix.size()) - 1;
  for (int y = 0; y < s.vocab_size(); ++y) {
    const double a = adjusted + lp[static_cast<std::size_t>(y)] + (y >= s.first_dynamic() ? mu : 0.0);
    if (y == s.eos()) {
      if (a > best.adjusted) {
        best.adjusted = a;
        best.ids = prefix;
        best.ids.push_back(y);
      }
    } else if (emitted + 1 < max_len) {
      prefix.push_back(y);
      Enumerate(s, mu, max_len, prefix, a, best);
      prefix.pop_back();
    }
  }
}

// Memoized recursive edit distance, independent of the tabulated version.
inline int BruteForce(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<int> memo((a.size() + 1) * (b.size() + 1), -1);
  std::function<int(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) {
    if (i == a.size()) return static_cast<int>(b.size() - j);
    if (j == b.size()) return static_cast<int>(a.size() - i);
    int& m = memo[i * (b.size() + 1) + j];
    if (m >= 0) return m;
    m = std::min({go(i + 1, j + 1) + (a[i] == b[j] ? 0 : 1), go(i + 1, j) + 1, go(i, j + 1) + 1});
    return m;
  };
  return go(0, 0);
}

// Every sequence over `alphabet` of length 0..max_len.
inline std::vector<std::vector<std::string>> AllSequences(
    const std::vector<std::string>& alphabet, std::size_t max_len) {
  std::vector<std::vector<std::string>> seqs{{}};
  for (std::size_t begin = 0, len = 1; len <= max_len; ++len) {
    const std::size_t end = seqs.size();
    for (std::size_t i = begin; i < end; ++i) {
      for (const auto& w : alphabet) {
        auto s = seqs[i];
        s.push_back(w);
        seqs.push_back(std::move(s));
      }
    }
    begin = end;
  }
  return seqs;
}

}  // namespace dvcb

#endif  // TESTS_ORACLES_H_
