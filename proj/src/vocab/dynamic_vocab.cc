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

#include "vocab/dynamic_vocab.h"

#include <algorithm>
#include <fstream>
#include <stdexcept>
#include <unordered_set>

namespace dvcb {

DynamicVocab DynamicVocab::Build(const std::vector<std::string>& words,
                                 const StaticVocab& vocab) {
  DynamicVocab dyn;
  dyn.base_ = vocab.size();
  dyn.word_start_ = vocab.word_start_flags();
  dyn.by_first_.resize(static_cast<std::size_t>(vocab.size()));
  std::unordered_set<std::string> seen;
  for (const std::string& w : words) {
    if (w.empty()) throw std::invalid_argument("biasing word is empty");
    if (SplitWords(w).size() != 1) {
      throw std::invalid_argument("biasing word '" + w +
                                  "' must be a single word");
    }
    if (!seen.insert(w).second) continue;
    BiasingWord bw;
    bw.surface = w;
    bw.subword_ids = vocab.Tokenize(w);
    bool content = false;
    for (int id : bw.subword_ids) {
      if (vocab.IsSpecial(id)) {
        throw std::invalid_argument("biasing word '" + w +
                                    "' tokenizes to special tokens");
      }
      content = content || vocab.token(id) != kBoundary;
    }
    if (!content) {
      throw std::invalid_argument("biasing word '" + w +
                                  "' has no content tokens");
    }
    dyn.words_.push_back(std::move(bw));
  }
  for (int n = 0; n < dyn.size(); ++n) {
    const int first = dyn.words_[static_cast<std::size_t>(n)].subword_ids[0];
    dyn.by_first_[static_cast<std::size_t>(first)].push_back(n);
  }
  for (auto& cands : dyn.by_first_) {
    std::stable_sort(cands.begin(), cands.end(), [&](int a, int b) {
      return dyn.words_[static_cast<std::size_t>(a)].subword_ids.size() >
             dyn.words_[static_cast<std::size_t>(b)].subword_ids.size();
    });
  }
  return dyn;
}

int DynamicVocab::Find(const std::string& surface) const {
  for (int n = 0; n < size(); ++n) {
    if (words_[static_cast<std::size_t>(n)].surface == surface) return n;
  }
  return -1;
}

bool DynamicVocab::EndsOnBoundary(const std::vector<int>& ids,
                                  std::size_t end) const {
  if (end >= ids.size()) return true;
  const int next = ids[end];
  if (next < 0 || next >= base_) return true;
  return next < kNumSpecials || word_start_[static_cast<std::size_t>(next)];
}

std::vector<int> DynamicVocab::RewriteLabels(
    const std::vector<int>& ref_ids) const {
  if (words_.empty()) return ref_ids;
  std::vector<int> out;
  out.reserve(ref_ids.size());
  std::size_t i = 0;
  while (i < ref_ids.size()) {
    const int id = ref_ids[i];
    int match = -1;
    if (id >= 0 && id < base_ && word_start_[static_cast<std::size_t>(id)]) {
      for (int n : by_first_[static_cast<std::size_t>(id)]) {
        const auto& span = words_[static_cast<std::size_t>(n)].subword_ids;
        if (i + span.size() > ref_ids.size()) continue;
        if (!std::equal(span.begin(), span.end(), ref_ids.begin() + i)) continue;
        if (!EndsOnBoundary(ref_ids, i + span.size())) continue;
        match = n;
        break;
      }
    }
    if (match >= 0) {
      out.push_back(ExtendedId(match));
      i += words_[static_cast<std::size_t>(match)].subword_ids.size();
    } else {
      out.push_back(id);
      ++i;
    }
  }
  return out;
}

std::vector<int> DynamicVocab::Expand(const std::vector<int>& ext_ids) const {
  std::vector<int> out;
  out.reserve(ext_ids.size());
  for (int id : ext_ids) {
    if (id < 0 || id >= extended_size()) {
      throw std::out_of_range("expand: id " + std::to_string(id) +
                              " outside extended vocabulary of size " +
                              std::to_string(extended_size()));
    }
    if (id < base_) {
      out.push_back(id);
    } else {
      const auto& span = words_[static_cast<std::size_t>(id - base_)].subword_ids;
      out.insert(out.end(), span.begin(), span.end());
    }
  }
  return out;
}

std::vector<std::string> DynamicVocab::Surfaces() const {
  std::vector<std::string> out;
  for (const auto& w : words_) out.push_back(w.surface);
  return out;
}

std::vector<std::string> LoadWordList(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open biasing list " + path);
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!SplitWords(line).empty()) words.push_back(SplitWords(line)[0]);
  }
  return words;
}

void SaveWordList(const std::string& path,
                  const std::vector<std::string>& words) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write biasing list " + path);
  for (const auto& w : words) out << w << '\n';
}

std::vector<int> DynamicVocab::Widths() const {
  std::vector<int> out;
  out.reserve(words_.size());
  for (const auto& w : words_) out.push_back(static_cast<int>(w.subword_ids.size()));
  return out;
}

}  // namespace dvcb
