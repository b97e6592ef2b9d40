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

#ifndef VOCAB_DYNAMIC_VOCAB_H_
#define VOCAB_DYNAMIC_VOCAB_H_

#include <string>
#include <vector>

#include "vocab/static_vocab.h"

namespace dvcb {

struct BiasingWord {
  std::string surface;
  std::vector<int> subword_ids;
};

// Biasing list mapped onto single dynamic tokens: entry n has extended id
// K + n. Immutable after construction.
class DynamicVocab {
 public:
  DynamicVocab() = default;

  // Deduplicates (first occurrence wins) and tokenizes each word. Rejects
  // words that are empty, contain whitespace, or tokenize to anything
  // containing special ids.
  static DynamicVocab Build(const std::vector<std::string>& words,
                            const StaticVocab& vocab);

  int base() const { return base_; }
  int size() const { return static_cast<int>(words_.size()); }
  int extended_size() const { return base_ + size(); }
  bool empty() const { return words_.empty(); }
  const std::vector<BiasingWord>& words() const { return words_; }
  const BiasingWord& word(int n) const { return words_.at(n); }

  bool IsDynamic(int id) const { return id >= base_; }
  int ExtendedId(int n) const { return base_ + n; }
  // -1 when absent.
  int Find(const std::string& surface) const;

  // Leftmost-first, longest-match replacement of complete biasing-word spans
  // that start and end on word boundaries.
  std::vector<int> RewriteLabels(const std::vector<int>& ref_ids) const;
  // Inverse of RewriteLabels: dynamic ids back to their subword spans.
  std::vector<int> Expand(const std::vector<int>& ext_ids) const;

  std::vector<std::string> Surfaces() const;
  // Subword count of each entry, in dynamic-id order.
  std::vector<int> Widths() const;

 private:
  bool EndsOnBoundary(const std::vector<int>& ids, std::size_t end) const;

  int base_ = 0;
  std::vector<BiasingWord> words_;
  std::vector<unsigned char> word_start_;
  // Per first subword id: candidate entries, longest span first.
  std::vector<std::vector<int>> by_first_;
};

// One word per line, blank lines skipped.
std::vector<std::string> LoadWordList(const std::string& path);
void SaveWordList(const std::string& path,
                  const std::vector<std::string>& words);

}  // namespace dvcb

#endif  // VOCAB_DYNAMIC_VOCAB_H_
