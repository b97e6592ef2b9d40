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

#ifndef VOCAB_STATIC_VOCAB_H_
#define VOCAB_STATIC_VOCAB_H_

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace dvcb {

// Word-boundary marker (U+2581), carried as a prefix on word-initial tokens.
inline constexpr std::string_view kBoundary = "\xe2\x96\x81";

// Fixed special ids.
inline constexpr int kSos = 0;
inline constexpr int kEos = 1;
inline constexpr int kPad = 2;
inline constexpr int kUnk = 3;
inline constexpr int kNumSpecials = 4;

// Static subword inventory. Ids are dense in [0, K); ids 0..3 are
// <sos>, <eos>, <pad>, <unk>.
class StaticVocab {
 public:
  // Character-level inventory: specials, the bare boundary marker, then for
  // every character c both the word-initial token "<marker>c" and the
  // word-internal token "c".
  static StaticVocab CharacterLevel(std::string_view alphabet);

  // Tokens in id order; the first four must be the specials.
  static StaticVocab FromTokens(std::vector<std::string> tokens);

  // One token per line, line index = id.
  static StaticVocab Load(const std::string& path);
  void Save(const std::string& path) const;

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::string& token(int id) const { return tokens_.at(id); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  // -1 when absent.
  int Find(std::string_view token) const;

  bool IsSpecial(int id) const { return id >= 0 && id < kNumSpecials; }
  // True for tokens that open a word (start with the boundary marker).
  bool IsWordStart(int id) const {
    return id >= 0 && id < size() && word_start_[id] != 0;
  }
  const std::vector<unsigned char>& word_start_flags() const {
    return word_start_;
  }

  // Greedy longest-match segmentation of each whitespace-separated word,
  // with the boundary marker prepended. Unknown code points map to <unk>.
  std::vector<int> Tokenize(std::string_view text) const;
  // Concatenates tokens, turning markers into spaces; specials are dropped.
  std::string Detokenize(const std::vector<int>& ids) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  std::vector<unsigned char> word_start_;
  std::size_t max_token_bytes_ = 0;
};

std::vector<std::string> SplitWords(std::string_view text);

}  // namespace dvcb

#endif  // VOCAB_STATIC_VOCAB_H_
