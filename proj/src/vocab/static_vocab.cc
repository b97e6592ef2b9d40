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

#include "vocab/static_vocab.h"

#include <algorithm>
#include <fstream>
#include <stdexcept>

namespace dvcb {

namespace {

const char* const kSpecialNames[kNumSpecials] = {"<sos>", "<eos>", "<pad>",
                                                 "<unk>"};

std::size_t Utf8Length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xe) return 3;
  if ((lead >> 3) == 0x1e) return 4;
  return 1;
}

}  // namespace

std::vector<std::string> SplitWords(std::string_view text) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t' ||
                               text[i] == '\n' || text[i] == '\r')) {
      ++i;
    }
    std::size_t j = i;
    while (j < text.size() && text[j] != ' ' && text[j] != '\t' &&
           text[j] != '\n' && text[j] != '\r') {
      ++j;
    }
    if (j > i) words.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return words;
}

StaticVocab StaticVocab::CharacterLevel(std::string_view alphabet) {
  std::vector<std::string> tokens(kSpecialNames, kSpecialNames + kNumSpecials);
  tokens.emplace_back(kBoundary);
  std::vector<std::string> chars;
  for (std::size_t i = 0; i < alphabet.size();) {
    const std::size_t len = Utf8Length(static_cast<unsigned char>(alphabet[i]));
    chars.emplace_back(alphabet.substr(i, len));
    i += len;
  }
  for (const auto& c : chars) tokens.push_back(std::string(kBoundary) + c);
  for (const auto& c : chars) tokens.push_back(c);
  return FromTokens(std::move(tokens));
}

StaticVocab StaticVocab::FromTokens(std::vector<std::string> tokens) {
  if (tokens.size() < kNumSpecials) {
    throw std::invalid_argument("vocab: fewer than four tokens");
  }
  for (int i = 0; i < kNumSpecials; ++i) {
    if (tokens[i] != kSpecialNames[i]) {
      throw std::invalid_argument("vocab: id " + std::to_string(i) +
                                  " must be " + kSpecialNames[i]);
    }
  }
  StaticVocab v;
  v.tokens_ = std::move(tokens);
  v.word_start_.assign(v.tokens_.size(), 0);
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    const std::string& t = v.tokens_[i];
    if (t.empty()) throw std::invalid_argument("vocab: empty token");
    if (!v.index_.emplace(t, static_cast<int>(i)).second) {
      throw std::invalid_argument("vocab: duplicate token '" + t + "'");
    }
    if (i >= kNumSpecials) {
      v.word_start_[i] = t.compare(0, kBoundary.size(), kBoundary) == 0;
      v.max_token_bytes_ = std::max(v.max_token_bytes_, t.size());
    }
  }
  return v;
}

StaticVocab StaticVocab::Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("vocab: cannot open " + path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return FromTokens(std::move(tokens));
}

void StaticVocab::Save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("vocab: cannot write " + path);
  for (const auto& t : tokens_) out << t << '\n';
}

int StaticVocab::Find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? -1 : it->second;
}

std::vector<int> StaticVocab::Tokenize(std::string_view text) const {
  std::vector<int> ids;
  for (const std::string& word : SplitWords(text)) {
    const std::string s = std::string(kBoundary) + word;
    std::size_t pos = 0;
    while (pos < s.size()) {
      int best = -1;
      std::size_t best_len = 0;
      const std::size_t limit = std::min(max_token_bytes_, s.size() - pos);
      for (std::size_t len = limit; len > 0; --len) {
        auto it = index_.find(s.substr(pos, len));
        if (it != index_.end() && it->second >= kNumSpecials) {
          best = it->second;
          best_len = len;
          break;
        }
      }
      if (best < 0) {
        best = kUnk;
        best_len = Utf8Length(static_cast<unsigned char>(s[pos]));
      }
      ids.push_back(best);
      pos += best_len;
    }
  }
  return ids;
}

std::string StaticVocab::Detokenize(const std::vector<int>& ids) const {
  std::string out;
  for (int id : ids) {
    if (id < 0 || id >= size()) {
      throw std::out_of_range("detokenize: id " + std::to_string(id) +
                              " outside static vocabulary");
    }
    if (IsSpecial(id)) continue;
    const std::string& t = tokens_[static_cast<std::size_t>(id)];
    if (word_start_[static_cast<std::size_t>(id)]) {
      if (!out.empty()) out += ' ';
      out.append(t, kBoundary.size(), std::string::npos);
    } else {
      out += t;
    }
  }
  return out;
}

}  // namespace dvcb
