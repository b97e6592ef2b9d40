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

#include "datagen/lexicon.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

#include "json.hpp"

namespace dvcb {

namespace {

constexpr int kMaxCodeAttempts = 1000;

template <typename T>
void Shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[rng.Below(i)]);
  }
}

// Balanced random code: shuffled letters dealt round-robin onto units
// 1..num_units-1.
std::unordered_map<char, int> DrawLetterCode(const std::string& alphabet,
                                             int num_units, Rng rng) {
  std::vector<char> letters(alphabet.begin(), alphabet.end());
  Shuffle(letters, rng);
  std::unordered_map<char, int> code;
  for (std::size_t i = 0; i < letters.size(); ++i) {
    code[letters[i]] = 1 + static_cast<int>(i % static_cast<std::size_t>(num_units - 1));
  }
  return code;
}

}  // namespace

void Validate(const DatagenConfig& c) {
  auto fail = [](const std::string& m) { throw std::invalid_argument("datagen: " + m); };
  if (c.num_words < 50) fail("num_words must be >= 50");
  if (c.num_units < 8) fail("num_units must be >= 8");
  if (c.num_unseen < 0 || c.num_unseen >= c.num_words) {
    fail("unseen subset must be smaller than the lexicon");
  }
  if (c.min_word_len < 1 || c.max_word_len < c.min_word_len) {
    fail("bad word length bounds");
  }
  if (c.utt_min_words < 1 || c.utt_max_words < c.utt_min_words) {
    fail("bad utterance length bounds");
  }
  if (c.feature_dim < 1) fail("feature_dim must be positive");
  if (c.noise_sigma < 0) fail("noise_sigma must be nonnegative");
  if (c.alphabet.empty()) fail("empty alphabet");
  if (c.frame_shift_s <= 0) fail("frame_shift_s must be positive");
  if (c.unseen_per_utt_max < 1 || c.unseen_per_utt_max > c.utt_min_words) {
    fail("unseen_per_utt_max must be in [1, utt_min_words]");
  }
}

Lexicon Lexicon::Build(const DatagenConfig& config, std::uint64_t seed) {
  Validate(config);
  Rng root = Rng(seed).Stream("datagen").Stream("lexicon");
  Lexicon lex;
  lex.seed_ = seed;
  lex.num_units_ = config.num_units;
  lex.zipf_exponent_ = config.zipf_exponent;

  Rng spell = root.Stream("spelling");
  std::unordered_set<std::string> used;
  const auto span = static_cast<std::uint64_t>(config.max_word_len - config.min_word_len + 1);
  while (static_cast<int>(lex.words_.size()) < config.num_words) {
    const int len = config.min_word_len + static_cast<int>(spell.Below(span));
    std::string w;
    for (int i = 0; i < len; ++i) {
      w += config.alphabet[spell.Below(config.alphabet.size())];
    }
    if (used.insert(w).second) lex.words_.push_back(w);
  }

  Rng split = root.Stream("unseen");
  std::vector<int> order(static_cast<std::size_t>(config.num_words));
  std::iota(order.begin(), order.end(), 0);
  Shuffle(order, split);
  lex.unseen_.assign(order.size(), 0);
  for (int i = 0; i < config.num_unseen; ++i) lex.unseen_[order[i]] = 1;

  // Zipf rank over seen words in a random order.
  Rng rank = root.Stream("zipf");
  std::vector<int> seen;
  for (int i = 0; i < config.num_words; ++i) {
    if (!lex.unseen_[i]) seen.push_back(i);
  }
  Shuffle(seen, rank);
  lex.weights_.assign(order.size(), 0.0);
  for (std::size_t r = 0; r < seen.size(); ++r) {
    lex.weights_[seen[r]] =
        std::pow(static_cast<double>(r + 1), -config.zipf_exponent);
  }

  Rng means = root.Stream("unit_means");
  lex.unit_means_ = Tensor<float>(static_cast<std::size_t>(config.num_units),
                                  static_cast<std::size_t>(config.feature_dim));
  for (auto& v : lex.unit_means_.vec()) v = static_cast<float>(means.Normal());

  for (int i = 0; i < config.num_words; ++i) lex.index_[lex.words_[i]] = i;

  for (int attempt = 0;; ++attempt) {
    if (attempt == kMaxCodeAttempts) {
      throw std::runtime_error("lexicon: no injective letter code found");
    }
    lex.letter_units_ = DrawLetterCode(
        config.alphabet, config.num_units,
        root.Stream("unit_map", static_cast<std::uint64_t>(attempt)));
    lex.ComputeUnits();
    if (lex.Injective()) break;
  }
  return lex;
}

Lexicon Lexicon::Remap(const Lexicon& base, std::uint64_t map_seed) {
  Lexicon lex = base;
  std::string alphabet;
  std::vector<char> letters;
  for (const auto& [c, u] : base.letter_units_) letters.push_back(c);
  std::sort(letters.begin(), letters.end());
  alphabet.assign(letters.begin(), letters.end());
  Rng root = Rng(map_seed).Stream("datagen").Stream("remap");
  for (int attempt = 0;; ++attempt) {
    if (attempt == kMaxCodeAttempts) {
      throw std::runtime_error("lexicon: no injective letter code found");
    }
    lex.letter_units_ =
        DrawLetterCode(alphabet, base.num_units_,
                       root.Stream("unit_map", static_cast<std::uint64_t>(attempt)));
    lex.ComputeUnits();
    if (lex.Injective()) break;
  }
  return lex;
}

void Lexicon::ComputeUnits() {
  units_.assign(words_.size(), {});
  for (std::size_t i = 0; i < words_.size(); ++i) {
    for (char c : words_[i]) units_[i].push_back(letter_units_.at(c));
  }
}

bool Lexicon::Injective() const {
  std::set<std::vector<int>> codes(units_.begin(), units_.end());
  return codes.size() == units_.size();
}

int Lexicon::Find(const std::string& word) const {
  auto it = index_.find(word);
  return it == index_.end() ? -1 : it->second;
}

const std::vector<int>& Lexicon::Units(const std::string& word) const {
  const int i = Find(word);
  if (i < 0) throw std::invalid_argument("word '" + word + "' not in lexicon");
  return units_[static_cast<std::size_t>(i)];
}

std::vector<int> Lexicon::SeenIds() const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i) {
    if (!unseen_[i]) out.push_back(i);
  }
  return out;
}

std::vector<int> Lexicon::UnseenIds() const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i) {
    if (unseen_[i]) out.push_back(i);
  }
  return out;
}

std::string Lexicon::ToJson() const {
  nlohmann::json j;
  j["seed"] = seed_;
  j["num_units"] = num_units_;
  j["zipf_exponent"] = zipf_exponent_;
  j["words"] = words_;
  std::vector<int> unseen(unseen_.begin(), unseen_.end());
  j["unseen"] = unseen;
  j["weights"] = weights_;
  std::map<std::string, int> code;
  for (const auto& [c, u] : letter_units_) code[std::string(1, c)] = u;
  j["letter_units"] = code;
  j["unit_means"] = {{"rows", unit_means_.rows()},
                     {"cols", unit_means_.cols()},
                     {"data", unit_means_.vec()}};
  return j.dump();
}

Lexicon Lexicon::FromJson(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  Lexicon lex;
  lex.seed_ = j.at("seed").get<std::uint64_t>();
  lex.num_units_ = j.at("num_units").get<int>();
  lex.zipf_exponent_ = j.at("zipf_exponent").get<double>();
  lex.words_ = j.at("words").get<std::vector<std::string>>();
  const auto unseen = j.at("unseen").get<std::vector<int>>();
  lex.unseen_.assign(unseen.begin(), unseen.end());
  lex.weights_ = j.at("weights").get<std::vector<double>>();
  for (const auto& [c, u] : j.at("letter_units").items()) {
    lex.letter_units_[c.at(0)] = u.get<int>();
  }
  const auto& m = j.at("unit_means");
  lex.unit_means_ = Tensor<float>::Matrix(m.at("rows").get<std::size_t>(),
                                          m.at("cols").get<std::size_t>(),
                                          m.at("data").get<std::vector<float>>());
  for (int i = 0; i < lex.size(); ++i) lex.index_[lex.words_[i]] = i;
  lex.ComputeUnits();
  if (lex.unseen_.size() != lex.words_.size() ||
      lex.weights_.size() != lex.words_.size()) {
    throw std::invalid_argument("lexicon json: inconsistent field lengths");
  }
  return lex;
}

}  // namespace dvcb
