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

#ifndef DATAGEN_LEXICON_H_
#define DATAGEN_LEXICON_H_

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "diffcore/rng.h"
#include "diffcore/tensor.h"

namespace dvcb {

struct DatagenConfig {
  int num_words = 200;
  int num_unseen = 40;
  // Acoustic unit types; unit 0 is the inter-word silence, letters map onto
  // units 1..num_units-1.
  int num_units = 12;
  int feature_dim = 32;
  double zipf_exponent = 1.0;
  double noise_sigma = 0.3;
  int min_word_len = 3;
  int max_word_len = 6;
  std::string alphabet = "abcdefghijklmnopqrstuvwxyz";
  int utt_min_words = 3;
  int utt_max_words = 10;
  int unseen_per_utt_max = 2;
  int n_pretrain = 2000;
  int n_bias_train = 1000;
  int n_test_seen = 150;
  int n_test_unseen = 150;
  double frame_shift_s = 0.01;
  // Words occurring at most this often in the pretrain text count as
  // biasing targets (unseen words have count 0).
  int rare_max_count = 0;
};

void Validate(const DatagenConfig& config);

// Spelling -> acoustic unit sequence through a seeded letter -> unit code.
// The code is many-to-one, so spelling is not recoverable from acoustics.
class Lexicon {
 public:
  static Lexicon Build(const DatagenConfig& config, std::uint64_t seed);
  // Same spellings and frequencies, fresh letter -> unit code drawn from
  // `map_seed`.
  static Lexicon Remap(const Lexicon& base, std::uint64_t map_seed);

  int size() const { return static_cast<int>(words_.size()); }
  const std::vector<std::string>& words() const { return words_; }
  const std::string& word(int i) const { return words_.at(i); }
  int Find(const std::string& word) const;
  bool Contains(const std::string& word) const { return Find(word) >= 0; }

  bool IsUnseen(int i) const { return unseen_.at(i) != 0; }
  // Zipf sampling weight; 0 for unseen words.
  double Weight(int i) const { return weights_.at(i); }
  const std::vector<int>& Units(int i) const { return units_.at(i); }
  const std::vector<int>& Units(const std::string& word) const;

  std::vector<int> SeenIds() const;
  std::vector<int> UnseenIds() const;

  int num_units() const { return num_units_; }
  int feature_dim() const { return static_cast<int>(unit_means_.cols()); }
  const Tensor<float>& unit_means() const { return unit_means_; }
  const std::unordered_map<char, int>& letter_units() const {
    return letter_units_;
  }
  double zipf_exponent() const { return zipf_exponent_; }
  std::uint64_t seed() const { return seed_; }

  // JSON serialization (spellings, flags, weights, code, unit means).
  std::string ToJson() const;
  static Lexicon FromJson(const std::string& json);

 private:
  void ComputeUnits();
  bool Injective() const;

  std::vector<std::string> words_;
  std::vector<unsigned char> unseen_;
  std::vector<double> weights_;
  std::vector<std::vector<int>> units_;
  std::unordered_map<std::string, int> index_;
  std::unordered_map<char, int> letter_units_;
  Tensor<float> unit_means_;
  int num_units_ = 0;
  double zipf_exponent_ = 1.0;
  std::uint64_t seed_ = 0;
};

}  // namespace dvcb

#endif  // DATAGEN_LEXICON_H_
