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

#ifndef DATAGEN_CONFIG_JSON_H_
#define DATAGEN_CONFIG_JSON_H_

#include "datagen/lexicon.h"
#include "json.hpp"

namespace dvcb {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(
    DatagenConfig, num_words, num_unseen, num_units, feature_dim,
    zipf_exponent, noise_sigma, min_word_len, max_word_len, alphabet,
    utt_min_words, utt_max_words, unseen_per_utt_max, n_pretrain,
    n_bias_train, n_test_seen, n_test_unseen, frame_shift_s, rare_max_count)

}  // namespace dvcb

#endif  // DATAGEN_CONFIG_JSON_H_
