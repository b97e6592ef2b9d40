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

#ifndef METRICS_WER_H_
#define METRICS_WER_H_

#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "json.hpp"

namespace dvcb {

enum class EditOp { kMatch, kSubstitute, kDelete, kInsert };

struct AlignedPair {
  EditOp op;
  std::string ref;  // empty for insertions
  std::string hyp;  // empty for deletions
};

struct Alignment {
  std::vector<AlignedPair> ops;
  int cost() const;
};

// Minimal-edit alignment. Among equal-cost paths the backtrace prefers
// match, then substitution, then deletion, then insertion.
Alignment Align(const std::vector<std::string>& ref,
                const std::vector<std::string>& hyp);

// Applies the alignment to its reference, yielding the hypothesis.
std::vector<std::string> Replay(const Alignment& a);

struct ErrorCounts {
  long ref_words = 0;
  long sub = 0;
  long del = 0;
  long ins = 0;

  long errors() const { return sub + del + ins; }
  ErrorCounts& operator+=(const ErrorCounts& o);
};

ErrorCounts Count(const Alignment& a);

// Errors over a set of alignments divided by their reference words.
// Throws std::invalid_argument when there are no reference words.
double Wer(const std::vector<Alignment>& alignments);
double Rate(const ErrorCounts& c);

// Substitutions and deletions are attributed by the reference word's list
// membership, insertions by the hypothesis word's.
struct BiasedSplit {
  ErrorCounts biased;
  ErrorCounts unbiased;
};

BiasedSplit SplitByList(const Alignment& a,
                        const std::unordered_set<std::string>& list);

// Percent with one decimal, or "n/a" when the rate is undefined (NaN).
std::string FormatPercent(double rate);
// "WER (B-WER)", e.g. "3.9 (15.5)".
std::string FormatPair(double wer, double b_wer);

// Summed decode wall time over summed audio duration.
double RealTimeFactor(double decode_seconds, double audio_seconds);
double Median(std::vector<double> values);

// Rows of labelled cells, columns padded to a common width.
std::string RenderTable(const std::vector<std::string>& header,
                        const std::vector<std::vector<std::string>>& rows);

}  // namespace dvcb

#endif  // METRICS_WER_H_
