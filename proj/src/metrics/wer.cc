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

#include "metrics/wer.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace dvcb {

int Alignment::cost() const {
  int c = 0;
  for (const auto& p : ops) c += p.op == EditOp::kMatch ? 0 : 1;
  return c;
}

Alignment Align(const std::vector<std::string>& ref,
                const std::vector<std::string>& hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<int> dp((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> int& { return dp[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = static_cast<int>(i);
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = static_cast<int>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const int diag = at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      at(i, j) = std::min({diag, at(i - 1, j) + 1, at(i, j - 1) + 1});
    }
  }
  Alignment a;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    const int here = at(i, j);
    if (i > 0 && j > 0 && ref[i - 1] == hyp[j - 1] && here == at(i - 1, j - 1)) {
      a.ops.push_back({EditOp::kMatch, ref[i - 1], hyp[j - 1]});
      --i, --j;
    } else if (i > 0 && j > 0 && here == at(i - 1, j - 1) + 1) {
      a.ops.push_back({EditOp::kSubstitute, ref[i - 1], hyp[j - 1]});
      --i, --j;
    } else if (i > 0 && here == at(i - 1, j) + 1) {
      a.ops.push_back({EditOp::kDelete, ref[i - 1], ""});
      --i;
    } else {
      a.ops.push_back({EditOp::kInsert, "", hyp[j - 1]});
      --j;
    }
  }
  std::reverse(a.ops.begin(), a.ops.end());
  return a;
}

std::vector<std::string> Replay(const Alignment& a) {
  std::vector<std::string> out;
  for (const auto& p : a.ops) {
    if (p.op != EditOp::kDelete) out.push_back(p.op == EditOp::kMatch ? p.ref : p.hyp);
  }
  return out;
}

ErrorCounts& ErrorCounts::operator+=(const ErrorCounts& o) {
  ref_words += o.ref_words;
  sub += o.sub;
  del += o.del;
  ins += o.ins;
  return *this;
}

ErrorCounts Count(const Alignment& a) {
  ErrorCounts c;
  for (const auto& p : a.ops) {
    switch (p.op) {
      case EditOp::kMatch:
        ++c.ref_words;
        break;
      case EditOp::kSubstitute:
        ++c.ref_words;
        ++c.sub;
        break;
      case EditOp::kDelete:
        ++c.ref_words;
        ++c.del;
        break;
      case EditOp::kInsert:
        ++c.ins;
        break;
    }
  }
  return c;
}

double Rate(const ErrorCounts& c) {
  if (c.ref_words == 0) return std::numeric_limits<double>::quiet_NaN();
  return static_cast<double>(c.errors()) / static_cast<double>(c.ref_words);
}

double Wer(const std::vector<Alignment>& alignments) {
  ErrorCounts total;
  for (const auto& a : alignments) total += Count(a);
  if (total.ref_words == 0) throw std::invalid_argument("wer: no reference words");
  return Rate(total);
}

BiasedSplit SplitByList(const Alignment& a,
                        const std::unordered_set<std::string>& list) {
  BiasedSplit s;
  for (const auto& p : a.ops) {
    const bool in_list = list.count(p.op == EditOp::kInsert ? p.hyp : p.ref) > 0;
    ErrorCounts& c = in_list ? s.biased : s.unbiased;
    switch (p.op) {
      case EditOp::kMatch:
        ++c.ref_words;
        break;
      case EditOp::kSubstitute:
        ++c.ref_words;
        ++c.sub;
        break;
      case EditOp::kDelete:
        ++c.ref_words;
        ++c.del;
        break;
      case EditOp::kInsert:
        ++c.ins;
        break;
    }
  }
  return s;
}

std::string FormatPercent(double rate) {
  if (std::isnan(rate)) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", 100.0 * rate);
  return buf;
}

std::string FormatPair(double wer, double b_wer) {
  return FormatPercent(wer) + " (" + FormatPercent(b_wer) + ")";
}

double RealTimeFactor(double decode_seconds, double audio_seconds) {
  if (!(audio_seconds > 0)) throw std::invalid_argument("rtf: audio duration must be > 0");
  return decode_seconds / audio_seconds;
}

double Median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::string RenderTable(const std::vector<std::string>& header,
                        const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size() && c < width.size(); ++c) {
      width[c] = std::max(width[c], r[c].size());
    }
  }
  std::ostringstream out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < width.size(); ++c) {
      const std::string cell = c < cells.size() ? cells[c] : "";
      out << (c ? "  " : "") << cell << std::string(width[c] - cell.size(), ' ');
    }
    out << '\n';
  };
  line(header);
  std::size_t total = 0;
  for (auto w : width) total += w;
  out << std::string(total + 2 * (width.size() - 1), '-') << '\n';
  for (const auto& r : rows) line(r);
  return out.str();
}

}  // namespace dvcb
