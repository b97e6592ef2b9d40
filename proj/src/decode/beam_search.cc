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

#include "decode/beam_search.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <tuple>

namespace dvcb {

namespace {

struct Live {
  Hypothesis hyp;
  std::unique_ptr<Scorer::State> state;
  std::vector<double> next;  // log-probabilities of the next token
};

double RankScore(const Hypothesis& h, bool len_norm) {
  if (!len_norm) return h.adjusted;
  const auto n = std::max<std::size_t>(h.ids.size() - 1, 1);
  return h.adjusted / static_cast<double>(n);
}

}  // namespace

void Validate(const BeamConfig& c) {
  if (c.beam < 1) throw std::invalid_argument("beam config: beam must be >= 1");
  if (c.max_steps < 1) throw std::invalid_argument("beam config: max_steps must be >= 1");
}

DecodeResult BeamSearch(const Scorer& scorer, const BeamConfig& config) {
  Validate(config);
  if (!config.monotone || config.beam == 1) return PlainBeamSearch(scorer, config);
  // Plain beam search can lose the best hypothesis when the beam widens.
  // Keeping the best result over all widths up to `beam` rules that out.
  DecodeResult best;
  int forwards = 0;
  bool have = false;
  for (int w = config.beam; w >= 1; --w) {
    BeamConfig c = config;
    c.beam = w;
    DecodeResult r = PlainBeamSearch(scorer, c);
    forwards += r.forwards;
    const auto key = [&](const DecodeResult& d) {
      return std::make_pair(!d.truncated, RankScore(d.best(), config.len_norm));
    };
    if (!have || key(r) > key(best)) {
      best = std::move(r);
      have = true;
    }
  }
  best.forwards = forwards;
  return best;
}

DecodeResult PlainBeamSearch(const Scorer& scorer, const BeamConfig& config) {
  Validate(config);
  const int vocab = scorer.vocab_size();
  const int first_dyn = scorer.first_dynamic();
  const auto beam = static_cast<std::size_t>(config.beam);
  DecodeResult result;

  std::vector<Live> running;
  {
    Live root;
    root.hyp.ids = {scorer.sos()};
    root.state = scorer.Initial();
    root.next = scorer.Step(*root.state, scorer.sos());
    ++result.forwards;
    running.push_back(std::move(root));
  }
  std::vector<Hypothesis> finished;

  for (int step = 1; step <= config.max_steps && !running.empty(); ++step) {
    // (score, hyp index, token); best score first, then lower index/token.
    std::vector<std::tuple<double, std::size_t, int>> cands;
    cands.reserve(running.size() * static_cast<std::size_t>(vocab));
    for (std::size_t h = 0; h < running.size(); ++h) {
      const auto& live = running[h];
      if (live.next.size() != static_cast<std::size_t>(vocab)) {
        throw std::logic_error("scorer returned a distribution of the wrong size");
      }
      for (int y = 0; y < vocab; ++y) {
        if (!std::isfinite(live.next[static_cast<std::size_t>(y)])) continue;
        const double bonus = y >= first_dyn ? config.mu : 0.0;
        cands.emplace_back(live.hyp.adjusted + live.next[static_cast<std::size_t>(y)] + bonus, h, y);
      }
    }
    const std::size_t keep = std::min(beam, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep),
                      cands.end(), [](const auto& a, const auto& b) {
                        if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
                        if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) < std::get<1>(b);
                        return std::get<2>(a) < std::get<2>(b);
                      });

    std::vector<Live> next_running;
    for (std::size_t c = 0; c < keep; ++c) {
      const auto [score, h, y] = cands[c];
      const Live& parent = running[h];
      Hypothesis hyp = parent.hyp;
      hyp.ids.push_back(y);
      hyp.logp += parent.next[static_cast<std::size_t>(y)];
      hyp.adjusted = score;
      if (y == scorer.eos()) {
        hyp.finished = true;
        finished.push_back(std::move(hyp));
        continue;
      }
      Live child;
      child.hyp = std::move(hyp);
      if (step < config.max_steps) {
        child.state = scorer.Clone(*parent.state);
        child.next = scorer.Step(*child.state, y);
        ++result.forwards;
      }
      next_running.push_back(std::move(child));
    }
    running = std::move(next_running);
    if (finished.size() >= beam) break;
  }

  if (finished.empty()) {
    result.truncated = true;
    for (auto& live : running) finished.push_back(live.hyp);
  }
  std::stable_sort(finished.begin(), finished.end(),
                   [&](const Hypothesis& a, const Hypothesis& b) {
                     return RankScore(a, config.len_norm) > RankScore(b, config.len_norm);
                   });
  result.hyps = std::move(finished);
  result.steps = static_cast<int>(result.best().ids.size()) - 1;
  return result;
}

DecodeResult GreedyDecode(const Scorer& scorer, double mu, int max_steps) {
  if (max_steps < 1) throw std::invalid_argument("greedy: max_steps must be >= 1");
  const int first_dyn = scorer.first_dynamic();
  DecodeResult result;
  Hypothesis hyp;
  hyp.ids = {scorer.sos()};
  auto state = scorer.Initial();
  int token = scorer.sos();
  for (int step = 1; step <= max_steps; ++step) {
    const auto lp = scorer.Step(*state, token);
    ++result.forwards;
    int best = 0;
    double best_score = lp[0] + (0 >= first_dyn ? mu : 0.0);
    for (int y = 1; y < static_cast<int>(lp.size()); ++y) {
      const double s = lp[static_cast<std::size_t>(y)] + (y >= first_dyn ? mu : 0.0);
      if (s > best_score) {
        best = y;
        best_score = s;
      }
    }
    hyp.ids.push_back(best);
    hyp.logp += lp[static_cast<std::size_t>(best)];
    hyp.adjusted = hyp.adjusted + lp[static_cast<std::size_t>(best)] +
                   (best >= first_dyn ? mu : 0.0);
    token = best;
    if (best == scorer.eos()) {
      hyp.finished = true;
      break;
    }
  }
  result.truncated = !hyp.finished;
  result.steps = static_cast<int>(hyp.ids.size()) - 1;
  result.hyps.push_back(std::move(hyp));
  return result;
}

std::string ExpandHypothesis(const std::vector<int>& ids,
                             const DynamicVocab& dyn,
                             const StaticVocab& vocab) {
  return vocab.Detokenize(dyn.Expand(ids));
}

ModelScorer::ModelScorer(const IncrementalDecoder<float>& decoder,
                         const IncrementalDecoder<float>::Memory& memory,
                         const BiasCache<float>* bias)
    : decoder_(decoder),
      memory_(memory),
      bias_(decoder.extended() ? bias : nullptr),
      vocab_size_(decoder.vocab_size() +
                  (bias_ ? static_cast<int>(bias_->size()) : 0)) {}

std::unique_ptr<Scorer::State> ModelScorer::Initial() const {
  auto s = std::make_unique<DecState>();
  s->inner = decoder_.Start();
  return s;
}

std::unique_ptr<Scorer::State> ModelScorer::Clone(const State& s) const {
  return std::make_unique<DecState>(static_cast<const DecState&>(s));
}

std::vector<double> ModelScorer::Step(State& s, int token) const {
  auto& inner = static_cast<DecState&>(s).inner;
  const auto lp = decoder_.Step(memory_, bias_, inner, token);
  std::vector<double> out(lp.begin(), lp.end());
  // Tokens that would run past the position table are unreachable.
  for (int t = 0; t < static_cast<int>(out.size()); ++t) {
    if (t != eos() && !decoder_.Fits(bias_, inner, t)) {
      out[static_cast<std::size_t>(t)] = -std::numeric_limits<double>::infinity();
    }
  }
  return out;
}

}  // namespace dvcb
