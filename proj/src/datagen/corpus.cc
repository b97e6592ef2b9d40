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

#include "datagen/corpus.h"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "datagen/config_json.h"
#include "json.hpp"
#include "vocab/static_vocab.h"

namespace dvcb {

namespace fs = std::filesystem;

namespace {

constexpr char kFeatMagic[4] = {'D', 'V', 'F', 'T'};

class ZipfSampler {
 public:
  explicit ZipfSampler(const Lexicon& lex) {
    double total = 0;
    for (int i : lex.SeenIds()) {
      total += lex.Weight(i);
      ids_.push_back(i);
      cumulative_.push_back(total);
    }
  }
  int Sample(Rng& rng) const {
    const double u = rng.Uniform() * cumulative_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    if (it == cumulative_.end()) --it;
    return ids_[static_cast<std::size_t>(it - cumulative_.begin())];
  }

 private:
  std::vector<int> ids_;
  std::vector<double> cumulative_;
};

void PutU32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v),
                              static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t GetU32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw std::runtime_error("features: truncated header");
  }
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

std::string ReadFile(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string Utterance::Text() const {
  std::string s;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) s += ' ';
    s += words[i];
  }
  return s;
}

const CorpusSplit& Corpus::split(const std::string& name) const {
  auto it = splits.find(name);
  if (it == splits.end()) throw std::invalid_argument("no split named " + name);
  return it->second;
}

std::unordered_map<std::string, int> Corpus::PretrainCounts() const {
  std::unordered_map<std::string, int> counts;
  for (const auto& u : split(kSplitPretrain).utterances) {
    for (const auto& w : u.words) ++counts[w];
  }
  return counts;
}

bool Corpus::IsTarget(const std::string& word,
                      const std::unordered_map<std::string, int>& counts) const {
  auto it = counts.find(word);
  const int c = it == counts.end() ? 0 : it->second;
  return c <= config.rare_max_count;
}

Tensor<float> SynthFeatures(const std::vector<std::string>& words,
                            const Lexicon& lexicon, double noise_sigma,
                            Rng& rng, int fixed_duration) {
  std::vector<int> units;
  for (std::size_t w = 0; w < words.size(); ++w) {
    if (!lexicon.Contains(words[w])) {
      throw std::invalid_argument("synth_features: unknown word '" + words[w] + "'");
    }
    if (w) units.push_back(0);
    const auto& u = lexicon.Units(words[w]);
    units.insert(units.end(), u.begin(), u.end());
  }
  std::vector<int> durations;
  std::size_t frames = 0;
  for (std::size_t i = 0; i < units.size(); ++i) {
    const int d = fixed_duration > 0 ? fixed_duration : 2 + static_cast<int>(rng.Below(3));
    durations.push_back(d);
    frames += static_cast<std::size_t>(d);
  }
  const auto& means = lexicon.unit_means();
  const std::size_t f = means.cols();
  Tensor<float> out(frames, f);
  std::size_t t = 0;
  for (std::size_t i = 0; i < units.size(); ++i) {
    auto mean = means.row(static_cast<std::size_t>(units[i]));
    for (int k = 0; k < durations[i]; ++k, ++t) {
      auto row = out.row(t);
      for (std::size_t j = 0; j < f; ++j) {
        row[j] = static_cast<float>(mean[j] + noise_sigma * rng.Normal());
      }
    }
  }
  return out;
}

CorpusSplit GenerateSplit(const std::string& name, const DatagenConfig& config,
                          const Lexicon& lexicon, std::uint64_t seed) {
  Validate(config);
  int count = 0;
  if (name == kSplitPretrain) {
    count = config.n_pretrain;
  } else if (name == kSplitBiasTrain) {
    count = config.n_bias_train;
  } else if (name == kSplitTestSeen) {
    count = config.n_test_seen;
  } else if (name == kSplitTestUnseen) {
    count = config.n_test_unseen;
  } else {
    throw std::invalid_argument("unknown split " + name);
  }
  const Rng root = Rng(seed).Stream("datagen").Stream(name);
  const ZipfSampler zipf(lexicon);
  const auto unseen = lexicon.UnseenIds();
  if (name == kSplitTestUnseen && unseen.empty()) {
    throw std::invalid_argument("test-unseen split needs unseen words");
  }

  // The pretrain split visits every seen word at least once.
  std::vector<int> coverage;
  if (name == kSplitPretrain) {
    coverage = lexicon.SeenIds();
    Rng cov = root.Stream("coverage");
    for (std::size_t i = coverage.size(); i > 1; --i) {
      std::swap(coverage[i - 1], coverage[cov.Below(i)]);
    }
    std::reverse(coverage.begin(), coverage.end());
  }

  CorpusSplit split;
  split.name = name;
  const auto span = static_cast<std::uint64_t>(config.utt_max_words - config.utt_min_words + 1);
  for (int i = 0; i < count; ++i) {
    Rng rng = root.Stream("utt", static_cast<std::uint64_t>(i));
    const int len = config.utt_min_words + static_cast<int>(rng.Below(span));
    std::vector<int> ids(static_cast<std::size_t>(len));
    for (int& id : ids) {
      if (!coverage.empty()) {
        id = coverage.back();
        coverage.pop_back();
      } else {
        id = zipf.Sample(rng);
      }
    }
    if (name == kSplitTestUnseen) {
      const int k = 1 + static_cast<int>(rng.Below(
                            static_cast<std::uint64_t>(config.unseen_per_utt_max)));
      std::vector<int> pos(ids.size());
      for (std::size_t p = 0; p < pos.size(); ++p) pos[p] = static_cast<int>(p);
      for (int j = 0; j < k; ++j) {
        const std::size_t pick = j + rng.Below(pos.size() - static_cast<std::size_t>(j));
        std::swap(pos[static_cast<std::size_t>(j)], pos[pick]);
        ids[static_cast<std::size_t>(pos[static_cast<std::size_t>(j)])] =
            unseen[rng.Below(unseen.size())];
      }
    }
    Utterance u;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s-%05d", name.c_str(), i);
    u.id = buf;
    for (int id : ids) u.words.push_back(lexicon.word(id));
    u.features = SynthFeatures(u.words, lexicon, config.noise_sigma, rng);
    u.duration_s = static_cast<double>(u.features.rows()) * config.frame_shift_s;
    split.utterances.push_back(std::move(u));
  }
  return split;
}

Corpus GenerateCorpus(const DatagenConfig& config, std::uint64_t seed) {
  Corpus c;
  c.config = config;
  c.seed = seed;
  c.lexicon = Lexicon::Build(config, seed);
  for (const char* name :
       {kSplitPretrain, kSplitBiasTrain, kSplitTestSeen, kSplitTestUnseen}) {
    c.splits[name] = GenerateSplit(name, config, c.lexicon, seed);
  }
  return c;
}

std::vector<std::string> BuildEvalBiasingList(
    const std::vector<const Utterance*>& utterances, int n,
    const Lexicon& lexicon,
    const std::function<bool(const std::string&)>& is_target,
    std::uint64_t seed) {
  std::vector<std::string> targets;
  std::unordered_set<std::string> in_refs;
  for (const Utterance* u : utterances) {
    for (const auto& w : u->words) {
      if (in_refs.insert(w).second && is_target(w)) targets.push_back(w);
    }
  }
  if (n < static_cast<int>(targets.size())) {
    throw std::invalid_argument(
        "biasing list size " + std::to_string(n) + " is smaller than the " +
        std::to_string(targets.size()) + " target words");
  }
  std::vector<std::string> pool;
  for (const auto& w : lexicon.words()) {
    if (!in_refs.count(w)) pool.push_back(w);
  }
  const std::size_t need = static_cast<std::size_t>(n) - targets.size();
  if (pool.size() < need) {
    throw std::invalid_argument("lexicon too small for " + std::to_string(need) +
                                " distractors");
  }
  Rng rng = Rng(seed).Stream("sampling").Stream("eval_list");
  for (std::size_t i = 0; i < need; ++i) {
    std::swap(pool[i], pool[i + rng.Below(pool.size() - i)]);
  }
  std::vector<std::string> list = targets;
  list.insert(list.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(need));
  for (std::size_t i = list.size(); i > 1; --i) {
    std::swap(list[i - 1], list[rng.Below(i)]);
  }
  return list;
}

void WriteFeatures(const std::string& path, const Tensor<float>& features) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(kFeatMagic, 4);
  PutU32(out, static_cast<std::uint32_t>(features.rows()));
  PutU32(out, static_cast<std::uint32_t>(features.cols()));
  for (float v : features.vec()) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    PutU32(out, bits);
  }
}

Tensor<float> ReadFeatures(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kFeatMagic, 4) != 0) {
    throw std::runtime_error(path + ": not a feature file");
  }
  const std::uint32_t t = GetU32(in);
  const std::uint32_t f = GetU32(in);
  Tensor<float> out(t, f);
  for (float& v : out.vec()) {
    const std::uint32_t bits = GetU32(in);
    std::memcpy(&v, &bits, 4);
  }
  return out;
}

void SaveCorpus(const Corpus& corpus, const std::string& dir) {
  fs::create_directories(dir);
  nlohmann::json meta = {{"seed", corpus.seed},
                         {"config", corpus.config},
                         {"spec_hash", corpus.spec_hash}};
  std::ofstream(fs::path(dir) / "corpus.json") << meta.dump(2) << '\n';
  std::ofstream(fs::path(dir) / "lexicon.json") << corpus.lexicon.ToJson() << '\n';
  StaticVocab::CharacterLevel(corpus.config.alphabet)
      .Save((fs::path(dir) / "vocab.txt").string());
  for (const auto& [name, split] : corpus.splits) {
    const fs::path sdir = fs::path(dir) / name;
    fs::create_directories(sdir / "feats");
    std::ofstream manifest(sdir / "manifest.jsonl");
    for (const auto& u : split.utterances) {
      const std::string rel = "feats/" + u.id + ".feat";
      WriteFeatures((sdir / rel).string(), u.features);
      nlohmann::json rec = {{"id", u.id},
                            {"text", u.Text()},
                            {"features", rel},
                            {"duration", u.duration_s},
                            {"spec_hash", corpus.spec_hash}};
      manifest << rec.dump() << '\n';
    }
  }
}

Corpus LoadCorpus(const std::string& dir) {
  Corpus c;
  const auto meta = nlohmann::json::parse(ReadFile(fs::path(dir) / "corpus.json"));
  c.seed = meta.at("seed").get<std::uint64_t>();
  c.config = meta.at("config").get<DatagenConfig>();
  c.spec_hash = meta.value("spec_hash", "");
  c.lexicon = Lexicon::FromJson(ReadFile(fs::path(dir) / "lexicon.json"));
  for (const char* name :
       {kSplitPretrain, kSplitBiasTrain, kSplitTestSeen, kSplitTestUnseen}) {
    const fs::path sdir = fs::path(dir) / name;
    if (!fs::exists(sdir / "manifest.jsonl")) continue;
    CorpusSplit split;
    split.name = name;
    std::ifstream in(sdir / "manifest.jsonl");
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto rec = nlohmann::json::parse(line);
      Utterance u;
      u.id = rec.at("id").get<std::string>();
      u.words = SplitWords(rec.at("text").get<std::string>());
      u.features = ReadFeatures((sdir / rec.at("features").get<std::string>()).string());
      u.duration_s = rec.at("duration").get<double>();
      split.utterances.push_back(std::move(u));
    }
    c.splits[name] = std::move(split);
  }
  return c;
}

}  // namespace dvcb
