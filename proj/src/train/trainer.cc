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

#include "train/trainer.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "diffcore/adam.h"
#include "diffcore/parallel.h"
#include "model/checkpoint.h"
#include "model/inference.h"

namespace dvcb {

namespace {

template <typename T>
void Shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.Below(i)]);
}

struct Slot {
  double loss = 0;
  std::vector<Tensor<float>> grads;  // aligned with the trainable list
  Tensor<float> dv;
};

// Per-item inputs for one gradient pass.
struct Item {
  const Tensor<float>* features = nullptr;  // encoded on the tape
  const Tensor<float>* memory = nullptr;    // cached encoder output
  const std::vector<int>* labels = nullptr;
};

class GradientPass {
 public:
  GradientPass(Model<float>& model, const TrainConfig& config)
      : model_(model), config_(config), trainable_(model.params().Trainable()) {
    for (std::size_t i = 0; i < trainable_.size(); ++i) index_[trainable_[i]] = i;
  }

  const std::vector<Parameter<float>*>& trainable() const { return trainable_; }

  // Fills Parameter::grad for every trainable parameter and returns the
  // batch loss (summed token losses over the batch token count).
  double Run(const std::vector<Item>& items, const DynamicVocab* dyn,
             Rng* dropout_root) {
    double normalizer = 0;
    for (const auto& it : items) normalizer += static_cast<double>(it.labels->size() + 1);
    const float norm = static_cast<float>(normalizer);
    const float smoothing = static_cast<float>(config_.smoothing);

    // V lives on its own tape; per-item gradients w.r.t. V are summed in
    // item order and pushed through it once.
    Tape<float> vtape;
    Var<float> v;
    const bool biased = dyn != nullptr;
    if (biased) v = model_.BiasEncode(model_.Context(vtape), *dyn);

    const std::vector<int> widths = biased ? dyn->Widths() : std::vector<int>{};
    std::vector<Slot> slots(items.size());
    ParallelFor(items.size(), config_.threads, [&](std::size_t i) {
      Tape<float> t;
      Rng drop = dropout_root ? dropout_root->Stream("item", i) : Rng();
      auto c = model_.Context(t, dropout_root ? &drop : nullptr);
      Var<float> h = items[i].memory ? t.Ref(*items[i].memory)
                                     : model_.Encode(c, t.Ref(*items[i].features));
      Var<float> vi;
      if (biased) vi = t.Input(v.value());
      Var<float> loss = model_.TeacherForcedLoss(c, h, *items[i].labels,
                                                 biased ? &vi : nullptr,
                                                 smoothing, norm, widths);
      t.Backward(loss);
      Slot& s = slots[i];
      s.loss = loss.value()[0];
      s.grads.resize(trainable_.size());
      for (const auto& [p, g] : t.ParamGrads()) {
        auto it = index_.find(p);
        if (it != index_.end()) s.grads[it->second] = *g;
      }
      if (biased && !t.Grad(vi).empty()) s.dv = t.Grad(vi);
    });

    double total = 0;
    for (auto* p : trainable_) p->ZeroGrad();
    Tensor<float> dv;
    for (auto& s : slots) {
      total += s.loss;
      for (std::size_t k = 0; k < trainable_.size(); ++k) {
        if (s.grads[k].empty()) continue;
        auto& g = trainable_[k]->grad;
        for (std::size_t j = 0; j < g.size(); ++j) g[j] += s.grads[k][j];
      }
      if (!s.dv.empty()) {
        if (dv.empty()) dv = Tensor<float>(s.dv.shape());
        for (std::size_t j = 0; j < dv.size(); ++j) dv[j] += s.dv[j];
      }
    }
    if (biased && !dv.empty() && v.requires_grad()) {
      vtape.Backward(v, dv);
      vtape.AccumulateParamGrads();
    }
    return total;
  }

  void Clip() {
    if (config_.grad_clip <= 0) return;
    double sq = 0;
    for (auto* p : trainable_) {
      for (float g : p->grad.vec()) sq += double(g) * g;
    }
    const double norm = std::sqrt(sq);
    if (norm <= config_.grad_clip) return;
    const float scale = static_cast<float>(config_.grad_clip / norm);
    for (auto* p : trainable_) {
      for (auto& g : p->grad.vec()) g *= scale;
    }
  }

 private:
  Model<float>& model_;
  const TrainConfig& config_;
  std::vector<Parameter<float>*> trainable_;
  std::unordered_map<const Parameter<float>*, std::size_t> index_;
};

double Millis(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - since)
      .count();
}

void CheckLoss(double loss, std::int64_t step, const char* stage) {
  if (!std::isfinite(loss)) {
    throw std::runtime_error(std::string(stage) + " training diverged: loss " +
                             std::to_string(loss) + " at step " +
                             std::to_string(step));
  }
}

std::vector<std::vector<std::size_t>> EpochBatches(std::size_t n, int batch,
                                                   const Rng& root, int epoch) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng = root.Stream("epoch", static_cast<std::uint64_t>(epoch));
  Shuffle(order, rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t b = 0; b < n; b += static_cast<std::size_t>(batch)) {
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(b),
                     order.begin() + static_cast<std::ptrdiff_t>(
                                         std::min(n, b + static_cast<std::size_t>(batch))));
  }
  return out;
}

}  // namespace

void Validate(const TrainConfig& c) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("train config: ") + what);
  };
  require(c.lr > 0, "lr must be > 0");
  require(c.warmup_steps >= 0, "warmup_steps must be >= 0");
  require(c.epochs >= 0, "epochs must be >= 0");
  require(c.batch_size >= 1, "batch_size must be >= 1");
  require(c.smoothing >= 0 && c.smoothing < 1, "smoothing must be in [0, 1)");
  require(c.grad_clip >= 0, "grad_clip must be >= 0");
  require(c.threads >= 1, "threads must be >= 1");
  const auto& s = c.bias_sampling;
  require(s.n_pos_per_utt >= 0 && s.n_distractors >= 0,
          "bias_sampling counts must be >= 0");
  require(s.n_min >= 0 && s.n_min <= s.n_max, "bias_sampling needs 0 <= n_min <= n_max");
}

std::vector<TrainExample> MakeExamples(const CorpusSplit& split,
                                       const StaticVocab& vocab) {
  std::vector<TrainExample> out;
  out.reserve(split.utterances.size());
  for (const auto& u : split.utterances) {
    out.push_back({u.id, &u.features, u.words, vocab.Tokenize(u.Text())});
  }
  return out;
}

SampledList SampleBiasingList(const std::vector<const TrainExample*>& batch,
                              const std::vector<std::string>& lexicon,
                              const BiasSampling& sampling,
                              const StaticVocab& vocab, Rng& rng) {
  SampledList out;
  std::unordered_set<std::string> refs, chosen;
  for (const auto* ex : batch) refs.insert(ex->words.begin(), ex->words.end());

  for (const auto* ex : batch) {
    std::vector<std::string> cands, multi;
    std::unordered_set<std::string> seen;
    for (const auto& w : ex->words) {
      if (!seen.insert(w).second) continue;
      cands.push_back(w);
      if (vocab.Tokenize(w).size() >= 2) multi.push_back(w);
    }
    auto& pool = sampling.multi_token_only && !multi.empty() ? multi : cands;
    Shuffle(pool, rng);
    const auto take = std::min<std::size_t>(pool.size(),
                                            static_cast<std::size_t>(sampling.n_pos_per_utt));
    for (std::size_t i = 0; i < take; ++i) {
      if (chosen.insert(pool[i]).second) out.positives.push_back(pool[i]);
    }
  }

  std::vector<std::string> pool;
  for (const auto& w : lexicon) {
    if (!refs.count(w) && !chosen.count(w)) pool.push_back(w);
  }
  Shuffle(pool, rng);
  std::size_t want = static_cast<std::size_t>(sampling.n_distractors);
  if (out.positives.size() + want < static_cast<std::size_t>(sampling.n_min)) {
    want = static_cast<std::size_t>(sampling.n_min) - out.positives.size();
  }
  want = std::min(want, pool.size());
  out.distractors.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(want));

  // Clamp to n_max, dropping distractors before positives.
  const auto cap = static_cast<std::size_t>(sampling.n_max);
  if (out.positives.size() > cap) out.positives.resize(cap);
  if (out.positives.size() + out.distractors.size() > cap) {
    out.distractors.resize(cap - out.positives.size());
  }

  std::vector<std::string> words = out.positives;
  words.insert(words.end(), out.distractors.begin(), out.distractors.end());
  Shuffle(words, rng);
  out.dyn = DynamicVocab::Build(words, vocab);
  for (const auto* ex : batch) out.labels.push_back(out.dyn.RewriteLabels(ex->static_ids));
  return out;
}

StepLogger::StepLogger(const std::string& path, nlohmann::json stamp)
    : stamp_(std::move(stamp)) {
  out_.open(path, std::ios::app);
  if (!out_) throw std::runtime_error("cannot open log " + path);
}

void StepLogger::Log(const nlohmann::json& record) {
  if (!out_.is_open()) return;
  nlohmann::json r = record;
  r.update(stamp_);
  out_ << r.dump() << '\n' << std::flush;
}

TrainResult PretrainBackbone(Model<float>& model,
                             const std::vector<TrainExample>& train,
                             const TrainConfig& config,
                             const TrainOptions& options) {
  Validate(config);
  if (train.empty()) throw std::invalid_argument("pretrain: no training examples");
  model.SetStage(Stage::kPretrain);
  GradientPass pass(model, config);
  AdamState<float> adam;
  adam.options.lr = config.lr;
  const Rng root = Rng(options.seed).Stream("sampling").Stream("pretrain");
  TrainResult result;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    double epoch_loss = 0;
    std::size_t batches = 0;
    for (const auto& batch : EpochBatches(train.size(), config.batch_size, root, epoch)) {
      const auto start = std::chrono::steady_clock::now();
      std::vector<Item> items;
      for (std::size_t i : batch) {
        items.push_back({train[i].features, nullptr, &train[i].static_ids});
      }
      ++result.steps;
      Rng dropout = root.Stream("dropout", static_cast<std::uint64_t>(result.steps));
      const double loss =
          pass.Run(items, nullptr, model.config().dropout > 0 ? &dropout : nullptr);
      CheckLoss(loss, result.steps, "pretrain");
      pass.Clip();
      const double lr = InverseSqrtLr(config.lr, config.warmup_steps, result.steps);
      AdamStep(pass.trainable(), adam, lr);
      epoch_loss += loss;
      ++batches;
      if (options.logger) {
        options.logger->Log({{"step", result.steps},
                             {"stage", "pretrain"},
                             {"epoch", epoch},
                             {"loss", loss},
                             {"lr", lr},
                             {"wall_ms", Millis(start)}});
      }
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss / static_cast<double>(batches);
    rec.heldout_loss = std::numeric_limits<double>::quiet_NaN();
    if (options.on_epoch) rec.extra = options.on_epoch(epoch, model);
    result.epochs.push_back(rec);
  }
  return result;
}

double EvaluateBiasLoss(Model<float>& model,
                        const std::vector<const TrainExample*>& batch,
                        const SampledList& list, double smoothing) {
  Tape<float> vtape;
  Var<float> v = model.BiasEncode(model.Context(vtape), list.dyn);
  const auto widths = list.dyn.Widths();
  double total = 0, tokens = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    Tape<float> t;
    auto c = model.Context(t);
    Var<float> h = model.Encode(c, t.Ref(*batch[i]->features));
    Var<float> vi = t.Ref(v.value());
    total += model.TeacherForcedLoss(c, h, list.labels[i], &vi,
                                     static_cast<float>(smoothing), 1.0f, widths)
                 .value()[0];
    tokens += static_cast<double>(list.labels[i].size() + 1);
  }
  return total / tokens;
}

TrainResult TrainBiasing(Model<float>& model,
                         const std::vector<TrainExample>& train,
                         const std::vector<std::string>& lexicon,
                         const StaticVocab& vocab, const TrainConfig& config,
                         const TrainOptions& options,
                         const std::vector<TrainExample>* heldout) {
  Validate(config);
  if (train.empty()) throw std::invalid_argument("train-bias: no training examples");
  if (!model.has_biasing()) {
    throw std::invalid_argument("train-bias: model has no biasing parameters");
  }
  model.SetStage(Stage::kBias);
  const auto frozen_before = PartitionDigests(model, Partition::kFrozen);

  // The encoder is frozen, so its outputs are computed once.
  std::vector<Tensor<float>> memory(train.size());
  ParallelFor(train.size(), config.threads, [&](std::size_t i) {
    memory[i] = EncodeFeatures(model, *train[i].features);
  });

  const Rng root = Rng(options.seed).Stream("sampling").Stream("bias");
  std::vector<const TrainExample*> held;
  SampledList held_list;
  if (heldout != nullptr && !heldout->empty()) {
    for (std::size_t i = 0; i < heldout->size() && i < 32; ++i) held.push_back(&(*heldout)[i]);
    Rng rng = root.Stream("heldout");
    held_list = SampleBiasingList(held, lexicon, config.bias_sampling, vocab, rng);
  }
  auto held_loss = [&]() {
    return held.empty() ? std::numeric_limits<double>::quiet_NaN()
                        : EvaluateBiasLoss(model, held, held_list, config.smoothing);
  };

  GradientPass pass(model, config);
  AdamState<float> adam;
  adam.options.lr = config.lr;
  TrainResult result;
  EpochRecord initial;
  initial.heldout_loss = held_loss();
  result.epochs.push_back(initial);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    double epoch_loss = 0;
    std::size_t batches = 0;
    for (const auto& batch : EpochBatches(train.size(), config.batch_size, root, epoch)) {
      const auto start = std::chrono::steady_clock::now();
      ++result.steps;
      std::vector<const TrainExample*> exs;
      for (std::size_t i : batch) exs.push_back(&train[i]);
      Rng rng = root.Stream("list", static_cast<std::uint64_t>(result.steps));
      const SampledList list =
          SampleBiasingList(exs, lexicon, config.bias_sampling, vocab, rng);
      std::vector<Item> items;
      for (std::size_t k = 0; k < batch.size(); ++k) {
        items.push_back({nullptr, &memory[batch[k]], &list.labels[k]});
      }
      Rng dropout = root.Stream("dropout", static_cast<std::uint64_t>(result.steps));
      const double loss = pass.Run(items, list.dyn.empty() ? nullptr : &list.dyn,
                                   model.config().dropout > 0 ? &dropout : nullptr);
      CheckLoss(loss, result.steps, "biasing");
      pass.Clip();
      const double lr = InverseSqrtLr(config.lr, config.warmup_steps, result.steps);
      AdamStep(pass.trainable(), adam, lr);
      epoch_loss += loss;
      ++batches;
      if (options.logger) {
        options.logger->Log({{"step", result.steps},
                             {"stage", "bias"},
                             {"epoch", epoch},
                             {"loss", loss},
                             {"lr", lr},
                             {"list_size", list.dyn.size()},
                             {"wall_ms", Millis(start)}});
      }
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss / static_cast<double>(batches);
    rec.heldout_loss = held_loss();
    if (options.on_epoch) rec.extra = options.on_epoch(epoch, model);
    result.epochs.push_back(rec);
  }

  if (PartitionDigests(model, Partition::kFrozen) != frozen_before) {
    throw std::runtime_error("train-bias: a frozen tensor changed during training");
  }
  return result;
}

}  // namespace dvcb
