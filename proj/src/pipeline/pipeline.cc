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


#include "pipeline/pipeline.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "decode/runner.h"
#include "metrics/wer.h"
#include "model/checkpoint.h"
#include "model/inference.h"
#include "train/trainer.h"

namespace dvcb {

namespace fs = std::filesystem;

namespace {

const std::vector<std::string>& StageOrder() {
  static const std::vector<std::string> order = {kStageGenData, kStagePretrain,
                                                 kStageTrainBias, kStageEval};
  return order;
}

void WriteText(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << text;
    if (!out) throw std::runtime_error("write failed: " + tmp);
  }
  fs::rename(tmp, path);
}

void WriteJson(const std::string& path, const nlohmann::json& j) {
  WriteText(path, j.dump(2) + "\n");
}

nlohmann::json ReadJson(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  return nlohmann::json::parse(in);
}

std::vector<std::string> Words(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

std::string FileLabel(const Condition& c) {
  std::ostringstream s;
  s << c.model << "_n" << c.n;
  if (c.model == kBiased) s << "_mu" << c.mu;
  s << "_beam" << c.beam;
  return s.str();
}

double Rate(const nlohmann::json& j) {
  return j.is_null() ? std::nan("") : j.get<double>();
}

const nlohmann::json* FindCondition(const nlohmann::json& conds, const std::string& split,
                                    const std::string& model, int n, double mu) {
  for (const auto& c : conds) {
    if (c["split"] == split && c["model"] == model && c["n"] == n &&
        (model == kBaseline || std::abs(c["mu"].get<double>() - mu) < 1e-12)) {
      return &c;
    }
  }
  return nullptr;
}

}  // namespace

Experiment::Experiment(ExperimentSpec spec, Progress progress)
    : spec_(Normalize(std::move(spec))),
      hash_(SpecHash(spec_)),
      progress_(std::move(progress)),
      vocab_(StaticVocab::CharacterLevel(spec_.datagen.alphabet)) {
  fs::create_directories(spec_.output_dir);
  const std::string spec_path = Path("spec.json");
  if (fs::exists(spec_path)) {
    const auto existing = ReadJson(spec_path).value("spec_hash", "");
    if (existing != hash_) {
      throw SpecMismatch("output directory " + spec_.output_dir + " holds spec " + existing +
                         ", not " + hash_);
    }
  } else {
    SaveSpec(spec_path, spec_);
  }
  if (fs::exists(Path("stages.json"))) {
    stages_ = ReadJson(Path("stages.json"));
    if (stages_.value("spec_hash", "") != hash_) {
      throw SpecMismatch("stages.json belongs to another spec");
    }
  } else {
    stages_ = {{"spec_hash", hash_}, {"completed", nlohmann::json::object()}};
  }
}

std::string Experiment::Path(const std::string& rel) const {
  return (fs::path(spec_.output_dir) / rel).string();
}

bool Experiment::Done(const std::string& stage) const {
  return stages_["completed"].contains(stage);
}

void Experiment::MarkDone(const std::string& stage, const nlohmann::json& info) {
  stages_["completed"][stage] = info;
  WriteJson(Path("stages.json"), stages_);
}

void Experiment::Log(const std::string& message) const {
  if (progress_) progress_(message);
}

namespace {

// Forgets `stage` and everything after it.
void Invalidate(nlohmann::json& stages, const std::string& stage) {
  const auto& order = StageOrder();
  auto it = std::find(order.begin(), order.end(), stage);
  for (; it != order.end(); ++it) stages["completed"].erase(*it);
}

}  // namespace

const Corpus& Experiment::corpus() {
  if (corpus_) return *corpus_;
  if (!Done(kStageGenData)) throw std::runtime_error("stage gen-data has not completed");
  auto c = std::make_unique<Corpus>(LoadCorpus(Path("data")));
  if (c->spec_hash != hash_) {
    throw SpecMismatch("corpus in " + Path("data") + " was produced by spec " + c->spec_hash);
  }
  corpus_ = std::move(c);
  return *corpus_;
}

namespace {

std::unique_ptr<Model<float>> LoadStamped(const std::string& path, const std::string& hash) {
  CheckpointInfo info;
  auto m = std::make_unique<Model<float>>(LoadCheckpoint(path, &info));
  if (info.spec_hash != hash) {
    throw SpecMismatch("checkpoint " + path + " was produced by spec " + info.spec_hash);
  }
  return m;
}

}  // namespace

Model<float>& Experiment::backbone() {
  if (backbone_) return *backbone_;
  if (!Done(kStagePretrain)) throw std::runtime_error("stage pretrain has not completed");
  backbone_ = LoadStamped(Path("backbone.ckpt"), hash_);
  return *backbone_;
}

Model<float>& Experiment::biased() {
  if (biased_) return *biased_;
  if (!Done(kStageTrainBias)) throw std::runtime_error("stage train-bias has not completed");
  biased_ = LoadStamped(Path("biased.ckpt"), hash_);
  return *biased_;
}

Evaluator& Experiment::evaluator() {
  if (!evaluator_) {
    evaluator_ = std::make_unique<Evaluator>(corpus(), vocab_, backbone(),
                                             Done(kStageTrainBias) ? &biased() : nullptr, spec_);
  }
  return *evaluator_;
}

void Experiment::GenData() {
  Invalidate(stages_, kStageGenData);
  evaluator_.reset();
  corpus_.reset();
  Log("gen-data: generating corpus");
  Corpus c = GenerateCorpus(spec_.datagen, spec_.seed);
  c.spec_hash = hash_;
  fs::remove_all(Path("data"));
  SaveCorpus(c, Path("data"));
  nlohmann::json info = nlohmann::json::object();
  for (const auto& [name, split] : c.splits) info[name] = split.utterances.size();
  MarkDone(kStageGenData, {{"utterances", info}});
}

std::pair<CorpusSplit, CorpusSplit> Experiment::BiasSplits() {
  const auto& all = corpus().split(kSplitBiasTrain).utterances;
  const auto cut = all.size() - static_cast<std::size_t>(spec_.dev_size);
  CorpusSplit train{kSplitBiasTrain, {all.begin(), all.begin() + static_cast<std::ptrdiff_t>(cut)}};
  CorpusSplit dev{"dev", {all.begin() + static_cast<std::ptrdiff_t>(cut), all.end()}};
  return {std::move(train), std::move(dev)};
}

nlohmann::json Experiment::DevScores(Model<float>& model, bool biased) {
  const auto dev = BiasSplits().second;
  if (dev.utterances.empty()) return nlohmann::json::object();
  IncrementalDecoder<float> decoder(model, biased);
  BeamConfig greedy = GridBeam(spec_.eval, spec_.eval.mu);
  greedy.beam = 1;
  ErrorCounts total, bias_counts;
  for (std::size_t i = 0; i < dev.utterances.size(); ++i) {
    const auto& u = dev.utterances[i];
    std::vector<std::string> list;
    if (biased && spec_.eval.sweep_list_size > 0) {
      // The longest reference word stands in for a target.
      std::string target;
      for (const auto& w : u.words) {
        if (w.size() > target.size()) target = w;
      }
      const auto seed = Rng(spec_.seed).Stream("dev_list", i).seed();
      list = BuildEvalBiasingList({&u}, spec_.eval.sweep_list_size, corpus().lexicon,
                                  [&](const std::string& w) { return w == target; }, seed);
    }
    const auto dyn = DynamicVocab::Build(list, vocab_);
    BiasCache<float> cache;
    if (biased) cache = ComputeBiasCache(model, dyn);
    const auto h = EncodeFeatures(model, u.features);
    const auto d = DecodeUtterance(u.id, decoder, h, biased ? &cache : nullptr, dyn, vocab_, greedy);
    const auto a = Align(u.words, Words(d.text));
    total += Count(a);
    bias_counts += SplitByList(a, {list.begin(), list.end()}).biased;
  }
  nlohmann::json out = {{"dev_wer", ::dvcb::Rate(total)}};
  if (biased) out["dev_b_wer"] = ::dvcb::Rate(bias_counts);
  return out;
}

void Experiment::Pretrain() {
  Invalidate(stages_, kStagePretrain);
  evaluator_.reset();
  backbone_.reset();
  biased_.reset();
  const auto examples = MakeExamples(corpus().split(kSplitPretrain), vocab_);
  auto model = Model<float>::InitBackbone(spec_.model, spec_.seed);
  fs::remove(Path("pretrain_log.jsonl"));
  StepLogger logger(Path("pretrain_log.jsonl"), {{"spec_hash", hash_}});
  TrainOptions opt;
  opt.seed = spec_.seed;
  opt.logger = &logger;
  opt.on_epoch = [&](int epoch, Model<float>& m) {
    auto scores = DevScores(m, false);
    logger.Log({{"event", "epoch"}, {"stage", "pretrain"}, {"epoch", epoch}, {"dev", scores}});
    Log("pretrain: epoch " + std::to_string(epoch) + " dev " + scores.dump());
    return scores;
  };
  Log("pretrain: " + std::to_string(examples.size()) + " utterances, " +
      std::to_string(spec_.pretrain.epochs) + " epochs");
  const auto result = PretrainBackbone(model, examples, spec_.pretrain, opt);
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : result.epochs) {
    epochs.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"dev", e.extra}});
  }
  SaveCheckpoint(Path("backbone.ckpt"), model,
                 {hash_, {{"stage", "pretrain"}, {"steps", result.steps}, {"epochs", epochs}}});
  MarkDone(kStagePretrain, {{"steps", result.steps}, {"final", epochs.empty() ? nlohmann::json() : epochs.back()}});
}

void Experiment::TrainBias() {
  Invalidate(stages_, kStageTrainBias);
  evaluator_.reset();
  biased_.reset();
  Model<float>& base = backbone();
  Model<float> model = base;
  model.InitBiasing(spec_.seed);
  auto [train_split, dev_split] = BiasSplits();
  const auto train = MakeExamples(train_split, vocab_);
  const auto dev = MakeExamples(dev_split, vocab_);
  std::vector<std::string> lexicon;
  for (int id : corpus().lexicon.SeenIds()) lexicon.push_back(corpus().lexicon.word(id));

  fs::remove(Path("bias_log.jsonl"));
  StepLogger logger(Path("bias_log.jsonl"), {{"spec_hash", hash_}});
  TrainOptions opt;
  opt.seed = spec_.seed;
  opt.logger = &logger;
  opt.on_epoch = [&](int epoch, Model<float>& m) {
    auto scores = DevScores(m, true);
    logger.Log({{"event", "epoch"}, {"stage", "bias"}, {"epoch", epoch}, {"dev", scores}});
    Log("train-bias: epoch " + std::to_string(epoch) + " dev " + scores.dump());
    return scores;
  };
  Log("train-bias: " + std::to_string(train.size()) + " utterances, " +
      std::to_string(spec_.bias.epochs) + " epochs");
  const auto result = TrainBiasing(model, train, lexicon, vocab_, spec_.bias, opt, &dev);

  // Every frozen tensor must match the backbone checkpoint byte for byte.
  const auto frozen = PartitionDigests(model, Partition::kFrozen);
  nlohmann::json mismatched = nlohmann::json::array();
  long compared = 0;
  for (const auto& [name, digest] : frozen) {
    if (!base.params().Has(name)) continue;
    ++compared;
    if (TensorDigest(base.params().at(name).value) != digest) mismatched.push_back(name);
  }
  const nlohmann::json freeze = {{"spec_hash", hash_},
                                 {"frozen_tensors", frozen.size()},
                                 {"compared", compared},
                                 {"mismatched", mismatched},
                                 {"identical", mismatched.empty() && compared > 0}};
  WriteJson(Path("freeze.json"), freeze);
  if (!mismatched.empty()) throw std::runtime_error("train-bias: frozen tensors changed");

  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : result.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"heldout_loss", std::isnan(e.heldout_loss) ? nlohmann::json() : nlohmann::json(e.heldout_loss)},
                      {"dev", e.extra}});
  }
  SaveCheckpoint(Path("biased.ckpt"), model,
                 {hash_, {{"stage", "bias"}, {"steps", result.steps}, {"epochs", epochs}}});
  MarkDone(kStageTrainBias, {{"steps", result.steps}, {"final", epochs.back()}});
}

std::vector<Condition> Experiment::GridConditions() const {
  const auto& g = spec_.eval;
  std::vector<Condition> out;
  for (const auto& split : g.splits) {
    for (int n : g.list_sizes) out.push_back({split, kBaseline, n, 0.0, g.beam});
    for (int n : g.list_sizes) {
      if (n > 0) out.push_back({split, kBiased, n, g.mu, g.beam});
    }
  }
  const bool sweep = std::find(g.list_sizes.begin(), g.list_sizes.end(), g.sweep_list_size) !=
                         g.list_sizes.end() &&
                     g.sweep_list_size > 0;
  if (sweep) {
    const std::string split = std::find(g.splits.begin(), g.splits.end(), kSplitTestUnseen) !=
                                      g.splits.end()
                                  ? kSplitTestUnseen
                                  : g.splits.front();
    for (double mu : g.mu_values) {
      if (std::abs(mu - g.mu) > 1e-12) out.push_back({split, kBiased, g.sweep_list_size, mu, g.beam});
    }
  }
  return out;
}

nlohmann::json Experiment::Eval() {
  Invalidate(stages_, kStageEval);
  const auto conditions = GridConditions();
  const bool need_biased = std::any_of(conditions.begin(), conditions.end(),
                                       [](const Condition& c) { return c.model == kBiased; });
  if (need_biased) biased();
  evaluator_.reset();
  Evaluator& ev = evaluator();

  nlohmann::json metrics_conds = nlohmann::json::array();
  nlohmann::json timed_conds = nlohmann::json::array();
  for (const auto& c : conditions) {
    Log("eval: " + c.Label());
    const auto r = ev.Evaluate(c);
    metrics_conds.push_back(r.ToJson(false));
    timed_conds.push_back(r.ToJson(true));
    const auto dir = fs::path(Path("decode")) / c.split;
    fs::create_directories(dir);
    std::string lines;
    const auto& decodes = ev.Decodes(c);
    for (std::size_t i = 0; i < decodes.size(); ++i) {
      auto j = ToJson(decodes[i]);
      j["biasing_list"] = ev.List(c.split, i, c.n);
      j["spec_hash"] = hash_;
      lines += j.dump() + "\n";
    }
    WriteText((dir / (FileLabel(c) + ".jsonl")).string(), lines);
  }

  nlohmann::json metrics = {
      {"spec_hash", hash_}, {"grid_mu", spec_.eval.mu}, {"conditions", metrics_conds}};
  nlohmann::json report = {{"spec_hash", hash_}, {"conditions", timed_conds}};

  const auto& g = spec_.eval;
  const std::string focus = std::find(g.splits.begin(), g.splits.end(), kSplitTestUnseen) !=
                                    g.splits.end()
                                ? kSplitTestUnseen
                                : g.splits.front();
  const int n = g.sweep_list_size;
  if (need_biased && n > 0 &&
      FindCondition(metrics_conds, focus, kBiased, n, g.mu) != nullptr) {
    metrics["iterations"] = ev.IterationComparison(focus, n, g.mu);
    metrics["reference_steps"] = ev.ReferenceStepComparison(focus, n);
    const auto& base = *FindCondition(metrics_conds, focus, kBaseline, n, 0);
    const auto& bias = *FindCondition(metrics_conds, focus, kBiased, n, g.mu);
    const double bb = Rate(base["b_wer"]), bw = Rate(bias["b_wer"]);
    metrics["efficacy"] = {{"split", focus},
                           {"n", n},
                           {"mu", g.mu},
                           {"baseline_wer", base["wer"]},
                           {"biased_wer", bias["wer"]},
                           {"baseline_b_wer", base["b_wer"]},
                           {"biased_b_wer", bias["b_wer"]},
                           {"b_wer_gain_points", std::isnan(bb - bw) ? nlohmann::json() : nlohmann::json(100 * (bb - bw))},
                           {"wer_change_points", 100 * (bias["wer"].get<double>() - base["wer"].get<double>())}};
    nlohmann::json sweep = nlohmann::json::array();
    std::vector<double> mus = g.mu_values;
    if (std::find(mus.begin(), mus.end(), g.mu) == mus.end()) mus.push_back(g.mu);
    std::sort(mus.begin(), mus.end());
    for (double mu : mus) {
      const auto* c = FindCondition(metrics_conds, focus, kBiased, n, mu);
      if (c) sweep.push_back({{"mu", mu}, {"dynamic_tokens", (*c)["dynamic_tokens"]},
                              {"wer", (*c)["wer"]}, {"b_wer", (*c)["b_wer"]}});
    }
    metrics["mu_sweep"] = sweep;
    const auto* tb = FindCondition(timed_conds, focus, kBaseline, n, 0);
    const auto* tz = FindCondition(timed_conds, focus, kBiased, n, g.mu);
    const double rb = (*tb)["rtf"], rz = (*tz)["rtf"];
    report["rtf"] = {{"split", focus}, {"n", n}, {"mu", g.mu},
                     {"baseline_rtf", rb}, {"biased_rtf", rz},
                     {"reduction_pct", 100 * (rb - rz) / rb},
                     {"reference_reduction_pct", 7.5}};
  }
  if (fs::exists(Path("freeze.json"))) {
    auto freeze = ReadJson(Path("freeze.json"));
    if (freeze.value("spec_hash", "") != hash_) throw SpecMismatch("freeze.json belongs to another spec");
    metrics["freezing"] = freeze;
  }
  for (const auto& [k, v] : metrics.items()) {
    if (k != "conditions") report[k] = v;
  }
  WriteJson(Path("metrics.json"), metrics);
  WriteJson(Path("report.json"), report);
  WriteText(Path("report.txt"), RenderReport(metrics));
  WriteText(Path("timing.txt"), RenderTiming(report));
  MarkDone(kStageEval, {{"conditions", conditions.size()}});
  return metrics;
}

nlohmann::json Experiment::Run() {
  if (!Done(kStageGenData)) GenData();
  if (!Done(kStagePretrain)) Pretrain();
  const auto g = GridConditions();
  const bool need_biased = std::any_of(g.begin(), g.end(), [](const Condition& c) { return c.model == kBiased; });
  if (need_biased && !Done(kStageTrainBias)) TrainBias();
  if (!Done(kStageEval)) return Eval();
  return ReadJson(Path("metrics.json"));
}

namespace {

std::string Pct(const nlohmann::json& j) { return FormatPercent(Rate(j)); }

std::string Num(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

}  // namespace

std::string RenderReport(const nlohmann::json& metrics) {
  const auto& conds = metrics.at("conditions");
  std::ostringstream out;
  out << "spec " << metrics.at("spec_hash").get<std::string>() << "\n";
  std::vector<std::string> splits;
  std::vector<int> sizes;
  for (const auto& c : conds) {
    const std::string s = c["split"];
    if (std::find(splits.begin(), splits.end(), s) == splits.end()) splits.push_back(s);
    const int n = c["n"];
    if (std::find(sizes.begin(), sizes.end(), n) == sizes.end()) sizes.push_back(n);
  }
  std::sort(sizes.begin(), sizes.end());
  for (const auto& split : splits) {
    out << "\n" << split << ": WER (B-WER), percent\n";
    std::vector<std::string> header = {"model"};
    for (int n : sizes) header.push_back("N=" + std::to_string(n));
    std::vector<std::vector<std::string>> rows;
    for (const std::string model : {kBaseline, kBiased}) {
      std::vector<std::string> row = {model};
      bool any = false;
      for (int n : sizes) {
        const nlohmann::json* hit =
            FindCondition(conds, split, model, n, metrics.at("grid_mu").get<double>());
        if (hit) {
          any = true;
          row.push_back(FormatPair(Rate((*hit)["wer"]), Rate((*hit)["b_wer"])));
        } else {
          row.push_back("-");
        }
      }
      if (any) rows.push_back(row);
    }
    out << RenderTable(header, rows);
  }
  if (metrics.contains("mu_sweep")) {
    const auto& e = metrics["efficacy"];
    out << "\nbiasing weight sweep (" << e["split"].get<std::string>() << ", N=" << e["n"] << ")\n";
    std::vector<std::vector<std::string>> rows;
    for (const auto& s : metrics["mu_sweep"]) {
      rows.push_back({Num(s["mu"], 1), FormatPair(Rate(s["wer"]), Rate(s["b_wer"])),
                      std::to_string(s["dynamic_tokens"].get<long>())});
    }
    out << RenderTable({"mu", "WER (B-WER)", "dynamic tokens"}, rows);
    out << "\nbiasing efficacy: B-WER " << Pct(e["baseline_b_wer"]) << " -> "
        << Pct(e["biased_b_wer"]) << ", WER " << Pct(e["baseline_wer"]) << " -> "
        << Pct(e["biased_wer"]) << "\n";
  }
  if (metrics.contains("iterations")) {
    const auto& it = metrics["iterations"];
    out << "decoder steps on " << it["utterances"] << " utterances with emitted dynamic tokens: "
        << it["steps_baseline"] << " baseline, " << it["steps_biased"] << " biased";
    if (!it["reduction_pct"].is_null()) {
      out << " (" << Num(it["reduction_pct"], 1) << "% fewer; reference figure 14.5%)";
    }
    out << "\n";
    const auto& r = metrics["reference_steps"];
    out << "reference token steps on " << r["utterances"] << " utterances with targets: "
        << r["static_steps"] << " static, " << r["dynamic_steps"] << " dynamic\n";
  }
  if (metrics.contains("freezing")) {
    const auto& f = metrics["freezing"];
    out << "frozen tensors identical to backbone: " << (f["identical"].get<bool>() ? "yes" : "no")
        << " (" << f["compared"] << " compared)\n";
  }
  return out.str();
}

std::string RenderTiming(const nlohmann::json& report) {
  std::ostringstream out;
  out << "spec " << report.at("spec_hash").get<std::string>() << "\n";
  std::vector<std::vector<std::string>> rows;
  for (const auto& c : report.at("conditions")) {
    std::vector<double> runs = c["decode_s"];
    rows.push_back({c["label"], std::to_string(c["steps_total"].get<long>()),
                    Num(Median(runs), 3), Num(c["audio_s"], 1), Num(c["rtf"], 4)});
  }
  out << RenderTable({"condition", "steps", "decode s (median)", "audio s", "RTF"}, rows);
  if (report.contains("rtf")) {
    const auto& r = report["rtf"];
    out << "\nRTF baseline " << Num(r["baseline_rtf"], 4) << ", biased " << Num(r["biased_rtf"], 4)
        << " (" << Num(r["reduction_pct"], 1) << "% lower; reference figure 7.5%)\n";
  }
  return out.str();
}

}  // namespace dvcb
