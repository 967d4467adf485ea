#include "adcare/eval/experiment.h"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "json.hpp"

#include "adcare/encoder/checkpoint.h"
#include "adcare/error.h"
#include "adcare/tensor/ops.h"

namespace adcare::eval {

using json = nlohmann::ordered_json;
using training::LabeledClip;
using training::TuneMode;

RunSeeds RunSeeds::from(std::uint64_t seed) {
  return {seed, seed + 1, seed + 101, seed + 202, seed + 303, seed + 404, seed + 505, seed + 606};
}

const encoder::VideoSample& PreparedCorpus::video(const std::string& id) const {
  for (const auto& item : items)
    if (item.record.video_id == id) return item.video;
  throw DataError("no video for record " + id);
}

PreparedCorpus prepare_corpus(const ExperimentConfig& cfg, std::uint64_t seed) {
  const auto seeds = RunSeeds::from(seed);
  PreparedCorpus c;
  c.items = data::generate_synthetic_corpus(cfg.corpus, seeds.corpus);
  std::vector<data::AnnotationRecord> records;
  for (const auto& item : c.items) records.push_back(item.record);
  c.filtered = data::validate_and_filter(records);
  c.split = data::split(c.filtered.retained, cfg.split_ratio, seeds.split);
  return c;
}

encoder::VisualEncoderConfig visual_config(const ExperimentConfig& cfg) {
  const auto& g = cfg.corpus.geometry;
  return {g.height, g.width, g.channels, g.patch_size, cfg.embed_dim};
}

ArmEncoder build_arm(fusion::ArmKind kind, const ExperimentConfig& cfg, const PreparedCorpus& corpus,
                     std::uint64_t seed) {
  const auto seeds = RunSeeds::from(seed);
  ArmEncoder out{fusion::make_arm(kind, visual_config(cfg), seeds.encoder),
                 std::make_shared<encoder::TextEncoder>(decoder::Vocabulary::standard().size(), cfg.embed_dim,
                                                        seeds.text),
                 {}};
  if (kind == fusion::ArmKind::unified) {
    const auto& vocab = decoder::Vocabulary::standard();
    std::vector<encoder::AlignmentPair> pairs;
    for (const auto& r : corpus.split.train) pairs.push_back({&corpus.video(r.video_id), vocab.encode(r.caption)});
    auto acfg = cfg.prealign;
    acfg.seed = seeds.prealign;
    out.prealign_losses = encoder::prealign(*out.arm.encoder, *out.text, pairs, acfg).loss_history;
  }
  out.arm.encoder->set_trainable(false);
  out.text->set_trainable(false);
  return out;
}

std::vector<LabeledClip> featurize(const fusion::VisualArm& arm, std::span<const data::AnnotationRecord> records,
                                   const PreparedCorpus& corpus) {
  NoGradGuard guard;
  std::vector<LabeledClip> out;
  for (const auto& r : records) {
    const auto& video = corpus.video(r.video_id);
    const auto& want = corpus.items.front().video;
    const auto& sampled = video.frames > want.frames ? fusion::select_frames(video, want.frames) : video;
    out.push_back({r, arm.feature(sampled).detach(), false});
  }
  return out;
}

std::vector<LabeledClip> balance_clips(std::span<const LabeledClip> clips, const data::BalanceConfig& cfg,
                                       std::uint64_t seed) {
  std::vector<data::FeaturePoint> points;
  for (const auto& c : clips) {
    NoGradGuard guard;
    Tensor m = mean_over_axis(c.visual, 0);
    points.push_back({c.record.video_id, c.record.label, {m.data().begin(), m.data().end()}, false, 0, 0, 0.0});
  }
  const auto balanced = data::balance(points, cfg, seed);
  std::vector<LabeledClip> out;
  for (const auto& p : balanced) {
    if (!p.synthetic) {
      for (const auto& c : clips)
        if (c.record.video_id == p.id) {
          out.push_back(c);
          break;
        }
      continue;
    }
    const auto& a = clips[p.parent_a];
    const auto& b = clips[p.parent_b];
    std::vector<double> v(a.visual.numel());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.visual[i] + p.u * (b.visual[i] - a.visual[i]);
    LabeledClip syn{a.record, Tensor::from(a.visual.shape(), std::move(v)), true};
    syn.record.video_id = p.id;
    out.push_back(std::move(syn));
  }
  return out;
}

Responder model_responder(const decoder::VisionLanguageModel& model, const std::map<std::string, Tensor>& visual,
                          std::size_t max_tokens) {
  return [&model, &visual, max_tokens](const BenchmarkItem& item, const std::string& question) {
    const auto& vocab = decoder::Vocabulary::standard();
    auto it = visual.find(item.clip_id);
    if (it == visual.end()) throw DataError("no visual features for clip " + item.clip_id);
    return vocab.decode(model.answer(it->second, vocab.encode(question), max_tokens));
  };
}

BenchmarkResult evaluate_model(const decoder::VisionLanguageModel& model, std::span<const LabeledClip> validation,
                               const ExperimentConfig& cfg, const Judge& judge) {
  std::map<std::string, Tensor> visual;
  std::vector<data::AnnotationRecord> records;
  for (const auto& c : validation) {
    visual[c.record.video_id] = c.visual;
    records.push_back(c.record);
  }
  const auto items = items_from_records(records);
  return run_benchmark(items, model_responder(model, visual, cfg.max_answer_tokens), judge, cfg.dimensions);
}

decoder::ModelConfig model_config(const ExperimentConfig& cfg) { return {cfg.embed_dim, cfg.decoder}; }

std::unique_ptr<decoder::VisionLanguageModel> clone_model(const decoder::VisionLanguageModel& model,
                                                          std::uint64_t seed) {
  auto copy = std::make_unique<decoder::VisionLanguageModel>(model.config(), seed);
  if (model.decoder().has_lora()) {
    std::vector<decoder::LoraAdapter> adapters;
    for (const auto& a : model.decoder().adapters())
      adapters.push_back({a.target, a.a.clone(), a.b.clone(), a.rank, a.alpha});
    copy->decoder().attach(std::move(adapters));
  }
  encoder::restore(copy->parameters(), encoder::snapshot(model.parameters()));
  return copy;
}

ArmOutcome run_arm(fusion::ArmKind kind, const ExperimentConfig& cfg, std::uint64_t seed,
                   std::span<const TuneMode> modes, const Judge& judge) {
  const auto seeds = RunSeeds::from(seed);
  const auto corpus = prepare_corpus(cfg, seed);
  auto enc = build_arm(kind, cfg, corpus, seed);
  auto train = featurize(enc.arm, corpus.split.train, corpus);
  const auto validation = featurize(enc.arm, corpus.split.validation, corpus);
  if (cfg.balance) train = balance_clips(train, cfg.balancing, seeds.balance);

  const auto& vocab = decoder::Vocabulary::standard();
  ArmOutcome out;
  out.kind = kind;
  out.seed = seed;
  out.prealign_losses = enc.prealign_losses;

  decoder::VisionLanguageModel base(model_config(cfg), seeds.model);
  auto pcfg = cfg.pretrain;
  pcfg.seed = seeds.train;
  out.pretrain = training::pretrain(base, training::pretrain_examples(train, vocab), pcfg,
                                    enc.arm.encoder->parameters());
  const auto ft_data = training::finetune_examples(train, vocab, cfg.chat_rounds, seeds.train);
  for (TuneMode mode : modes) {
    auto model = clone_model(base, seeds.model);
    auto fcfg = cfg.finetune;
    fcfg.mode = mode;
    fcfg.seed = seeds.train + 1;
    out.finetune[training::to_string(mode)] =
        training::finetune(*model, ft_data, fcfg, enc.arm.encoder->parameters());
    out.results[training::to_string(mode)] = evaluate_model(*model, validation, cfg, judge);
  }
  return out;
}

void check_matched_budgets(const ExperimentConfig& a, const ExperimentConfig& b) {
  auto same = [](const training::TrainConfig& x, const training::TrainConfig& y) {
    return x.learning_rate == y.learning_rate && x.batch_size == y.batch_size && x.epochs == y.epochs &&
           x.max_steps == y.max_steps && x.mode == y.mode && x.weight_decay == y.weight_decay &&
           x.warmup_ratio == y.warmup_ratio;
  };
  if (!same(a.pretrain, b.pretrain) || !same(a.finetune, b.finetune)) {
    throw ConfigError("ablation arms must share the same pre-training and fine-tuning budget");
  }
  if (a.corpus.n != b.corpus.n || a.split_ratio != b.split_ratio || a.embed_dim != b.embed_dim ||
      a.balance != b.balance) {
    throw ConfigError("ablation arms must use the same corpus size, split and feature width");
  }
}

namespace {

std::pair<double, double> mean_sd(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
  if (v.size() < 2) return {m, 0.0};
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return {m, std::sqrt(s / double(v.size() - 1))};
}

void finish(ArmSummary& s) {
  std::tie(s.accuracy_mean, s.accuracy_sd) = mean_sd(s.accuracy);
  std::tie(s.score_mean, s.score_sd) = mean_sd(s.score);
}

json summary_json(const ArmSummary& s) {
  return {{"arm", s.arm},
          {"accuracy", s.accuracy},
          {"score", s.score},
          {"accuracy_mean", s.accuracy_mean},
          {"accuracy_sd", s.accuracy_sd},
          {"score_mean", s.score_mean},
          {"score_sd", s.score_sd}};
}

ArmSummary summary_from(const json& j) {
  ArmSummary s;
  s.arm = j.at("arm").get<std::string>();
  s.accuracy = j.at("accuracy").get<std::vector<double>>();
  s.score = j.at("score").get<std::vector<double>>();
  s.accuracy_mean = j.at("accuracy_mean").get<double>();
  s.accuracy_sd = j.at("accuracy_sd").get<double>();
  s.score_mean = j.at("score_mean").get<double>();
  s.score_sd = j.at("score_sd").get<double>();
  return s;
}

}  // namespace

AblationTable run_ablation(std::span<const std::uint64_t> seeds, const ExperimentConfig& first_cfg,
                           const ExperimentConfig& second_cfg, const Judge& judge, fusion::ArmKind first,
                           fusion::ArmKind second) {
  if (seeds.size() < 3) throw ConfigError("ablation needs at least 3 seeds");
  check_matched_budgets(first_cfg, second_cfg);
  AblationTable t;
  t.seeds.assign(seeds.begin(), seeds.end());
  t.first.arm = fusion::to_string(first);
  t.second.arm = fusion::to_string(second);
  const std::string mode = training::to_string(first_cfg.finetune.mode);
  const TuneMode modes[] = {first_cfg.finetune.mode};
  for (auto seed : seeds) {
    const auto a = run_arm(first, first_cfg, seed, modes, judge).results.at(mode);
    const auto b = run_arm(second, second_cfg, seed, modes, judge).results.at(mode);
    t.first.accuracy.push_back(a.accuracy);
    t.first.score.push_back(a.mean_score);
    t.second.accuracy.push_back(b.accuracy);
    t.second.score.push_back(b.mean_score);
    t.delta_accuracy.push_back(a.accuracy - b.accuracy);
    t.delta_score.push_back(a.mean_score - b.mean_score);
  }
  finish(t.first);
  finish(t.second);
  t.delta_accuracy_mean = mean_sd(t.delta_accuracy).first;
  t.delta_score_mean = mean_sd(t.delta_score).first;
  return t;
}

std::string ablation_json(const AblationTable& t) {
  return json{{"schema", "adcare.ablation/1"},
              {"seeds", t.seeds},
              {"arms", json::array({summary_json(t.first), summary_json(t.second)})},
              {"delta", {{"accuracy", t.delta_accuracy},
                         {"score", t.delta_score},
                         {"accuracy_mean", t.delta_accuracy_mean},
                         {"score_mean", t.delta_score_mean}}}}
             .dump(2) +
         "\n";
}

AblationTable parse_ablation_json(const std::string& text) {
  try {
    const auto j = json::parse(text);
    if (j.at("schema") != "adcare.ablation/1") throw ParseError("unexpected ablation schema");
    AblationTable t;
    t.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    const auto& arms = j.at("arms");
    if (arms.size() != 2) throw ParseError("ablation table needs exactly two arms");
    t.first = summary_from(arms[0]);
    t.second = summary_from(arms[1]);
    const auto& d = j.at("delta");
    t.delta_accuracy = d.at("accuracy").get<std::vector<double>>();
    t.delta_score = d.at("score").get<std::vector<double>>();
    t.delta_accuracy_mean = d.at("accuracy_mean").get<double>();
    t.delta_score_mean = d.at("score_mean").get<double>();
    return t;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed ablation table: ") + e.what());
  }
}

std::string ablation_text(const AblationTable& t) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-12s %18s %14s\n", "arm", "accuracy (%)", "score");
  out += buf;
  for (const auto* s : {&t.first, &t.second}) {
    std::snprintf(buf, sizeof buf, "%-12s %10.1f +- %4.1f %7.2f +- %4.2f\n", s->arm.c_str(), s->accuracy_mean,
                  s->accuracy_sd, s->score_mean, s->score_sd);
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "%-12s %+10.1f %+14.2f\n", "delta", t.delta_accuracy_mean, t.delta_score_mean);
  out += buf;
  return out;
}

ModeStudy run_mode_study(std::span<const std::uint64_t> seeds, const ExperimentConfig& cfg, const Judge& judge) {
  ModeStudy study;
  study.seeds.assign(seeds.begin(), seeds.end());
  const TuneMode modes[] = {TuneMode::frozen, TuneMode::regular, TuneMode::lora};
  for (auto seed : seeds) {
    const auto outcome = run_arm(fusion::ArmKind::unified, cfg, seed, modes, judge);
    for (TuneMode m : modes) {
      auto& s = study.modes[training::to_string(m)];
      s.arm = training::to_string(m);
      s.accuracy.push_back(outcome.results.at(s.arm).accuracy);
      s.score.push_back(outcome.results.at(s.arm).mean_score);
    }
  }
  for (auto& [_, s] : study.modes) finish(s);
  return study;
}

namespace {

const char* tuning_label(const std::string& mode) {
  if (mode == "frozen") return "pre-trained";
  if (mode == "regular") return "regular";
  if (mode == "lora") return "lora";
  return nullptr;
}

}  // namespace

std::string results_ledger_json(const std::vector<std::pair<std::string, BenchmarkResult>>& rows) {
  json out = json::array();
  for (const auto& [mode, r] : rows) {
    const char* label = tuning_label(mode);
    out.push_back({{"tuning_type", label ? label : mode}, {"accuracy", r.accuracy}, {"score", r.mean_score}});
  }
  return json{{"schema", "adcare.results/1"}, {"rows", out}}.dump(2) + "\n";
}

std::string results_ledger_json(const ModeStudy& study) {
  json out = json::array();
  for (const char* mode : {"frozen", "regular", "lora"}) {
    auto it = study.modes.find(mode);
    if (it == study.modes.end()) continue;
    out.push_back({{"tuning_type", tuning_label(mode)},
                   {"accuracy", it->second.accuracy_mean},
                   {"score", it->second.score_mean}});
  }
  return json{{"schema", "adcare.results/1"}, {"rows", out}}.dump(2) + "\n";
}

}  // namespace adcare::eval
