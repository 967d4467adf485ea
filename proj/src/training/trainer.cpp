#include "adcare/training/trainer.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <random>

#include "json.hpp"

#include "adcare/error.h"
#include "adcare/tensor/ops.h"
#include "adcare/tensor/optim.h"

namespace adcare::training {

using decoder::VisionLanguageModel;
using json = nlohmann::ordered_json;

const char* to_string(Stage stage) { return stage == Stage::pretrain ? "pretrain" : "finetune"; }

const char* to_string(TuneMode mode) {
  switch (mode) {
    case TuneMode::frozen: return "frozen";
    case TuneMode::regular: return "regular";
    case TuneMode::lora: return "lora";
  }
  return "?";
}

Stage parse_stage(const std::string& text) {
  if (text == "pretrain") return Stage::pretrain;
  if (text == "finetune") return Stage::finetune;
  throw ConfigError("unknown stage '" + text + "' (expected pretrain or finetune)");
}

TuneMode parse_mode(const std::string& text) {
  if (text == "frozen" || text == "pre-trained" || text == "pretrained") return TuneMode::frozen;
  if (text == "regular") return TuneMode::regular;
  if (text == "lora") return TuneMode::lora;
  throw ConfigError("unknown tuning mode '" + text + "' (expected frozen, regular or lora)");
}

TrainConfig default_pretrain_config() {
  TrainConfig c;
  c.stage = Stage::pretrain;
  c.mode = TuneMode::regular;
  c.learning_rate = 1e-5;
  c.batch_size = 64;
  return c;
}

TrainConfig default_finetune_config() {
  TrainConfig c;
  c.stage = Stage::finetune;
  c.learning_rate = 2e-5;
  c.batch_size = 128;
  return c;
}

void validate(const TrainConfig& cfg) {
  if (cfg.stage == Stage::pretrain && cfg.mode != TuneMode::regular) {
    throw ConfigError(std::string("pre-training does not support mode '") + to_string(cfg.mode) + "'");
  }
  if (cfg.learning_rate < 0.0) throw ConfigError("learning rate must be non-negative");
  if (cfg.batch_size == 0) throw ConfigError("batch size must be positive");
  if (cfg.epochs == 0 && cfg.max_steps == 0) throw ConfigError("need at least one epoch or a step budget");
  if (cfg.weight_decay < 0.0) throw ConfigError("weight decay must be non-negative");
  if (cfg.warmup_ratio < 0.0 || cfg.warmup_ratio >= 1.0) throw ConfigError("warmup ratio must be in [0, 1)");
  if (cfg.schedule != "cosine") throw ConfigError("unsupported schedule '" + cfg.schedule + "'");
  if (!(cfg.loss_temperature > 0.0)) throw ConfigError("loss temperature must be positive");
  for (double w : cfg.class_weights)
    if (!(w > 0.0)) throw ConfigError("class weights must be positive");
  if (cfg.mode == TuneMode::lora && (cfg.lora_rank == 0 || !(cfg.lora_alpha > 0.0))) {
    throw ConfigError("LoRA needs a positive rank and alpha");
  }
}

double lr_at(std::size_t step, std::size_t total, const TrainConfig& cfg) {
  if (step > total) {
    throw ContractError("step " + std::to_string(step) + " is past the schedule end " + std::to_string(total));
  }
  const auto warmup = static_cast<std::size_t>(std::ceil(cfg.warmup_ratio * static_cast<double>(total)));
  if (step < warmup) return cfg.learning_rate * static_cast<double>(step) / static_cast<double>(warmup);
  if (total == warmup) return step == total ? cfg.learning_rate : 0.0;
  const double progress = static_cast<double>(step - warmup) / static_cast<double>(total - warmup);
  return cfg.learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

std::size_t total_steps(std::size_t examples, const TrainConfig& cfg) {
  if (cfg.max_steps > 0) return cfg.max_steps;
  return cfg.epochs * ((examples + cfg.batch_size - 1) / cfg.batch_size);
}

const GroupCensus* TrainReport::group(const std::string& name) const {
  for (const auto& g : census)
    if (g.group == name) return &g;
  return nullptr;
}

std::string TrainReport::to_jsonl() const {
  std::map<std::size_t, const EpochRecord*> by_epoch;
  for (const auto& e : epochs) by_epoch[e.epoch] = &e;
  std::string out;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto& s = steps[i];
    json line{{"stage", to_string(stage)}, {"mode", to_string(mode)}, {"step", s.step},   {"epoch", s.epoch},
              {"lr", s.learning_rate},     {"loss", s.loss},          {"grad_norm", s.grad_norm}};
    const bool epoch_end = i + 1 == steps.size() || steps[i + 1].epoch != s.epoch;
    if (epoch_end && by_epoch.contains(s.epoch)) {
      line["val_accuracy"] = by_epoch[s.epoch]->accuracy;
      line["val_score"] = by_epoch[s.epoch]->score;
    }
    out += line.dump() + "\n";
  }
  if (steps.empty()) {
    for (const auto& e : epochs) {
      out += json{{"stage", to_string(stage)}, {"mode", to_string(mode)}, {"epoch", e.epoch},
                  {"val_accuracy", e.accuracy}, {"val_score", e.score}}.dump() + "\n";
    }
  }
  return out;
}

std::string TrainReport::census_json() const {
  json groups = json::array();
  for (const auto& g : census) {
    groups.push_back({{"group", g.group}, {"trainable", g.trainable}, {"changed", g.changed},
                      {"max_abs_delta", g.max_abs_delta}});
  }
  return json{{"stage", to_string(stage)}, {"mode", to_string(mode)}, {"groups", groups}}.dump(2) + "\n";
}

Tensor example_loss(const VisionLanguageModel& model, const VqaExample& example, const TrainConfig& cfg) {
  auto ll = model.log_likelihood(example.visual, example.prompt, example.answer);
  Tensor nll = scale(ll.total, -1.0 / static_cast<double>(example.answer.size()));
  if (cfg.stage == Stage::pretrain) return nll;
  double w = 1.0;
  if (!cfg.class_weights.empty()) {
    if (example.label < 0 || static_cast<std::size_t>(example.label) >= cfg.class_weights.size()) {
      throw IndexError("example " + example.id + " has label " + std::to_string(example.label) +
                       " without a class weight");
    }
    w = cfg.class_weights[static_cast<std::size_t>(example.label)];
  }
  if (w == 1.0 && cfg.loss_temperature == 1.0) return nll;
  return scale(nll, w / cfg.loss_temperature);
}

namespace {

struct Snapshot {
  std::vector<NamedParameter> params;
  std::vector<std::vector<double>> values;
  std::vector<bool> trainable;
};

Snapshot take_snapshot(std::vector<NamedParameter> params) {
  Snapshot s;
  for (const auto& p : params) {
    s.values.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
    s.trainable.push_back(p.tensor.requires_grad());
  }
  s.params = std::move(params);
  return s;
}

std::vector<GroupCensus> census_of(const Snapshot& before) {
  std::vector<GroupCensus> out;
  auto slot = [&](const std::string& group) -> GroupCensus& {
    for (auto& g : out)
      if (g.group == group) return g;
    out.push_back({group, false, false, 0.0});
    return out.back();
  };
  for (std::size_t k = 0; k < before.params.size(); ++k) {
    const auto& p = before.params[k];
    GroupCensus& g = slot(p.group);
    g.trainable = g.trainable || before.trainable[k];
    auto now = p.tensor.data();
    for (std::size_t i = 0; i < now.size(); ++i) {
      const double d = std::abs(now[i] - before.values[k][i]);
      if (now[i] != before.values[k][i]) g.changed = true;
      g.max_abs_delta = std::max(g.max_abs_delta, d);
    }
  }
  return out;
}

void set_all(const std::vector<NamedParameter>& params, bool on) {
  for (auto p : params) p.tensor.set_requires_grad(on);
}

TrainReport run(VisionLanguageModel& model, std::span<const VqaExample> data, const TrainConfig& cfg,
                std::span<const NamedParameter> extra_frozen, const EpochEvaluator& evaluate,
                std::vector<NamedParameter> trainable) {
  const auto started = std::chrono::steady_clock::now();
  TrainReport report;
  report.stage = cfg.stage;
  report.mode = cfg.mode;

  auto all = model.parameters();
  set_all(all, false);
  for (auto p : extra_frozen) p.tensor.set_requires_grad(false);
  set_all(trainable, true);
  std::vector<NamedParameter> tracked = all;
  tracked.insert(tracked.end(), extra_frozen.begin(), extra_frozen.end());
  const Snapshot before = take_snapshot(tracked);

  if (cfg.mode == TuneMode::frozen) {
    if (evaluate) report.epochs.push_back(evaluate(model, 0));
  } else {
    const std::size_t total = total_steps(data.size(), cfg);
    const std::size_t per_epoch = (data.size() + cfg.batch_size - 1) / cfg.batch_size;
    AdamW opt(trainable, {.weight_decay = cfg.weight_decay});
    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(data.size());
    std::size_t cursor = order.size();
    std::size_t epoch = 0;
    for (std::size_t s = 0; s < total; ++s) {
      if (cursor >= order.size()) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      epoch = s / per_epoch;
      const std::size_t end = std::min(order.size(), cursor + cfg.batch_size);
      const double inv = 1.0 / static_cast<double>(end - cursor);
      opt.zero_grad();
      double loss = 0.0;
      for (std::size_t i = cursor; i < end; ++i) {
        Tensor l = example_loss(model, data[order[i]], cfg);
        loss += l.item() * inv;
        backward(scale(l, inv));
      }
      cursor = end;
      const double norm = opt.clip_grad_norm(cfg.grad_clip);
      const double lr = lr_at(s + 1, total, cfg);
      opt.step(lr);
      if (!std::isfinite(loss)) throw std::runtime_error("training loss diverged at step " + std::to_string(s));
      report.steps.push_back({s, epoch, lr, loss, norm});
      const bool epoch_done = (s + 1) % per_epoch == 0 || s + 1 == total;
      if (epoch_done && evaluate) report.epochs.push_back(evaluate(model, epoch));
    }
  }
  report.census = census_of(before);
  set_all(model.parameters(), false);
  report.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

}  // namespace

TrainReport pretrain(VisionLanguageModel& model, std::span<const VqaExample> data, const TrainConfig& cfg,
                     std::span<const NamedParameter> extra_frozen, const EpochEvaluator& evaluate) {
  if (cfg.stage != Stage::pretrain) throw ConfigError("pretrain called with a fine-tuning config");
  validate(cfg);
  if (data.empty()) throw ContractError("pre-training dataset is empty");
  auto trainable = model.projection().parameters();
  if (cfg.train_word_embeddings) {
    for (const auto& p : model.decoder().base_parameters())
      if (p.name == "decoder.word_embedding") trainable.push_back(p);
  }
  return run(model, data, cfg, extra_frozen, evaluate, std::move(trainable));
}

TrainReport finetune(VisionLanguageModel& model, std::span<const VqaExample> data, const TrainConfig& cfg,
                     std::span<const NamedParameter> extra_frozen, const EpochEvaluator& evaluate) {
  if (cfg.stage != Stage::finetune) throw ConfigError("finetune called with a pre-training config");
  validate(cfg);
  if (data.empty() && cfg.mode != TuneMode::frozen) throw ContractError("fine-tuning dataset is empty");
  std::vector<NamedParameter> trainable;
  switch (cfg.mode) {
    case TuneMode::frozen:
      break;
    case TuneMode::regular:
      if (model.decoder().has_lora()) throw ConfigError("regular fine-tuning on a model with LoRA adapters attached");
      trainable = model.projection().parameters();
      for (auto& p : model.decoder().base_parameters()) trainable.push_back(std::move(p));
      break;
    case TuneMode::lora:
      if (!model.decoder().has_lora()) {
        const auto targets = model.decoder().linear_targets();
        model.decoder().apply_lora(targets, cfg.lora_rank, cfg.lora_alpha, cfg.seed ^ 0x10a4ULL);
      }
      trainable = model.decoder().adapter_parameters();
      break;
  }
  return run(model, data, cfg, extra_frozen, evaluate, std::move(trainable));
}

}  // namespace adcare::training
