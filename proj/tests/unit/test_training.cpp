#include <cmath>
#include <cstring>

#include <gtest/gtest.h>

#include "adcare/decoder/model.h"
#include "adcare/decoder/vocabulary.h"
#include "adcare/encoder/checkpoint.h"
#include "adcare/error.h"
#include "adcare/tensor/ops.h"
#include "adcare/training/examples.h"
#include "adcare/training/trainer.h"
#include "support/clips.h"

using namespace adcare;
using namespace adcare::training;
using decoder::Vocabulary;
using decoder::VisionLanguageModel;

namespace {

decoder::ModelConfig small_model() {
  decoder::ModelConfig m;
  m.visual_dim = 16;
  m.decoder = {Vocabulary::standard().size(), 32, 4, 2, 64, 192};
  return m;
}

TrainConfig quick(Stage stage, TuneMode mode, std::size_t steps, double lr = 3e-3) {
  TrainConfig c = stage == Stage::pretrain ? default_pretrain_config() : default_finetune_config();
  c.mode = mode;
  c.max_steps = steps;
  c.batch_size = 4;
  c.learning_rate = lr;
  return c;
}

using Arrays = std::vector<encoder::NamedArray>;

Arrays select(const Arrays& all, const std::string& prefix, bool keep) {
  Arrays out;
  for (const auto& a : all)
    if ((a.name.rfind(prefix, 0) == 0) == keep) out.push_back(a);
  return out;
}

double mean_loss(const VisionLanguageModel& m, std::span<const VqaExample> data, const TrainConfig& cfg) {
  NoGradGuard guard;
  double s = 0;
  for (const auto& e : data) s += example_loss(m, e, cfg).item();
  return s / double(data.size());
}

struct Fixture {
  std::vector<LabeledClip> clips = adcare::testing::synthetic_clips(24, 5);
  std::vector<VqaExample> captions = pretrain_examples(clips, Vocabulary::standard());
  std::vector<VqaExample> chats = finetune_examples(clips, Vocabulary::standard(), 2, 9);
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

}  // namespace

TEST(Schedule, DefaultsMirrorTheOptimizerTable) {
  const auto p = default_pretrain_config(), f = default_finetune_config();
  EXPECT_EQ(p.stage, Stage::pretrain);
  EXPECT_EQ(p.learning_rate, 1e-5);
  EXPECT_EQ(p.batch_size, 64u);
  EXPECT_EQ(f.learning_rate, 2e-5);
  EXPECT_EQ(f.batch_size, 128u);
  for (const auto& c : {p, f}) {
    EXPECT_EQ(c.epochs, 5u);
    EXPECT_EQ(c.weight_decay, 0.01);
    EXPECT_EQ(c.warmup_ratio, 0.03);
    EXPECT_EQ(c.schedule, "cosine");
  }
}

TEST(Schedule, WarmupPeakAndCosineEnd) {
  TrainConfig c = default_finetune_config();
  c.learning_rate = 2e-5;
  const std::size_t total = 400;
  const std::size_t warm = std::size_t(std::ceil(0.03 * total));
  EXPECT_EQ(lr_at(0, total, c), 0.0);
  EXPECT_EQ(lr_at(warm, total, c), 2e-5);
  EXPECT_NEAR(lr_at(total, total, c), 0.0, 1e-12);
  EXPECT_NEAR(lr_at(warm / 2, total, c), 2e-5 * double(warm / 2) / double(warm), 1e-18);
  const double mid = warm + (total - warm) / 2.0;
  EXPECT_NEAR(lr_at(std::size_t(mid), total, c), 1e-5, 1e-7);
  for (std::size_t s = warm; s < total; ++s) EXPECT_GE(lr_at(s, total, c), lr_at(s + 1, total, c));
  EXPECT_THROW(lr_at(total + 1, total, c), ContractError);
}

TEST(Schedule, StepBudget) {
  TrainConfig c = default_pretrain_config();
  EXPECT_EQ(total_steps(130, c), 5u * 3u);
  c.max_steps = 7;
  EXPECT_EQ(total_steps(130, c), 7u);
}

TEST(Schedule, ValidationRejectsBadValues) {
  auto bad = [](auto edit) {
    TrainConfig c = default_finetune_config();
    edit(c);
    return c;
  };
  EXPECT_NO_THROW(validate(default_pretrain_config()));
  EXPECT_THROW(validate(bad([](TrainConfig& c) { c.loss_temperature = 0; })), ConfigError);
  EXPECT_THROW(validate(bad([](TrainConfig& c) { c.class_weights = {1, 0, 1}; })), ConfigError);
  EXPECT_THROW(validate(bad([](TrainConfig& c) { c.schedule = "linear"; })), ConfigError);
  EXPECT_THROW(validate(bad([](TrainConfig& c) { c.stage = Stage::pretrain, c.mode = TuneMode::lora; })),
               ConfigError);
  EXPECT_THROW(parse_mode("full"), ConfigError);
}

TEST(Loss, NeutralWeightsMatchUnweighted) {
  const auto& f = fixture();
  VisionLanguageModel m(small_model(), 1);
  TrainConfig plain = default_finetune_config();
  TrainConfig neutral = plain;
  neutral.class_weights = {1, 1, 1};
  neutral.loss_temperature = 1.0;
  TrainConfig heavy = plain;
  heavy.class_weights = {2, 3, 4};
  heavy.loss_temperature = 0.5;
  for (std::size_t i = 0; i < 12; ++i) {
    const auto& e = f.chats[i];
    const double a = example_loss(m, e, plain).item();
    EXPECT_NEAR(example_loss(m, e, neutral).item(), a, 1e-12);
    EXPECT_NEAR(example_loss(m, e, heavy).item(), a * heavy.class_weights[e.label] / 0.5, 1e-12);
  }
}

TEST(Loss, IsMeanAnswerNegativeLogLikelihood) {
  const auto& f = fixture();
  VisionLanguageModel m(small_model(), 2);
  const auto& e = f.captions[0];
  const auto ll = m.log_likelihood(e.visual, e.prompt, e.answer);
  EXPECT_NEAR(example_loss(m, e, default_pretrain_config()).item(), -ll.total.item() / double(e.answer.size()),
              1e-12);
  EXPECT_EQ(e.answer.back(), Vocabulary::kEos);
}

TEST(Pretrain, OnlyProjectionMoves) {
  const auto& f = fixture();
  VisionLanguageModel m(small_model(), 3);
  encoder::VisualEncoder enc({}, 4);
  const auto encoder_before = encoder::snapshot(enc.parameters());
  const auto before = encoder::snapshot(m.parameters());
  const auto r = pretrain(m, f.captions, quick(Stage::pretrain, TuneMode::regular, 1), enc.parameters());
  const auto after = encoder::snapshot(m.parameters());
  EXPECT_EQ(select(after, "projection.", false), select(before, "projection.", false));
  EXPECT_NE(select(after, "projection.", true), select(before, "projection.", true));
  EXPECT_EQ(encoder::snapshot(enc.parameters()), encoder_before);

  ASSERT_NE(r.group("projection"), nullptr);
  EXPECT_TRUE(r.group("projection")->changed);
  for (const auto& g : r.census) {
    EXPECT_EQ(g.trainable, g.group == "projection") << g.group;
    if (g.group != "projection") {
      EXPECT_EQ(g.max_abs_delta, 0.0) << g.group;
    }
  }
  for (const char* g : {"decoder.embedding", "decoder.blocks", "decoder.output", "encoder.visual"})
    EXPECT_NE(r.group(g), nullptr) << g;
}

TEST(Pretrain, WordEmbeddingFlagAddsOnlyThatTable) {
  const auto& f = fixture();
  VisionLanguageModel m(small_model(), 3);
  auto cfg = quick(Stage::pretrain, TuneMode::regular, 2);
  cfg.train_word_embeddings = true;
  const auto before = encoder::snapshot(m.parameters());
  pretrain(m, f.captions, cfg);
  const auto after = encoder::snapshot(m.parameters());
  for (std::size_t i = 0; i < before.size(); ++i) {
    const bool open = before[i].name.rfind("projection.", 0) == 0 || before[i].name == "decoder.word_embedding";
    if (!open) {
      EXPECT_EQ(after[i], before[i]) << before[i].name;
    }
  }
}

TEST(Pretrain, ZeroLearningRateChangesNothing) {
  const auto& f = fixture();
  VisionLanguageModel m(small_model(), 3);
  const auto before = encoder::snapshot(m.parameters());
  pretrain(m, f.captions, quick(Stage::pretrain, TuneMode::regular, 3, 0.0));
  EXPECT_EQ(encoder::snapshot(m.parameters()), before);
  finetune(m, f.chats, quick(Stage::finetune, TuneMode::regular, 3, 0.0));
  EXPECT_EQ(encoder::snapshot(m.parameters()), before);
}

TEST(Pretrain, EmptyDatasetAndWrongStage) {
  VisionLanguageModel m(small_model(), 3);
  EXPECT_THROW(pretrain(m, {}, quick(Stage::pretrain, TuneMode::regular, 3)), ContractError);
  const auto& f = fixture();
  EXPECT_THROW(pretrain(m, f.captions, quick(Stage::finetune, TuneMode::regular, 3)), ConfigError);
  EXPECT_THROW(finetune(m, f.chats, quick(Stage::pretrain, TuneMode::regular, 3)), ConfigError);
}

TEST(Pretrain, LossDropsOnSixtyFourPairs) {
  const auto clips = adcare::testing::synthetic_clips(64, 31);
  const auto data = pretrain_examples(clips, Vocabulary::standard());
  ASSERT_EQ(data.size(), 64u);
  int held = 0;
  auto full = small_model();
  full.decoder = {Vocabulary::standard().size(), 64, 4, 2, 128, 192};
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    VisionLanguageModel m(full, seed);
    auto cfg = quick(Stage::pretrain, TuneMode::regular, 200);
    cfg.seed = seed;
    const double initial = mean_loss(m, data, cfg);
    const auto r = pretrain(m, data, cfg);
    for (const auto& s : r.steps) ASSERT_TRUE(std::isfinite(s.loss));
    const double final_loss = mean_loss(m, data, cfg);
    if (final_loss < 0.8 * initial) ++held;
  }
  EXPECT_GE(held, 4);
}

TEST(Finetune, LoraLeavesBaseAndMovesAdapters) {
  const auto& f = fixture();
  VisionLanguageModel m(small_model(), 6);
  const auto before = encoder::snapshot(m.parameters());
  const auto r = finetune(m, f.chats, quick(Stage::finetune, TuneMode::lora, 4));
  EXPECT_TRUE(m.decoder().has_lora());
  auto after = encoder::snapshot(m.parameters());
  EXPECT_EQ(select(after, "lora.", false), before);
  double moved = 0;
  for (const auto& a : select(after, "lora.", true))
    for (double x : a.data) moved = std::max(moved, std::abs(x));
  EXPECT_GT(moved, 0.0);
  ASSERT_NE(r.group("lora"), nullptr);
  EXPECT_TRUE(r.group("lora")->changed);
  for (const auto& g : r.census) {
    if (g.group != "lora") {
      EXPECT_FALSE(g.changed) << g.group;
    }
  }
}

TEST(Finetune, RegularMovesDecoderAndProjection) {
  const auto& f = fixture();
  VisionLanguageModel m(small_model(), 6);
  const auto r = finetune(m, f.chats, quick(Stage::finetune, TuneMode::regular, 3));
  for (const char* g : {"projection", "decoder.embedding", "decoder.blocks", "decoder.output"}) {
    ASSERT_NE(r.group(g), nullptr) << g;
    EXPECT_TRUE(r.group(g)->trainable) << g;
    EXPECT_TRUE(r.group(g)->changed) << g;
  }
}

TEST(Finetune, RegularRefusesAttachedAdapters) {
  const auto& f = fixture();
  VisionLanguageModel m(small_model(), 6);
  m.decoder().apply_lora(m.decoder().linear_targets(), 2, 4, 1);
  EXPECT_THROW(finetune(m, f.chats, quick(Stage::finetune, TuneMode::regular, 3)), ConfigError);
}

TEST(Finetune, FrozenOnlyEvaluates) {
  const auto& f = fixture();
  VisionLanguageModel m(small_model(), 6);
  const auto before = encoder::snapshot(m.parameters());
  int calls = 0;
  const auto r = finetune(m, f.chats, quick(Stage::finetune, TuneMode::frozen, 5), {},
                          [&](const VisionLanguageModel&, std::size_t e) {
                            ++calls;
                            return EpochRecord{e, 12.5, 2.0};
                          });
  EXPECT_EQ(calls, 1);
  EXPECT_TRUE(r.steps.empty());
  EXPECT_EQ(encoder::snapshot(m.parameters()), before);
  for (const auto& g : r.census) EXPECT_FALSE(g.trainable || g.changed);
  EXPECT_NE(r.to_jsonl().find("\"val_accuracy\":12.5"), std::string::npos);
}

TEST(Finetune, SameSeedSameWeights) {
  const auto& f = fixture();
  auto run = [&] {
    VisionLanguageModel m(small_model(), 8);
    auto cfg = quick(Stage::finetune, TuneMode::lora, 5);
    cfg.seed = 3;
    const auto r = finetune(m, f.chats, cfg);
    return std::make_pair(encoder::encode_checkpoint(encoder::snapshot(m.parameters())), r.to_jsonl());
  };
  const auto a = run(), b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}

TEST(Report, OneJsonLinePerStepWithoutWallClock) {
  const auto& f = fixture();
  VisionLanguageModel m(small_model(), 6);
  const auto r = pretrain(m, f.captions, quick(Stage::pretrain, TuneMode::regular, 4));
  const auto text = r.to_jsonl();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 4);
  EXPECT_EQ(text.find("wall"), std::string::npos);
  EXPECT_NE(r.census_json().find("\"projection\""), std::string::npos);
}

TEST(Examples, ChatExamplesReplayHistory) {
  const auto& f = fixture();
  const auto& clip = f.clips[0];
  const std::span<const LabeledClip> one(&clip, 1);
  const auto ex = finetune_examples(one, Vocabulary::standard(), 2, 1);
  ASSERT_EQ(ex.size(), clip.record.qa_pairs.size() + 1);
  const auto& chat = ex.back();
  EXPECT_NE(std::find(chat.prompt.begin(), chat.prompt.end(), Vocabulary::kSeparator), chat.prompt.end());
  for (const auto& e : ex) {
    EXPECT_EQ(e.label, int(clip.record.label));
    EXPECT_EQ(e.answer.back(), Vocabulary::kEos);
  }
  const auto single = finetune_examples(one, Vocabulary::standard(), 1, 1);
  EXPECT_EQ(single.size(), clip.record.qa_pairs.size());
}
