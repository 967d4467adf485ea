#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adcare/decoder/model.h"

namespace adcare::training {

enum class Stage { pretrain, finetune };
enum class TuneMode { frozen, regular, lora };

const char* to_string(Stage stage);
const char* to_string(TuneMode mode);
Stage parse_stage(const std::string& text);
TuneMode parse_mode(const std::string& text);

struct TrainConfig {
  Stage stage = Stage::finetune;
  TuneMode mode = TuneMode::regular;
  double learning_rate = 2e-5;
  std::size_t batch_size = 128;
  std::size_t epochs = 5;
  double weight_decay = 0.01;
  double warmup_ratio = 0.03;
  std::string schedule = "cosine";
  std::uint64_t seed = 0;
  // Indexed by adherence label (positive, negative, ambiguous). Empty means 1.
  std::vector<double> class_weights;
  double loss_temperature = 1.0;
  // When nonzero, overrides epochs * ceil(n / batch) as the step budget.
  std::size_t max_steps = 0;
  // Pre-training only: also update the decoder word embeddings.
  bool train_word_embeddings = false;
  std::size_t lora_rank = 8;
  double lora_alpha = 16.0;
  double grad_clip = 1.0;
};

// Published optimizer settings for each stage.
TrainConfig default_pretrain_config();
TrainConfig default_finetune_config();

// Throws ConfigError on out-of-range values or an invalid stage/mode pair.
void validate(const TrainConfig& cfg);

/// Linear warmup over ceil(warmup_ratio * total) steps to the peak rate, then
/// cosine decay to zero at total. Throws ContractError when step > total.
double lr_at(std::size_t step, std::size_t total_steps, const TrainConfig& cfg);

std::size_t total_steps(std::size_t examples, const TrainConfig& cfg);

/// One teacher-forced training item. visual holds precomputed unified tokens
/// [F + N, D]; the encoder is not part of this graph.
struct VqaExample {
  std::string id;
  Tensor visual;
  std::vector<int> prompt;
  std::vector<int> answer;  // ends with eos
  int label = 0;
};

struct StepRecord {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double learning_rate = 0.0;
  double loss = 0.0;
  double grad_norm = 0.0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double accuracy = 0.0;
  double score = 0.0;
};

struct GroupCensus {
  std::string group;
  bool trainable = false;
  bool changed = false;
  double max_abs_delta = 0.0;
};

struct TrainReport {
  Stage stage = Stage::finetune;
  TuneMode mode = TuneMode::regular;
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
  std::vector<GroupCensus> census;
  double wall_clock_seconds = 0.0;

  const GroupCensus* group(const std::string& name) const;
  // One JSON object per step; per-epoch validation is attached to the last
  // step of its epoch. Wall-clock is left out so reruns compare byte-equal.
  std::string to_jsonl() const;
  std::string census_json() const;
};

/// Per-example loss: mean negative log-likelihood over the answer tokens,
/// times class_weights[label], divided by loss_temperature. Pre-training
/// ignores both knobs.
Tensor example_loss(const decoder::VisionLanguageModel& model, const VqaExample& example, const TrainConfig& cfg);

// Called after every epoch (and once for frozen runs) to score the model on
// held-out data.
using EpochEvaluator = std::function<EpochRecord(const decoder::VisionLanguageModel&, std::size_t epoch)>;

/// Projection-only training on single-round (prompt, answer) pairs. All other
/// weights stay bit-identical. extra_frozen lists outside parameters (e.g. the
/// visual encoder) to include in the census.
TrainReport pretrain(decoder::VisionLanguageModel& model, std::span<const VqaExample> data, const TrainConfig& cfg,
                     std::span<const NamedParameter> extra_frozen = {}, const EpochEvaluator& evaluate = {});

/// Instruction tuning. regular updates decoder and projection, lora attaches
/// adapters (if none yet) and updates only those, frozen only evaluates.
TrainReport finetune(decoder::VisionLanguageModel& model, std::span<const VqaExample> data, const TrainConfig& cfg,
                     std::span<const NamedParameter> extra_frozen = {}, const EpochEvaluator& evaluate = {});

}  // namespace adcare::training
