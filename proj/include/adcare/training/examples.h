#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "adcare/data/annotation.h"
#include "adcare/decoder/vocabulary.h"
#include "adcare/training/trainer.h"

namespace adcare::training {

/// A record with its precomputed unified visual tokens [F + N, D].
struct LabeledClip {
  data::AnnotationRecord record;
  Tensor visual;
  bool synthetic = false;
};

/// One caption example per clip, prompted with the fixed describe prompt.
std::vector<VqaExample> pretrain_examples(std::span<const LabeledClip> clips, const decoder::Vocabulary& vocab);

/// Per clip: every qa pair as a single-round example (consistency items use
/// their paraphrase), plus, when chat_rounds >= 2, one multi-round example
/// whose history replays the first chat_rounds - 1 pairs in a seeded order.
std::vector<VqaExample> finetune_examples(std::span<const LabeledClip> clips, const decoder::Vocabulary& vocab,
                                          std::size_t chat_rounds, std::uint64_t seed);

std::vector<int> answer_tokens(const decoder::Vocabulary& vocab, const std::string& text);

}  // namespace adcare::training
