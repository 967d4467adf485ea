#include "adcare/training/examples.h"

#include <algorithm>
#include <random>

#include "adcare/data/synthetic.h"
#include "adcare/decoder/chat.h"

namespace adcare::training {

using decoder::Vocabulary;

std::vector<int> answer_tokens(const Vocabulary& vocab, const std::string& text) {
  auto ids = vocab.encode(text);
  ids.push_back(Vocabulary::kEos);
  return ids;
}

std::vector<VqaExample> pretrain_examples(std::span<const LabeledClip> clips, const Vocabulary& vocab) {
  std::vector<VqaExample> out;
  const auto prompt = vocab.encode(data::kPretrainPrompt);
  for (const auto& c : clips) {
    out.push_back({c.record.video_id + "/caption", c.visual, prompt, answer_tokens(vocab, c.record.caption),
                   static_cast<int>(c.record.label)});
  }
  return out;
}

std::vector<VqaExample> finetune_examples(std::span<const LabeledClip> clips, const Vocabulary& vocab,
                                          std::size_t chat_rounds, std::uint64_t seed) {
  std::vector<VqaExample> out;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    const auto& c = clips[i];
    const int label = static_cast<int>(c.record.label);
    for (const auto& qa : c.record.qa_pairs) {
      const std::string& q = qa.paraphrase ? *qa.paraphrase : qa.question;
      out.push_back({c.record.video_id + "/" + qa.dimension, c.visual, vocab.encode(q),
                     answer_tokens(vocab, qa.answer), label});
    }
    const std::size_t rounds = std::min(chat_rounds, c.record.qa_pairs.size());
    if (rounds < 2) continue;
    std::vector<std::size_t> order(c.record.qa_pairs.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(i)};
    std::mt19937_64 rng(seq);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<decoder::ChatTurn> turns;
    for (std::size_t m = 0; m < rounds; ++m) {
      const auto& qa = c.record.qa_pairs[order[m]];
      turns.push_back({vocab.encode(qa.question), vocab.encode(qa.answer), static_cast<int>(m + 1)});
    }
    const auto& last = c.record.qa_pairs[order[rounds - 1]];
    out.push_back({c.record.video_id + "/chat" + std::to_string(rounds), c.visual,
                   decoder::build_round_input(turns, static_cast<int>(rounds)), answer_tokens(vocab, last.answer),
                   label});
  }
  return out;
}

}  // namespace adcare::training
