#include "adcare/decoder/model.h"

#include "adcare/decoder/vocabulary.h"

namespace adcare::decoder {

VisionLanguageModel::VisionLanguageModel(const ModelConfig& config, std::uint64_t seed)
    : config_(config),
      projection_(config.visual_dim, 2 * config.visual_dim, config.decoder.dim, seed * 2 + 1),
      decoder_(config.decoder, seed * 2 + 2) {}

namespace {

Tensor prompt_rows(const Decoder& d, std::span<const int> prompt) {
  return prompt.empty() ? Tensor() : d.embed_text(prompt);
}

}  // namespace

SequenceLikelihood VisionLanguageModel::log_likelihood(const Tensor& visual, std::span<const int> prompt,
                                                       std::span<const int> answer) const {
  Tensor qv = visual.defined() ? projection_.project(visual) : Tensor();
  return sequence_log_likelihood(decoder_, qv, prompt_rows(decoder_, prompt), answer);
}

std::vector<int> VisionLanguageModel::answer(const Tensor& visual, std::span<const int> prompt,
                                             std::size_t max_tokens) const {
  NoGradGuard guard;
  Tensor qv = visual.defined() ? projection_.project(visual) : Tensor();
  return greedy_decode(decoder_, qv, prompt_rows(decoder_, prompt), max_tokens, Vocabulary::kEos);
}

std::vector<NamedParameter> VisionLanguageModel::parameters() const {
  auto out = projection_.parameters();
  for (auto& p : decoder_.base_parameters()) out.push_back(std::move(p));
  for (auto& p : decoder_.adapter_parameters()) out.push_back(std::move(p));
  return out;
}

}  // namespace adcare::decoder
