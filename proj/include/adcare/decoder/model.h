#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "adcare/decoder/decoder.h"

namespace adcare::decoder {

struct ModelConfig {
  std::size_t visual_dim = 32;  // D, width of the unified visual tokens
  DecoderConfig decoder;        // decoder.dim is K
};

/// Projection plus decoder: the part of the pipeline that sees text.
class VisionLanguageModel {
 public:
  VisionLanguageModel(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ProjectionMLP& projection() { return projection_; }
  const ProjectionMLP& projection() const { return projection_; }
  Decoder& decoder() { return decoder_; }
  const Decoder& decoder() const { return decoder_; }

  // visual may be undefined for text-only prompts.
  SequenceLikelihood log_likelihood(const Tensor& visual, std::span<const int> prompt,
                                    std::span<const int> answer) const;
  std::vector<int> answer(const Tensor& visual, std::span<const int> prompt, std::size_t max_tokens) const;

  // Projection, decoder base weights, then adapters if any.
  std::vector<NamedParameter> parameters() const;

 private:
  ModelConfig config_;
  ProjectionMLP projection_;
  Decoder decoder_;
};

}  // namespace adcare::decoder
