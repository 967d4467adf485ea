#pragma once

#include <vector>

#include "adcare/data/synthetic.h"
#include "adcare/fusion/fusion.h"
#include "adcare/tensor/tensor.h"
#include "adcare/training/examples.h"

namespace adcare::testing {

// Synthetic clips run through a fresh (never aligned) encoder of width dim.
inline std::vector<training::LabeledClip> synthetic_clips(std::size_t n, std::uint64_t seed, std::size_t dim = 16) {
  data::CorpusConfig cfg;
  cfg.n = n;
  const auto items = data::generate_synthetic_corpus(cfg, seed);
  encoder::VisualEncoderConfig ecfg;
  ecfg.embed_dim = dim;
  const auto arm = fusion::make_arm(fusion::ArmKind::separated, ecfg, seed + 1);
  NoGradGuard guard;
  std::vector<training::LabeledClip> out;
  for (const auto& it : items) out.push_back({it.record, arm.feature(it.video).detach(), false});
  return out;
}

}  // namespace adcare::testing
