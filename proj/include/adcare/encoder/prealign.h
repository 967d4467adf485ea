#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "adcare/encoder/visual_encoder.h"

namespace adcare::encoder {

struct AlignmentConfig {
  double temperature = 0.07;
  std::size_t steps = 200;
  double learning_rate = 5e-3;
  std::size_t batch_size = 16;
  // Which towers receive updates. Both by default.
  bool train_visual = true;
  bool train_text = true;
  // Optional masked patch-token objective: hide mask_ratio of the patch tokens
  // and regress each onto the mean of its grid neighbours.
  bool masked_token_loss = false;
  double mask_ratio = 0.15;
  double masked_token_weight = 1.0;
  std::uint64_t seed = 0;
};

struct AlignmentPair {
  const VideoSample* video = nullptr;
  std::vector<int> caption;
};

struct PrealignResult {
  std::vector<double> loss_history;  // total objective per step
};

/// Unit-norm video descriptor: L2-normalized mean over all F + N unified tokens.
Tensor video_descriptor(const FrameEmbedding& frames);

/// Symmetric InfoNCE over a batch of matched rows: row i of videos pairs with
/// row i of texts. Both inputs are [B, D] unit vectors.
Tensor info_nce(const Tensor& videos, const Tensor& texts, double temperature);

/// Masked patch-token reconstruction loss over a frame embedding.
Tensor masked_token_loss(const FrameEmbedding& frames, double mask_ratio, std::mt19937_64& rng);

PrealignResult prealign(VisualEncoder& visual, TextEncoder& text, std::span<const AlignmentPair> pairs,
                        const AlignmentConfig& config);

}  // namespace adcare::encoder
