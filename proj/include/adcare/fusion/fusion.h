#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "adcare/encoder/visual_encoder.h"

namespace adcare::fusion {

/// Temporal tokens t [N, D], spatial tokens z [F, D] and their concatenation
/// v = [t; z] of shape [F + N, D]. Temporal block first.
struct UnifiedVisualFeature {
  Tensor temporal;
  Tensor spatial;
  Tensor unified;
  std::size_t frames = 0;
  std::size_t patches = 0;

  std::size_t rows() const { return frames + patches; }
};

// Mean over the F frames at each of the N = h * w patch positions -> [N, D].
Tensor pool_temporal(const encoder::FrameEmbedding& x);
// Mean over the N patch tokens of each frame -> [F, D].
Tensor pool_spatial(const encoder::FrameEmbedding& x);
UnifiedVisualFeature unify(const Tensor& temporal, const Tensor& spatial);
UnifiedVisualFeature fuse(const encoder::FrameEmbedding& x);

// Same pooling arithmetic for the ablation baseline; the caller supplies frame
// embeddings from an encoder that was never pre-aligned.
Tensor separated_feature(const encoder::FrameEmbedding& x);

/// Evenly spaced frame indices, first and last included.
std::vector<std::size_t> sample_frame_indices(std::size_t available, std::size_t wanted);
encoder::VideoSample select_frames(const encoder::VideoSample& video, std::size_t wanted);

enum class ArmKind { unified, separated };

const char* to_string(ArmKind kind);

/// A visual pathway for the ablation: its own encoder instance plus whether it
/// is meant to be pre-aligned against captions.
struct VisualArm {
  ArmKind kind = ArmKind::unified;
  std::shared_ptr<encoder::VisualEncoder> encoder;

  Tensor feature(const encoder::VideoSample& video) const;
};

VisualArm make_arm(ArmKind kind, const encoder::VisualEncoderConfig& config, std::uint64_t seed);

}  // namespace adcare::fusion
