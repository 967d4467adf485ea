#include "adcare/fusion/fusion.h"

#include <cmath>

#include "adcare/error.h"
#include "adcare/tensor/ops.h"

namespace adcare::fusion {

namespace {

Tensor as_frame_tokens(const encoder::FrameEmbedding& x) {
  if (x.frames == 0) throw ContractError("pooling needs at least one frame");
  if (x.patches() == 0) throw ContractError("pooling needs at least one patch");
  return reshape(x.tokens, {x.frames, x.patches(), x.dim});
}

}  // namespace

Tensor pool_temporal(const encoder::FrameEmbedding& x) { return mean_over_axis(as_frame_tokens(x), 0); }

Tensor pool_spatial(const encoder::FrameEmbedding& x) { return mean_over_axis(as_frame_tokens(x), 1); }

UnifiedVisualFeature unify(const Tensor& temporal, const Tensor& spatial) {
  if (temporal.rank() != 2 || spatial.rank() != 2 || temporal.dim(1) != spatial.dim(1)) {
    throw DimensionError("unify: temporal " + shape_to_string(temporal.shape()) + " and spatial " +
                         shape_to_string(spatial.shape()) + " must share width D");
  }
  const Tensor parts[] = {temporal, spatial};
  return {temporal, spatial, concat_rows(parts), spatial.dim(0), temporal.dim(0)};
}

UnifiedVisualFeature fuse(const encoder::FrameEmbedding& x) { return unify(pool_temporal(x), pool_spatial(x)); }

Tensor separated_feature(const encoder::FrameEmbedding& x) { return fuse(x).unified; }

std::vector<std::size_t> sample_frame_indices(std::size_t available, std::size_t wanted) {
  if (available == 0 || wanted == 0) throw ContractError("frame sampling needs frames to choose from");
  if (available <= wanted) {
    std::vector<std::size_t> all(available);
    for (std::size_t i = 0; i < available; ++i) all[i] = i;
    return all;
  }
  std::vector<std::size_t> out(wanted);
  if (wanted == 1) return {0};
  for (std::size_t i = 0; i < wanted; ++i) {
    out[i] = static_cast<std::size_t>(
        std::llround(static_cast<double>(i) * static_cast<double>(available - 1) / static_cast<double>(wanted - 1)));
  }
  return out;
}

encoder::VideoSample select_frames(const encoder::VideoSample& video, std::size_t wanted) {
  const auto idx = sample_frame_indices(video.frames, wanted);
  encoder::VideoSample out = video;
  out.frames = idx.size();
  const std::size_t frame_size = video.height * video.width * video.channels;
  out.pixels.resize(idx.size() * frame_size);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    std::copy_n(video.pixels.begin() + idx[k] * frame_size, frame_size, out.pixels.begin() + k * frame_size);
  }
  return out;
}

const char* to_string(ArmKind kind) { return kind == ArmKind::unified ? "unified" : "separated"; }

Tensor VisualArm::feature(const encoder::VideoSample& video) const {
  auto emb = encoder->encode(video);
  return kind == ArmKind::unified ? fuse(emb).unified : separated_feature(emb);
}

VisualArm make_arm(ArmKind kind, const encoder::VisualEncoderConfig& config, std::uint64_t seed) {
  return {kind, std::make_shared<encoder::VisualEncoder>(config, seed)};
}

}  // namespace adcare::fusion
