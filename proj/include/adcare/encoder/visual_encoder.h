#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adcare/encoder/video.h"
#include "adcare/tensor/optim.h"
#include "adcare/tensor/tensor.h"

namespace adcare::encoder {

/// Per-frame patch tokens, stored as a [F, h, w, D] tensor.
struct FrameEmbedding {
  Tensor tokens;
  std::size_t frames = 0;
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;
  std::size_t dim = 0;

  std::size_t patches() const { return grid_h * grid_w; }
};

struct VisualEncoderConfig {
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t channels = 3;
  std::size_t patch_size = 8;
  std::size_t embed_dim = 32;
};

/// Linear patch encoder: token = flatten(patch) . W_patch + pos[patch index].
class VisualEncoder {
 public:
  VisualEncoder(const VisualEncoderConfig& config, std::uint64_t seed);

  const VisualEncoderConfig& config() const { return config_; }
  std::size_t patches() const;

  // Constant [F * N, p * p * C] matrix of flattened patches, (dy, dx, c) order.
  Tensor patchify(const VideoSample& video) const;
  FrameEmbedding encode_patches(const Tensor& patches, std::size_t frames) const;
  FrameEmbedding encode(const VideoSample& video) const;

  Tensor& patch_projection() { return patch_projection_; }
  const Tensor& patch_projection() const { return patch_projection_; }
  Tensor& positional_embedding() { return positional_; }
  const Tensor& positional_embedding() const { return positional_; }

  std::vector<NamedParameter> parameters() const;
  void set_trainable(bool on);

 private:
  VisualEncoderConfig config_;
  Tensor patch_projection_;
  Tensor positional_;
};

/// Caption encoder: L2-normalized mean of token embeddings.
class TextEncoder {
 public:
  TextEncoder(std::size_t vocab_size, std::size_t embed_dim, std::uint64_t seed);

  std::size_t vocab_size() const { return token_embedding_.dim(0); }
  std::size_t embed_dim() const { return token_embedding_.dim(1); }

  // Returns a [D] unit vector. Throws ContractError on an empty list and
  // IndexError on an out-of-range token.
  Tensor encode(std::span<const int> tokens) const;

  Tensor& token_embedding() { return token_embedding_; }
  const Tensor& token_embedding() const { return token_embedding_; }

  std::vector<NamedParameter> parameters() const;
  void set_trainable(bool on);

 private:
  Tensor token_embedding_;
};

}  // namespace adcare::encoder
