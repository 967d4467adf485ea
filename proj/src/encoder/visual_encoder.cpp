#include "adcare/encoder/visual_encoder.h"

#include <cmath>

#include "adcare/error.h"
#include "adcare/tensor/ops.h"

namespace adcare::encoder {

void validate_geometry(const FrameGeometry& g) {
  if (g.frames == 0 || g.channels == 0) throw ConfigError("frame count and channel count must be positive");
  if (g.patch_size == 0 || g.height == 0 || g.width == 0 || g.height % g.patch_size != 0 ||
      g.width % g.patch_size != 0) {
    throw ConfigError("frame size H=" + std::to_string(g.height) + ", W=" + std::to_string(g.width) +
                      " is not divisible by patch size p=" + std::to_string(g.patch_size));
  }
}

VisualEncoder::VisualEncoder(const VisualEncoderConfig& config, std::uint64_t seed) : config_(config) {
  validate_geometry({1, config.height, config.width, config.channels, config.patch_size});
  if (config.embed_dim == 0) throw ConfigError("embed_dim must be positive");
  std::mt19937_64 rng(seed);
  const std::size_t patch_dim = config.patch_size * config.patch_size * config.channels;
  patch_projection_ = Tensor::randn({patch_dim, config.embed_dim}, rng, 1.0 / std::sqrt(double(patch_dim)), true);
  positional_ = Tensor::randn({patches(), config.embed_dim}, rng, 0.02, true);
}

std::size_t VisualEncoder::patches() const {
  return (config_.height / config_.patch_size) * (config_.width / config_.patch_size);
}

Tensor VisualEncoder::patchify(const VideoSample& video) const {
  validate_geometry({video.frames, video.height, video.width, video.channels, config_.patch_size});
  if (video.height != config_.height || video.width != config_.width || video.channels != config_.channels) {
    throw DimensionError("video " + std::to_string(video.height) + "x" + std::to_string(video.width) + "x" +
                         std::to_string(video.channels) + " does not match encoder geometry " +
                         std::to_string(config_.height) + "x" + std::to_string(config_.width) + "x" +
                         std::to_string(config_.channels));
  }
  if (video.pixels.size() != video.frames * video.height * video.width * video.channels) {
    throw DimensionError("video pixel buffer does not match its declared shape");
  }
  const std::size_t p = config_.patch_size, c = config_.channels;
  const std::size_t gh = video.height / p, gw = video.width / p;
  const std::size_t patch_dim = p * p * c;
  std::vector<double> out(video.frames * gh * gw * patch_dim);
  std::size_t k = 0;
  for (std::size_t f = 0; f < video.frames; ++f)
    for (std::size_t py = 0; py < gh; ++py)
      for (std::size_t px = 0; px < gw; ++px)
        for (std::size_t dy = 0; dy < p; ++dy)
          for (std::size_t dx = 0; dx < p; ++dx)
            for (std::size_t ch = 0; ch < c; ++ch) out[k++] = video.at(f, py * p + dy, px * p + dx, ch);
  return Tensor::from({video.frames * gh * gw, patch_dim}, std::move(out));
}

FrameEmbedding VisualEncoder::encode_patches(const Tensor& patches, std::size_t frames) const {
  const std::size_t n = this->patches();
  if (frames == 0 || patches.rank() != 2 || patches.dim(0) != frames * n) {
    throw DimensionError("patch matrix " + shape_to_string(patches.shape()) + " does not hold " +
                         std::to_string(frames) + " frames of " + std::to_string(n) + " patches");
  }
  Tensor tokens = add_broadcast(matmul(patches, patch_projection_), positional_);
  const std::size_t gh = config_.height / config_.patch_size, gw = config_.width / config_.patch_size;
  return {reshape(tokens, {frames, gh, gw, config_.embed_dim}), frames, gh, gw, config_.embed_dim};
}

FrameEmbedding VisualEncoder::encode(const VideoSample& video) const {
  return encode_patches(patchify(video), video.frames);
}

std::vector<NamedParameter> VisualEncoder::parameters() const {
  return {{"encoder.visual.patch_projection", "encoder.visual", patch_projection_},
          {"encoder.visual.positional_embedding", "encoder.visual", positional_}};
}

void VisualEncoder::set_trainable(bool on) {
  patch_projection_.set_requires_grad(on);
  positional_.set_requires_grad(on);
}

TextEncoder::TextEncoder(std::size_t vocab_size, std::size_t embed_dim, std::uint64_t seed) {
  if (vocab_size == 0 || embed_dim == 0) throw ConfigError("text encoder needs positive vocab and width");
  std::mt19937_64 rng(seed);
  token_embedding_ = Tensor::randn({vocab_size, embed_dim}, rng, 1.0 / std::sqrt(double(embed_dim)), true);
}

Tensor TextEncoder::encode(std::span<const int> tokens) const {
  if (tokens.empty()) throw ContractError("cannot encode an empty caption");
  return l2_normalize_rows(mean_over_axis(embedding(token_embedding_, tokens), 0));
}

std::vector<NamedParameter> TextEncoder::parameters() const {
  return {{"encoder.text.token_embedding", "encoder.text", token_embedding_}};
}

void TextEncoder::set_trainable(bool on) { token_embedding_.set_requires_grad(on); }

}  // namespace adcare::encoder
