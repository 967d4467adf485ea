#include "adcare/encoder/prealign.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "adcare/error.h"
#include "adcare/fusion/fusion.h"
#include "adcare/tensor/ops.h"
#include "adcare/tensor/optim.h"

namespace adcare::encoder {

Tensor video_descriptor(const FrameEmbedding& frames) {
  const auto v = fusion::fuse(frames);
  return l2_normalize_rows(mean_over_axis(v.unified, 0));
}

Tensor info_nce(const Tensor& videos, const Tensor& texts, double temperature) {
  if (temperature <= 0.0) throw ConfigError("contrastive temperature must be positive");
  if (videos.shape() != texts.shape() || videos.rank() != 2) {
    throw DimensionError("info_nce: video batch " + shape_to_string(videos.shape()) + " vs text batch " +
                         shape_to_string(texts.shape()));
  }
  const std::size_t b = videos.dim(0);
  std::vector<int> diag(b);
  std::iota(diag.begin(), diag.end(), 0);
  Tensor logits = scale(matmul(videos, transpose(texts)), 1.0 / temperature);
  Tensor v2t = softmax_cross_entropy(logits, diag);
  Tensor t2v = softmax_cross_entropy(transpose(logits), diag);
  return scale(add(v2t, t2v), 0.5);
}

Tensor masked_token_loss(const FrameEmbedding& frames, double mask_ratio, std::mt19937_64& rng) {
  const std::size_t n = frames.patches();
  const std::size_t total = frames.frames * n;
  const std::size_t count = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(mask_ratio * static_cast<double>(total))), 1, total);
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<char> masked(total, 0);
  for (std::size_t i = 0; i < count; ++i) masked[order[i]] = 1;

  std::vector<int> rows;
  std::vector<double> averaging(count * total, 0.0);
  std::size_t r = 0;
  for (std::size_t idx = 0; idx < total; ++idx) {
    if (!masked[idx]) continue;
    const std::size_t f = idx / n, y = (idx % n) / frames.grid_w, x = idx % frames.grid_w;
    std::vector<std::size_t> all, visible;
    auto consider = [&](long yy, long xx) {
      if (yy < 0 || xx < 0 || yy >= long(frames.grid_h) || xx >= long(frames.grid_w)) return;
      const std::size_t j = f * n + std::size_t(yy) * frames.grid_w + std::size_t(xx);
      all.push_back(j);
      if (!masked[j]) visible.push_back(j);
    };
    consider(long(y) - 1, long(x));
    consider(long(y) + 1, long(x));
    consider(long(y), long(x) - 1);
    consider(long(y), long(x) + 1);
    const auto& use = visible.empty() ? all : visible;
    if (use.empty()) continue;  // 1x1 grid: nothing to reconstruct from
    for (auto j : use) averaging[r * total + j] = 1.0 / static_cast<double>(use.size());
    rows.push_back(static_cast<int>(idx));
    ++r;
  }
  if (rows.empty()) return Tensor::scalar(0.0);
  averaging.resize(rows.size() * total);
  Tensor tokens = reshape(frames.tokens, {total, frames.dim});
  Tensor predicted = matmul(Tensor::from({rows.size(), total}, std::move(averaging)), tokens);
  Tensor diff = sub(embedding(tokens, rows), predicted);
  return mean(mul(diff, diff));
}

PrealignResult prealign(VisualEncoder& visual, TextEncoder& text, std::span<const AlignmentPair> pairs,
                        const AlignmentConfig& config) {
  if (pairs.size() < 2) throw ContractError("pre-alignment needs at least 2 pairs for contrastive negatives");
  if (config.temperature <= 0.0) throw ConfigError("contrastive temperature must be positive");
  if (config.batch_size < 2) throw ConfigError("pre-alignment batch size must be at least 2");

  visual.set_trainable(config.train_visual);
  text.set_trainable(config.train_text);
  std::vector<NamedParameter> params;
  if (config.train_visual)
    for (auto& p : visual.parameters()) params.push_back(p);
  if (config.train_text)
    for (auto& p : text.parameters()) params.push_back(p);
  AdamW opt(params, {.weight_decay = 0.0});

  std::vector<Tensor> patches;
  patches.reserve(pairs.size());
  for (const auto& p : pairs) {
    if (!p.video) throw ContractError("alignment pair without a video");
    patches.push_back(visual.patchify(*p.video));
  }

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = std::min(config.batch_size, pairs.size());

  PrealignResult result;
  result.loss_history.reserve(config.steps);
  std::size_t cursor = pairs.size();
  for (std::size_t step = 0; step < config.steps; ++step) {
    std::vector<Tensor> vids, txts;
    std::vector<FrameEmbedding> frames;
    for (std::size_t k = 0; k < batch; ++k) {
      if (cursor >= order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      const std::size_t i = order[cursor++];
      auto emb = visual.encode_patches(patches[i], pairs[i].video->frames);
      vids.push_back(reshape(video_descriptor(emb), {1, emb.dim}));
      txts.push_back(reshape(text.encode(pairs[i].caption), {1, text.embed_dim()}));
      if (config.masked_token_loss) frames.push_back(std::move(emb));
    }
    Tensor loss = info_nce(concat_rows(vids), concat_rows(txts), config.temperature);
    if (config.masked_token_loss) {
      std::vector<Tensor> parts;
      for (const auto& f : frames) parts.push_back(reshape(masked_token_loss(f, config.mask_ratio, rng), {1}));
      loss = add(loss, scale(mean(concat_rows(parts)), config.masked_token_weight));
    }
    result.loss_history.push_back(loss.item());
    if (!std::isfinite(loss.item())) throw std::runtime_error("pre-alignment diverged (non-finite loss)");
    opt.zero_grad();
    backward(loss);
    opt.step(config.learning_rate);
  }
  visual.set_trainable(false);
  text.set_trainable(false);
  return result;
}

}  // namespace adcare::encoder
