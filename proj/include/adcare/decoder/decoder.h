#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adcare/tensor/optim.h"
#include "adcare/tensor/tensor.h"

namespace adcare::decoder {

/// Two-layer GELU MLP applied row-wise: maps [R, D] visual tokens to [R, K].
class ProjectionMLP {
 public:
  ProjectionMLP(std::size_t in_dim, std::size_t hidden_dim, std::size_t out_dim, std::uint64_t seed);

  Tensor project(const Tensor& visual) const;

  std::size_t in_dim() const { return w1_.dim(0); }
  std::size_t out_dim() const { return w2_.dim(1); }

  Tensor& w1() { return w1_; }
  Tensor& b1() { return b1_; }
  Tensor& w2() { return w2_; }
  Tensor& b2() { return b2_; }

  std::vector<NamedParameter> parameters() const;
  void set_trainable(bool on);

 private:
  Tensor w1_, b1_, w2_, b2_;
};

/// Low-rank update for a weight. Weights are stored as [in, out] and applied
/// as x . W, so in the usual [out, in] orientation W' = W + (alpha / rank) A B
/// with A: [out, rank] and B: [rank, in]. Both factors are kept transposed
/// here: a is A^T [rank, out] (zero-initialized), b is B^T [in, rank].
struct LoraAdapter {
  std::string target;
  Tensor a;
  Tensor b;
  std::size_t rank = 0;
  double alpha = 0.0;

  double scaling() const { return alpha / static_cast<double>(rank); }
  std::size_t parameter_count() const { return a.numel() + b.numel(); }
  // Dense (alpha / rank) * b . a, same [in, out] shape as the target weight.
  Tensor delta() const;
};

/// y = x . W, plus the adapter path (alpha / rank) * (x . b) . a when attached.
struct Linear {
  std::string name;
  Tensor weight;
  std::optional<LoraAdapter> adapter;

  Tensor forward(const Tensor& x) const;
};

struct DecoderConfig {
  std::size_t vocab_size = 64;
  std::size_t dim = 64;
  std::size_t heads = 4;
  std::size_t blocks = 2;
  std::size_t ffn_hidden = 128;
  std::size_t max_positions = 192;
};

struct DecoderBlock {
  Tensor ln1_gain, ln1_bias;
  Linear query, key, value, out;
  Tensor ln2_gain, ln2_bias;
  Linear up;
  Tensor up_bias;
  Linear down;
  Tensor down_bias;
};

/// Pre-norm causal transformer decoder over K-wide token rows.
class Decoder {
 public:
  Decoder(const DecoderConfig& config, std::uint64_t seed);

  const DecoderConfig& config() const { return config_; }

  // Row lookup into the word embedding table: [L] ids -> [L, K].
  Tensor embed_text(std::span<const int> tokens) const;
  // Causal forward over context rows [T, K] -> logits [T, V].
  Tensor forward(const Tensor& context) const;

  // Names of every matrix that can carry a LoRA adapter.
  std::vector<std::string> linear_targets() const;
  Linear& linear(const std::string& name);
  const Linear& linear(const std::string& name) const;

  // Attaches fresh adapters (A = 0, B random) to the named targets.
  void apply_lora(std::span<const std::string> targets, std::size_t rank, double alpha, std::uint64_t seed);
  // Attaches the given adapters (e.g. loaded from a checkpoint).
  void attach(std::vector<LoraAdapter> adapters);
  // Folds every adapter into its base weight and detaches it.
  void merge_lora();
  bool has_lora() const;
  std::vector<LoraAdapter> adapters() const;

  // Groups: decoder.embedding (word + position), decoder.blocks, decoder.output.
  std::vector<NamedParameter> base_parameters() const;
  // Group: lora.
  std::vector<NamedParameter> adapter_parameters() const;

  Tensor& word_embedding() { return word_embedding_; }
  const Tensor& word_embedding() const { return word_embedding_; }
  std::vector<DecoderBlock>& blocks() { return blocks_; }

 private:
  std::vector<Linear*> all_linears();
  std::vector<const Linear*> all_linears() const;

  DecoderConfig config_;
  Tensor word_embedding_;
  Tensor position_embedding_;
  std::vector<DecoderBlock> blocks_;
  Tensor final_gain_, final_bias_;
  Linear output_;
};

struct SequenceLikelihood {
  Tensor total;     // scalar log p(answer | visual, text)
  Tensor per_step;  // [L] log p(answer[i] | visual, text, answer[:i])
};

/// Teacher-forced log-likelihood of answer given projected visual tokens
/// (may be undefined for text-only input) and embedded text tokens. Context
/// order is visual rows first, then text rows, then the answer prefix.
SequenceLikelihood sequence_log_likelihood(const Decoder& decoder, const Tensor& visual_tokens,
                                           const Tensor& text_tokens, std::span<const int> answer);

/// Greedy decoding until eos or max_tokens. Runs without recording a graph.
std::vector<int> greedy_decode(const Decoder& decoder, const Tensor& visual_tokens, const Tensor& text_tokens,
                               std::size_t max_tokens, int eos);

}  // namespace adcare::decoder
