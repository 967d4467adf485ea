#include "adcare/decoder/decoder.h"

#include <algorithm>
#include <cmath>

#include "adcare/error.h"
#include "adcare/tensor/ops.h"

namespace adcare::decoder {

namespace {

Tensor gaussian(Shape shape, std::mt19937_64& rng, double stddev) {
  return Tensor::randn(std::move(shape), rng, stddev, true);
}

Linear make_linear(std::string name, std::size_t in, std::size_t out, std::mt19937_64& rng) {
  return {std::move(name), gaussian({in, out}, rng, 1.0 / std::sqrt(double(in))), std::nullopt};
}

}  // namespace

ProjectionMLP::ProjectionMLP(std::size_t in_dim, std::size_t hidden_dim, std::size_t out_dim, std::uint64_t seed) {
  if (in_dim == 0 || hidden_dim == 0 || out_dim == 0) throw ConfigError("projection widths must be positive");
  std::mt19937_64 rng(seed);
  w1_ = gaussian({in_dim, hidden_dim}, rng, 1.0 / std::sqrt(double(in_dim)));
  b1_ = Tensor::zeros({hidden_dim}, true);
  w2_ = gaussian({hidden_dim, out_dim}, rng, 1.0 / std::sqrt(double(hidden_dim)));
  b2_ = Tensor::zeros({out_dim}, true);
}

Tensor ProjectionMLP::project(const Tensor& visual) const {
  if (visual.rank() != 2 || visual.dim(1) != in_dim()) {
    throw DimensionError("projection expects rows of width " + std::to_string(in_dim()) + ", got " +
                         shape_to_string(visual.shape()));
  }
  Tensor h = gelu(add_broadcast(matmul(visual, w1_), b1_));
  return add_broadcast(matmul(h, w2_), b2_);
}

std::vector<NamedParameter> ProjectionMLP::parameters() const {
  return {{"projection.layer1.weight", "projection", w1_},
          {"projection.layer1.bias", "projection", b1_},
          {"projection.layer2.weight", "projection", w2_},
          {"projection.layer2.bias", "projection", b2_}};
}

void ProjectionMLP::set_trainable(bool on) {
  for (auto& p : parameters()) p.tensor.set_requires_grad(on);
}

Tensor LoraAdapter::delta() const { return scale(matmul(b, a), scaling()); }

Tensor Linear::forward(const Tensor& x) const {
  Tensor y = matmul(x, weight);
  if (!adapter) return y;
  return add(y, scale(matmul(matmul(x, adapter->b), adapter->a), adapter->scaling()));
}

Decoder::Decoder(const DecoderConfig& config, std::uint64_t seed) : config_(config) {
  if (config.vocab_size == 0 || config.dim == 0 || config.heads == 0 || config.blocks == 0 ||
      config.ffn_hidden == 0 || config.max_positions == 0) {
    throw ConfigError("decoder sizes must be positive");
  }
  if (config.dim % config.heads != 0) {
    throw ConfigError("decoder width " + std::to_string(config.dim) + " is not divisible by " +
                      std::to_string(config.heads) + " heads");
  }
  std::mt19937_64 rng(seed);
  const std::size_t k = config.dim;
  word_embedding_ = gaussian({config.vocab_size, k}, rng, 1.0 / std::sqrt(double(k)));
  position_embedding_ = gaussian({config.max_positions, k}, rng, 0.02);
  for (std::size_t i = 0; i < config.blocks; ++i) {
    const std::string prefix = "blocks." + std::to_string(i) + ".";
    DecoderBlock b;
    b.ln1_gain = Tensor::full({k}, 1.0, true);
    b.ln1_bias = Tensor::zeros({k}, true);
    b.query = make_linear(prefix + "attn.query", k, k, rng);
    b.key = make_linear(prefix + "attn.key", k, k, rng);
    b.value = make_linear(prefix + "attn.value", k, k, rng);
    b.out = make_linear(prefix + "attn.out", k, k, rng);
    b.ln2_gain = Tensor::full({k}, 1.0, true);
    b.ln2_bias = Tensor::zeros({k}, true);
    b.up = make_linear(prefix + "ffn.up", k, config.ffn_hidden, rng);
    b.up_bias = Tensor::zeros({config.ffn_hidden}, true);
    b.down = make_linear(prefix + "ffn.down", config.ffn_hidden, k, rng);
    b.down_bias = Tensor::zeros({k}, true);
    blocks_.push_back(std::move(b));
  }
  final_gain_ = Tensor::full({k}, 1.0, true);
  final_bias_ = Tensor::zeros({k}, true);
  output_ = make_linear("output", k, config.vocab_size, rng);
}

Tensor Decoder::embed_text(std::span<const int> tokens) const { return embedding(word_embedding_, tokens); }

Tensor Decoder::forward(const Tensor& context) const {
  const std::size_t k = config_.dim;
  if (context.rank() != 2 || context.dim(1) != k) {
    throw DimensionError("decoder context must be [T, " + std::to_string(k) + "], got " +
                         shape_to_string(context.shape()));
  }
  const std::size_t t = context.dim(0);
  if (t > config_.max_positions) {
    throw DimensionError("context of " + std::to_string(t) + " rows exceeds " +
                         std::to_string(config_.max_positions) + " positions");
  }
  const std::size_t heads = config_.heads, dh = k / heads;
  const double inv_sqrt = 1.0 / std::sqrt(double(dh));

  Tensor x = add(context, slice_rows(position_embedding_, 0, t));
  for (const auto& b : blocks_) {
    Tensor h = layer_norm(x, b.ln1_gain, b.ln1_bias);
    Tensor q = b.query.forward(h), kk = b.key.forward(h), v = b.value.forward(h);
    std::vector<Tensor> per_head;
    per_head.reserve(heads);
    for (std::size_t i = 0; i < heads; ++i) {
      Tensor qh = slice_cols(q, i * dh, (i + 1) * dh);
      Tensor kh = slice_cols(kk, i * dh, (i + 1) * dh);
      Tensor vh = slice_cols(v, i * dh, (i + 1) * dh);
      Tensor att = causal_softmax(scale(matmul(qh, transpose(kh)), inv_sqrt));
      per_head.push_back(matmul(att, vh));
    }
    x = add(x, b.out.forward(concat_cols(per_head)));
    Tensor f = layer_norm(x, b.ln2_gain, b.ln2_bias);
    f = gelu(add_broadcast(b.up.forward(f), b.up_bias));
    x = add(x, add_broadcast(b.down.forward(f), b.down_bias));
  }
  return output_.forward(layer_norm(x, final_gain_, final_bias_));
}

std::vector<Linear*> Decoder::all_linears() {
  std::vector<Linear*> out;
  for (auto& b : blocks_)
    for (Linear* l : {&b.query, &b.key, &b.value, &b.out, &b.up, &b.down}) out.push_back(l);
  out.push_back(&output_);
  return out;
}

std::vector<const Linear*> Decoder::all_linears() const {
  std::vector<const Linear*> out;
  for (Linear* l : const_cast<Decoder*>(this)->all_linears()) out.push_back(l);
  return out;
}

std::vector<std::string> Decoder::linear_targets() const {
  std::vector<std::string> names;
  for (const Linear* l : all_linears()) names.push_back(l->name);
  return names;
}

Linear& Decoder::linear(const std::string& name) {
  for (Linear* l : all_linears())
    if (l->name == name) return *l;
  throw ConfigError("unknown LoRA target '" + name + "'");
}

const Linear& Decoder::linear(const std::string& name) const { return const_cast<Decoder*>(this)->linear(name); }

void Decoder::apply_lora(std::span<const std::string> targets, std::size_t rank, double alpha, std::uint64_t seed) {
  if (rank == 0) throw ConfigError("LoRA rank must be positive");
  std::mt19937_64 rng(seed);
  std::vector<LoraAdapter> fresh;
  for (const auto& name : targets) {
    const Linear& l = linear(name);
    const std::size_t in = l.weight.dim(0), out = l.weight.dim(1);
    if (rank > std::min(in, out)) {
      throw ConfigError("LoRA rank " + std::to_string(rank) + " exceeds the dimensions of '" + name + "'");
    }
    fresh.push_back({name, Tensor::zeros({rank, out}, true), gaussian({in, rank}, rng, 1.0 / std::sqrt(double(in))),
                     rank, alpha});
  }
  attach(std::move(fresh));
}

void Decoder::attach(std::vector<LoraAdapter> adapters) {
  for (auto& ad : adapters) {
    Linear& l = linear(ad.target);
    const std::size_t in = l.weight.dim(0), out = l.weight.dim(1);
    if (ad.rank == 0 || ad.a.shape() != Shape{ad.rank, out} || ad.b.shape() != Shape{in, ad.rank}) {
      throw DimensionError("adapter for '" + ad.target + "' has shapes " + shape_to_string(ad.a.shape()) + " and " +
                           shape_to_string(ad.b.shape()) + ", weight is " + shape_to_string(l.weight.shape()));
    }
  }
  for (auto& ad : adapters) {
    Linear& l = linear(ad.target);
    l.adapter = std::move(ad);
  }
}

void Decoder::merge_lora() {
  NoGradGuard guard;
  for (Linear* l : all_linears()) {
    if (!l->adapter) continue;
    Tensor d = l->adapter->delta();
    auto w = l->weight.mutable_data();
    auto dd = d.data();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] += dd[i];
    l->adapter.reset();
  }
}

bool Decoder::has_lora() const {
  return std::ranges::any_of(all_linears(), [](const Linear* l) { return l->adapter.has_value(); });
}

std::vector<LoraAdapter> Decoder::adapters() const {
  std::vector<LoraAdapter> out;
  for (const Linear* l : all_linears())
    if (l->adapter) out.push_back(*l->adapter);
  return out;
}

std::vector<NamedParameter> Decoder::base_parameters() const {
  std::vector<NamedParameter> out{{"decoder.word_embedding", "decoder.embedding", word_embedding_},
                                  {"decoder.position_embedding", "decoder.embedding", position_embedding_}};
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto& b = blocks_[i];
    const std::string p = "decoder.blocks." + std::to_string(i) + ".";
    const std::string g = "decoder.blocks";
    out.push_back({p + "ln1.gain", g, b.ln1_gain});
    out.push_back({p + "ln1.bias", g, b.ln1_bias});
    out.push_back({p + "attn.query", g, b.query.weight});
    out.push_back({p + "attn.key", g, b.key.weight});
    out.push_back({p + "attn.value", g, b.value.weight});
    out.push_back({p + "attn.out", g, b.out.weight});
    out.push_back({p + "ln2.gain", g, b.ln2_gain});
    out.push_back({p + "ln2.bias", g, b.ln2_bias});
    out.push_back({p + "ffn.up", g, b.up.weight});
    out.push_back({p + "ffn.up_bias", g, b.up_bias});
    out.push_back({p + "ffn.down", g, b.down.weight});
    out.push_back({p + "ffn.down_bias", g, b.down_bias});
  }
  out.push_back({"decoder.final_norm.gain", "decoder.output", final_gain_});
  out.push_back({"decoder.final_norm.bias", "decoder.output", final_bias_});
  out.push_back({"decoder.output", "decoder.output", output_.weight});
  return out;
}

std::vector<NamedParameter> Decoder::adapter_parameters() const {
  std::vector<NamedParameter> out;
  for (const Linear* l : all_linears()) {
    if (!l->adapter) continue;
    out.push_back({"lora." + l->name + ".a", "lora", l->adapter->a});
    out.push_back({"lora." + l->name + ".b", "lora", l->adapter->b});
  }
  return out;
}

namespace {

Tensor build_context(const Tensor& visual_tokens, const Tensor& text_tokens, const Tensor& prefix) {
  std::vector<Tensor> parts;
  for (const Tensor* t : {&visual_tokens, &text_tokens, &prefix})
    if (t->defined()) parts.push_back(*t);
  if (parts.empty()) throw ContractError("decoder context is empty");
  return parts.size() == 1 ? parts.front() : concat_rows(parts);
}

std::size_t rows_of(const Tensor& t) { return t.defined() ? t.dim(0) : 0; }

}  // namespace

SequenceLikelihood sequence_log_likelihood(const Decoder& decoder, const Tensor& visual_tokens,
                                           const Tensor& text_tokens, std::span<const int> answer) {
  if (answer.empty()) throw ContractError("answer must contain at least one token");
  const std::size_t prompt = rows_of(visual_tokens) + rows_of(text_tokens);
  if (prompt == 0) throw ContractError("likelihood needs a visual or text prompt");
  Tensor prefix;
  if (answer.size() > 1) prefix = decoder.embed_text(answer.first(answer.size() - 1));
  Tensor logits = decoder.forward(build_context(visual_tokens, text_tokens, prefix));
  // Row prompt-1+i predicts answer[i].
  Tensor rows = slice_rows(logits, prompt - 1, prompt - 1 + answer.size());
  Tensor per_step = pick(log_softmax_rows(rows), answer);
  return {sum(per_step), per_step};
}

std::vector<int> greedy_decode(const Decoder& decoder, const Tensor& visual_tokens, const Tensor& text_tokens,
                               std::size_t max_tokens, int eos) {
  NoGradGuard guard;
  const std::size_t prompt = rows_of(visual_tokens) + rows_of(text_tokens);
  if (prompt == 0) throw ContractError("decoding needs a visual or text prompt");
  std::vector<int> out;
  while (out.size() < max_tokens && prompt + out.size() < decoder.config().max_positions) {
    Tensor prefix;
    if (!out.empty()) prefix = decoder.embed_text(out);
    Tensor logits = decoder.forward(build_context(visual_tokens, text_tokens, prefix));
    const std::size_t v = logits.dim(1);
    auto last = logits.data().subspan((logits.dim(0) - 1) * v, v);
    const int next = static_cast<int>(std::max_element(last.begin(), last.end()) - last.begin());
    if (next == eos) break;
    out.push_back(next);
  }
  return out;
}

}  // namespace adcare::decoder
