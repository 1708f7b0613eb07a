#pragma once

// Decoder-only language model: token embedding, scheduled pre-norm blocks
// (grouped-query attention + SwiGLU feed-forward), final norm and a logits
// head that aliases the embedding table when embeddings are shared.

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mllm/attention.hpp"
#include "mllm/config.hpp"
#include "mllm/errors.hpp"
#include "mllm/ops.hpp"
#include "mllm/quant.hpp"
#include "mllm/sharing.hpp"
#include "mllm/tensor.hpp"

namespace mllm {

// Row-major [batch, seq] token ids.
struct TokenBatch {
  std::size_t batch = 0;
  std::size_t seq = 0;
  std::vector<TokenId> ids;

  TokenId at(std::size_t b, std::size_t t) const { return ids[b * seq + t]; }
  std::span<const TokenId> row(std::size_t b) const { return {ids.data() + b * seq, seq}; }

  static TokenBatch single(std::vector<TokenId> tokens) {
    const std::size_t n = tokens.size();
    return {1, n, std::move(tokens)};
  }
};

template <std::floating_point T>
struct BlockWeights {
  Tensor<T> attn_norm;  // [dim]
  AttentionWeights<T> attn;
  Tensor<T> ffn_norm;  // [dim]
  Tensor<T> w_gate;    // [dim, hidden]
  Tensor<T> w_up;      // [dim, hidden]
  Tensor<T> w_down;    // [hidden, dim]
};

template <std::floating_point T>
struct NamedParam {
  std::string name;
  Tensor<T> tensor;
};

template <std::floating_point T>
class Model {
 public:
  using value_type = T;

  // All projections and embeddings ~ N(0, init_std); norm scales at 1.
  static Model init(const ModelConfig& config, std::uint64_t seed, double init_std = 0.02) {
    require_valid(config);
    Model m(config);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, init_std);
    auto normal = [&](Shape shape) {
      std::vector<T> v(shape_numel(shape));
      for (auto& x : v) x = static_cast<T>(dist(rng));
      return Tensor<T>::from(std::move(shape), std::move(v), true);
    };
    auto ones = [&](std::size_t n) { return Tensor<T>::full({n}, T{1}, true); };

    const std::size_t d = config.embed_dim, h = config.hidden_dim, V = config.vocab_size, kv = config.kv_dim();
    m.embedding_ = normal({V, d});
    m.head_ = config.share_embeddings ? m.embedding_ : normal({V, d});
    for (std::size_t i = 0; i < config.n_layers; ++i) {
      BlockWeights<T> b;
      b.attn_norm = ones(d);
      b.attn.wq = normal({d, d});
      b.attn.wk = normal({d, kv});
      b.attn.wv = normal({d, kv});
      b.attn.wo = normal({d, d});
      b.ffn_norm = ones(d);
      b.w_gate = normal({d, h});
      b.w_up = normal({d, h});
      b.w_down = normal({h, d});
      m.blocks_.push_back(std::move(b));
    }
    m.final_norm_ = ones(d);
    return m;
  }

  // Builds a model from named tensors in the order produced by parameters().
  static Model from_parameters(const ModelConfig& config, const std::map<std::string, Tensor<T>>& named) {
    require_valid(config);
    Model m(config);
    auto take = [&](const std::string& name, const Shape& shape) {
      auto it = named.find(name);
      if (it == named.end()) throw FormatError("missing tensor '" + name + "'");
      if (it->second.shape() != shape) {
        throw FormatError("tensor '" + name + "' has shape " + shape_str(it->second.shape()) + ", expected " +
                          shape_str(shape));
      }
      return it->second;
    };
    const std::size_t d = config.embed_dim, h = config.hidden_dim, V = config.vocab_size, kv = config.kv_dim();
    m.embedding_ = take("embedding", {V, d});
    m.head_ = config.share_embeddings ? m.embedding_ : take("output_head", {V, d});
    for (std::size_t i = 0; i < config.n_layers; ++i) {
      const std::string p = "blocks." + std::to_string(i) + ".";
      BlockWeights<T> b;
      b.attn_norm = take(p + "attn_norm", {d});
      b.attn.wq = take(p + "wq", {d, d});
      b.attn.wk = take(p + "wk", {d, kv});
      b.attn.wv = take(p + "wv", {d, kv});
      b.attn.wo = take(p + "wo", {d, d});
      b.ffn_norm = take(p + "ffn_norm", {d});
      b.w_gate = take(p + "w_gate", {d, h});
      b.w_up = take(p + "w_up", {d, h});
      b.w_down = take(p + "w_down", {h, d});
      m.blocks_.push_back(std::move(b));
    }
    m.final_norm_ = take("final_norm", {d});
    return m;
  }

  Model(const Model& other) : Model(other.convert<T>()) {}
  Model& operator=(const Model& other) {
    if (this != &other) *this = other.convert<T>();
    return *this;
  }
  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  // Deep copy at another precision. Embedding tying is preserved.
  template <std::floating_point U>
  Model<U> convert() const {
    std::map<std::string, Tensor<U>> named;
    for (const auto& p : parameters()) {
      std::vector<U> v(p.tensor.data().begin(), p.tensor.data().end());
      named.emplace(p.name, Tensor<U>::from(p.tensor.shape(), std::move(v), true));
    }
    auto out = Model<U>::from_parameters(config_, named);
    out.activation_quant = activation_quant;
    out.weight_codes = weight_codes;
    return out;
  }

  const ModelConfig& config() const { return config_; }
  const std::vector<std::size_t>& schedule() const { return schedule_; }

  Tensor<T>& embedding() { return embedding_; }
  const Tensor<T>& embedding() const { return embedding_; }
  Tensor<T>& output_head() { return head_; }
  const Tensor<T>& output_head() const { return head_; }
  std::vector<BlockWeights<T>>& blocks() { return blocks_; }
  const std::vector<BlockWeights<T>>& blocks() const { return blocks_; }
  Tensor<T>& final_norm() { return final_norm_; }
  const Tensor<T>& final_norm() const { return final_norm_; }

  // Every trainable tensor exactly once; a tied head is not listed separately.
  std::vector<NamedParam<T>> parameters() const {
    std::vector<NamedParam<T>> out;
    out.push_back({"embedding", embedding_});
    if (!config_.share_embeddings) out.push_back({"output_head", head_});
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      const std::string p = "blocks." + std::to_string(i) + ".";
      const auto& b = blocks_[i];
      out.push_back({p + "attn_norm", b.attn_norm});
      out.push_back({p + "wq", b.attn.wq});
      out.push_back({p + "wk", b.attn.wk});
      out.push_back({p + "wv", b.attn.wv});
      out.push_back({p + "wo", b.attn.wo});
      out.push_back({p + "ffn_norm", b.ffn_norm});
      out.push_back({p + "w_gate", b.w_gate});
      out.push_back({p + "w_up", b.w_up});
      out.push_back({p + "w_down", b.w_down});
    }
    out.push_back({"final_norm", final_norm_});
    return out;
  }

  std::uint64_t parameter_elements() const {
    std::uint64_t n = 0;
    for (const auto& p : parameters()) n += p.tensor.numel();
    return n;
  }

  void zero_grad() {
    for (auto& p : parameters()) p.tensor.zero_grad();
  }

  // Set by post-training quantization: block inputs and FFN inner activations
  // are fake-quantized per token during forward.
  bool activation_quant = false;
  // Integer codes of quantized weights, keyed by parameter name.
  std::map<std::string, QuantizedTensor> weight_codes;

 private:
  explicit Model(const ModelConfig& config)
      : config_(config), schedule_(execution_schedule(config.sharing, config.n_layers, config.repeat_factor)) {}

  template <std::floating_point U>
  friend class Model;

  ModelConfig config_;
  std::vector<std::size_t> schedule_;
  Tensor<T> embedding_;
  Tensor<T> head_;
  std::vector<BlockWeights<T>> blocks_;
  Tensor<T> final_norm_;
};

namespace detail {

// Runs every scheduled block over x[batch*seq, dim]. Sequences are independent;
// attention is evaluated per sequence. `cache` requires batch == 1.
template <std::floating_point T>
Tensor<T> run_blocks(const Model<T>& m, Tensor<T> x, std::size_t batch, std::size_t seq,
                     std::span<const std::size_t> positions, KVCache<T>* cache) {
  const auto& c = m.config();
  const AttentionShape shape{c.n_heads, c.n_kv_heads, kRopeBase};
  const auto& schedule = m.schedule();
  for (std::size_t step = 0; step < schedule.size(); ++step) {
    const auto& b = m.blocks()[schedule[step]];
    if (m.activation_quant) x = fake_quantize(x, 1);
    auto h = rmsnorm(x, b.attn_norm);
    Tensor<T> attn;
    KVSlot<T>* slot = cache ? &cache->slot(step) : nullptr;
    if (batch == 1) {
      attn = gqa_attention(h, b.attn, shape, positions, slot);
    } else {
      std::vector<Tensor<T>> per_seq;
      for (std::size_t s = 0; s < batch; ++s)
        per_seq.push_back(gqa_attention(slice(h, s * seq, seq, 0, c.embed_dim), b.attn, shape, positions));
      attn = concat_rows(per_seq);
    }
    x = add(x, attn);
    auto h2 = rmsnorm(x, b.ffn_norm);
    auto inner = mul(silu(matmul(h2, b.w_gate)), matmul(h2, b.w_up));
    if (m.activation_quant) inner = fake_quantize(inner, 1);
    x = add(x, matmul(inner, b.w_down));
  }
  return x;
}

template <std::floating_point T>
Tensor<T> logits_head(const Model<T>& m, const Tensor<T>& x) {
  return matmul(rmsnorm(x, m.final_norm()), transpose(m.output_head()));
}

template <std::floating_point T>
Tensor<T> forward_2d(const Model<T>& m, const TokenBatch& tokens) {
  const auto& c = m.config();
  if (tokens.batch == 0 || tokens.seq == 0 || tokens.ids.size() != tokens.batch * tokens.seq) {
    throw DimensionError("token batch is empty or inconsistent with its shape");
  }
  if (tokens.seq > c.context_len) {
    throw LengthError("sequence length " + std::to_string(tokens.seq) + " exceeds context " +
                      std::to_string(c.context_len));
  }
  std::vector<std::size_t> positions(tokens.seq);
  for (std::size_t t = 0; t < tokens.seq; ++t) positions[t] = t;
  auto x = gather_rows(m.embedding(), tokens.ids);
  x = run_blocks(m, x, tokens.batch, tokens.seq, positions, static_cast<KVCache<T>*>(nullptr));
  return logits_head(m, x);
}

}  // namespace detail

// logits [batch, seq, vocab]
template <std::floating_point T>
Tensor<T> forward(const Model<T>& m, const TokenBatch& tokens) {
  return reshape(detail::forward_2d(m, tokens), {tokens.batch, tokens.seq, m.config().vocab_size});
}

// One sequence continuing from the cache (positions start at cache->filled(),
// or 0 without a cache). Returns logits [tokens, vocab].
template <std::floating_point T>
Tensor<T> forward_sequence(const Model<T>& m, std::span<const TokenId> tokens, KVCache<T>* cache = nullptr) {
  const auto& c = m.config();
  if (tokens.empty()) throw DimensionError("forward_sequence: no tokens");
  const std::size_t start = cache ? cache->filled() : 0;
  if (start + tokens.size() > c.context_len) {
    throw LengthError("sequence length " + std::to_string(start + tokens.size()) + " exceeds context " +
                      std::to_string(c.context_len));
  }
  std::vector<std::size_t> positions(tokens.size());
  for (std::size_t t = 0; t < tokens.size(); ++t) positions[t] = start + t;
  auto x = gather_rows(m.embedding(), tokens);
  x = detail::run_blocks(m, x, 1, tokens.size(), positions, cache);
  return detail::logits_head(m, x);
}

// Mean next-token cross-entropy over positions 0..seq-2 of every sequence.
template <std::floating_point T>
Tensor<T> lm_loss(const Model<T>& m, const TokenBatch& tokens) {
  if (tokens.seq < 2) throw LengthError("lm_loss needs at least 2 tokens per sequence");
  auto logits = detail::forward_2d(m, tokens);
  std::vector<TokenId> rows, targets;
  for (std::size_t b = 0; b < tokens.batch; ++b)
    for (std::size_t t = 0; t + 1 < tokens.seq; ++t) {
      rows.push_back(static_cast<TokenId>(b * tokens.seq + t));
      targets.push_back(tokens.at(b, t + 1));
    }
  return cross_entropy(gather_rows(logits, rows), targets);
}

// Index of the largest value; ties resolve to the lowest index.
template <typename T>
std::size_t argmax(std::span<const T> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

// Autoregressive continuation using the kv cache. temperature 0 is greedy.
template <std::floating_point T>
std::vector<TokenId> generate(const Model<T>& m, std::vector<TokenId> prompt, std::size_t n_new, double temperature,
                              std::uint64_t seed) {
  if (prompt.empty()) throw LengthError("generate: empty prompt");
  if (temperature < 0) throw ValueError("generate: temperature must be >= 0");
  const auto& c = m.config();
  if (prompt.size() + n_new > c.context_len) {
    throw LengthError("generate: " + std::to_string(prompt.size() + n_new) + " tokens exceed context " +
                      std::to_string(c.context_len));
  }
  if (n_new == 0) return prompt;

  std::mt19937_64 rng(seed);
  KVCache<T> cache(c);
  auto logits = forward_sequence(m, std::span<const TokenId>(prompt), &cache);
  const std::size_t V = c.vocab_size;
  for (std::size_t i = 0; i < n_new; ++i) {
    auto last = logits.data().subspan((logits.dim(0) - 1) * V, V);
    TokenId next;
    if (temperature == 0.0) {
      next = static_cast<TokenId>(argmax(last));
    } else {
      std::vector<double> p(V);
      const double mx = static_cast<double>(last[argmax(last)]);
      double z = 0;
      for (std::size_t v = 0; v < V; ++v) z += p[v] = std::exp((static_cast<double>(last[v]) - mx) / temperature);
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53 * z;
      double acc = 0;
      next = static_cast<TokenId>(V - 1);
      for (std::size_t v = 0; v < V; ++v) {
        acc += p[v];
        if (u < acc) {
          next = static_cast<TokenId>(v);
          break;
        }
      }
    }
    prompt.push_back(next);
    if (i + 1 < n_new) {
      const TokenId one[1] = {next};
      logits = forward_sequence(m, std::span<const TokenId>(one), &cache);
    }
  }
  return prompt;
}

}  // namespace mllm
