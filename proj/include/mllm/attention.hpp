#pragma once

// Grouped-query attention with rotary positions, causal masking and an
// incremental key/value cache.

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "mllm/config.hpp"
#include "mllm/errors.hpp"
#include "mllm/ops.hpp"
#include "mllm/tensor.hpp"

namespace mllm {

template <std::floating_point T>
struct AttentionWeights {
  Tensor<T> wq;  // [dim, n_heads * head_dim]
  Tensor<T> wk;  // [dim, n_kv_heads * head_dim]
  Tensor<T> wv;  // [dim, n_kv_heads * head_dim]
  Tensor<T> wo;  // [n_heads * head_dim, dim]
};

struct AttentionShape {
  std::size_t n_heads = 1;
  std::size_t n_kv_heads = 1;
  double rope_base = kRopeBase;
};

// Keys and values of one executed layer, laid out (n_kv_heads, filled, head_dim).
// Keys are stored after the rotary rotation.
template <std::floating_point T>
class KVSlot {
 public:
  KVSlot(std::size_t n_kv_heads, std::size_t head_dim, std::size_t capacity)
      : head_dim_(head_dim), capacity_(capacity), keys_(n_kv_heads), values_(n_kv_heads) {}

  std::size_t filled() const { return filled_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t n_kv_heads() const { return keys_.size(); }
  std::size_t head_dim() const { return head_dim_; }

  // Cached history of one kv-head as a constant [filled, head_dim] tensor.
  Tensor<T> keys(std::size_t head) const { return Tensor<T>::from({filled_, head_dim_}, keys_.at(head)); }
  Tensor<T> values(std::size_t head) const { return Tensor<T>::from({filled_, head_dim_}, values_.at(head)); }

  // Appends `rows` new positions; k_heads[g] and v_heads[g] are [rows, head_dim].
  void append(const std::vector<Tensor<T>>& k_heads, const std::vector<Tensor<T>>& v_heads) {
    const std::size_t rows = k_heads.at(0).dim(0);
    if (filled_ + rows > capacity_) {
      throw LengthError("kv cache capacity exceeded: " + std::to_string(filled_ + rows) + " > " +
                        std::to_string(capacity_));
    }
    for (std::size_t g = 0; g < keys_.size(); ++g) {
      keys_[g].insert(keys_[g].end(), k_heads[g].data().begin(), k_heads[g].data().end());
      values_[g].insert(values_[g].end(), v_heads[g].data().begin(), v_heads[g].data().end());
    }
    filled_ += rows;
  }

  std::size_t stored_elements() const {
    std::size_t n = 0;
    for (std::size_t g = 0; g < keys_.size(); ++g) n += keys_[g].size() + values_[g].size();
    return n;
  }

 private:
  std::size_t head_dim_;
  std::size_t capacity_;
  std::size_t filled_ = 0;
  std::vector<std::vector<T>> keys_;
  std::vector<std::vector<T>> values_;
};

// One slot per executed layer: shared blocks get a slot per execution since
// their positions' inputs differ at every occurrence.
template <std::floating_point T>
class KVCache {
 public:
  KVCache(std::size_t n_slots, std::size_t n_kv_heads, std::size_t head_dim, std::size_t capacity) {
    slots_.reserve(n_slots);
    for (std::size_t i = 0; i < n_slots; ++i) slots_.emplace_back(n_kv_heads, head_dim, capacity);
  }

  explicit KVCache(const ModelConfig& c)
      : KVCache(c.executed_layers(), c.n_kv_heads, c.head_dim(), c.context_len) {}

  std::size_t size() const { return slots_.size(); }
  KVSlot<T>& slot(std::size_t i) { return slots_.at(i); }
  const KVSlot<T>& slot(std::size_t i) const { return slots_.at(i); }
  std::size_t filled() const { return slots_.empty() ? 0 : slots_.front().filled(); }

  std::uint64_t bytes(std::size_t bytes_per_elem) const {
    std::uint64_t n = 0;
    for (const auto& s : slots_) n += s.stored_elements();
    return n * bytes_per_elem;
  }

 private:
  std::vector<KVSlot<T>> slots_;
};

// Bytes needed to cache keys and values for seq_len positions across every
// executed layer.
inline std::uint64_t cache_bytes(const ModelConfig& c, std::size_t seq_len, std::size_t bytes_per_elem) {
  if (seq_len > c.context_len) {
    throw LengthError("cache_bytes: seq_len " + std::to_string(seq_len) + " exceeds context " +
                      std::to_string(c.context_len));
  }
  return std::uint64_t{2} * c.executed_layers() * c.n_kv_heads * seq_len * c.head_dim() * bytes_per_elem;
}

// x: [T, dim] for a single sequence at the given absolute positions. Each
// kv-head serves n_heads / n_kv_heads consecutive query heads. When a cache
// slot is supplied, positions must continue where the slot left off; the new
// keys and values are appended and attention spans the cached history.
template <std::floating_point T>
Tensor<T> gqa_attention(const Tensor<T>& x, const AttentionWeights<T>& w, const AttentionShape& shape,
                        std::span<const std::size_t> positions, KVSlot<T>* cache = nullptr) {
  if (shape.n_heads == 0 || shape.n_kv_heads == 0 || shape.n_heads % shape.n_kv_heads != 0) {
    throw ConfigError("n_heads (" + std::to_string(shape.n_heads) + ") not divisible by n_kv_heads (" +
                      std::to_string(shape.n_kv_heads) + ")");
  }
  detail::require_rank("gqa_attention", x.shape(), 2);
  const std::size_t seq = x.dim(0);
  const std::size_t q_width = w.wq.dim(1);
  if (q_width % shape.n_heads != 0) throw DimensionError("gqa_attention: query width not divisible by n_heads");
  const std::size_t hd = q_width / shape.n_heads;
  if (w.wk.dim(1) != shape.n_kv_heads * hd || w.wv.dim(1) != shape.n_kv_heads * hd) {
    throw DimensionError("gqa_attention: key/value projections " + shape_str(w.wk.shape()) + ", " +
                         shape_str(w.wv.shape()) + " do not match n_kv_heads * head_dim");
  }
  if (positions.size() != seq) throw DimensionError("gqa_attention: one position per row required");
  for (std::size_t i = 1; i < seq; ++i)
    if (positions[i] <= positions[i - 1]) throw IndexError("gqa_attention: positions must be strictly increasing");

  const std::size_t past = cache ? cache->filled() : 0;
  if (cache) {
    for (std::size_t i = 0; i < seq; ++i)
      if (positions[i] != past + i) throw IndexError("gqa_attention: cache append must be sequential");
    if (past + seq > cache->capacity()) {
      throw LengthError("kv cache capacity exceeded: " + std::to_string(past + seq) + " > " +
                        std::to_string(cache->capacity()));
    }
  }
  std::vector<std::size_t> key_positions;
  for (std::size_t i = 0; i < past; ++i) key_positions.push_back(i);
  key_positions.insert(key_positions.end(), positions.begin(), positions.end());

  const auto q = matmul(x, w.wq);
  const auto k = matmul(x, w.wk);
  const auto v = matmul(x, w.wv);
  const T base = static_cast<T>(shape.rope_base);

  std::vector<Tensor<T>> k_new, v_new, k_t, v_all;
  for (std::size_t g = 0; g < shape.n_kv_heads; ++g) {
    k_new.push_back(rope(slice(k, 0, seq, g * hd, hd), positions, base));
    v_new.push_back(slice(v, 0, seq, g * hd, hd));
    if (past > 0) {
      k_t.push_back(transpose(concat_rows<T>({cache->keys(g), k_new.back()})));
      v_all.push_back(concat_rows<T>({cache->values(g), v_new.back()}));
    } else {
      k_t.push_back(transpose(k_new.back()));
      v_all.push_back(v_new.back());
    }
  }
  if (cache) cache->append(k_new, v_new);

  const std::size_t group = shape.n_heads / shape.n_kv_heads;
  const T inv_sqrt = T{1} / std::sqrt(static_cast<T>(hd));
  std::vector<Tensor<T>> heads;
  heads.reserve(shape.n_heads);
  for (std::size_t h = 0; h < shape.n_heads; ++h) {
    const std::size_t g = h / group;
    auto qh = rope(slice(q, 0, seq, h * hd, hd), positions, base);
    auto scores = causal_mask(scale(matmul(qh, k_t[g]), inv_sqrt), positions, key_positions);
    heads.push_back(matmul(softmax(scores, 1), v_all[g]));
  }
  return matmul(concat_cols(heads), w.wo);
}

}  // namespace mllm
