#pragma once

// Model genotype, validation, exact parameter accounting and depth-vs-width
// enumeration under a parameter budget.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mllm/errors.hpp"
#include "mllm/sharing.hpp"

namespace mllm {

inline constexpr std::size_t kDefaultHeadDim = 64;

struct ModelConfig {
  std::size_t n_layers = 1;  // distinct weight-owning blocks
  std::size_t n_heads = 1;
  std::size_t n_kv_heads = 1;
  std::size_t embed_dim = 64;
  std::size_t hidden_dim = 256;
  std::size_t vocab_size = 256;
  std::size_t context_len = 256;
  bool share_embeddings = true;
  SharingStrategy sharing = SharingStrategy::None;
  std::size_t repeat_factor = 1;

  std::size_t head_dim() const { return n_heads ? embed_dim / n_heads : 0; }
  std::size_t kv_dim() const { return n_kv_heads * head_dim(); }
  std::size_t executed_layers() const { return n_layers * repeat_factor; }

  bool operator==(const ModelConfig&) const = default;
};

// Every violated invariant, in a fixed order. Empty iff the config is constructible.
inline std::vector<std::string> validate(const ModelConfig& c) {
  std::vector<std::string> v;
  auto positive = [&](std::size_t x, const char* name) {
    if (x == 0) v.push_back(std::string(name) + " must be positive");
  };
  positive(c.n_layers, "n_layers");
  positive(c.n_heads, "n_heads");
  positive(c.n_kv_heads, "n_kv_heads");
  positive(c.embed_dim, "embed_dim");
  positive(c.hidden_dim, "hidden_dim");
  positive(c.vocab_size, "vocab_size");
  positive(c.context_len, "context_len");
  positive(c.repeat_factor, "repeat_factor");
  if (c.n_heads && c.n_kv_heads && c.n_heads % c.n_kv_heads != 0)
    v.push_back("n_heads not divisible by n_kv_heads");
  if (c.n_heads && c.embed_dim % c.n_heads != 0) v.push_back("embed_dim not divisible by n_heads");
  if (c.n_heads && c.embed_dim % c.n_heads == 0 && c.head_dim() % 2 != 0)
    v.push_back("head_dim must be even for rotary embeddings");
  if (c.sharing == SharingStrategy::None && c.repeat_factor != 1)
    v.push_back("repeat_factor must be 1 when sharing is none");
  if (c.sharing == SharingStrategy::Reverse && c.repeat_factor != 2)
    v.push_back("reverse sharing requires repeat_factor 2");
  return v;
}

inline void require_valid(const ModelConfig& c) {
  auto v = validate(c);
  if (v.empty()) return;
  std::string msg = "invalid model config:";
  for (const auto& s : v) msg += " " + s + ";";
  throw ConfigError(msg);
}

// FFN inner width used by the published configurations: 8/3 of the model
// width, rounded up to a multiple of 256.
inline std::size_t swiglu_hidden_dim(std::size_t embed_dim, std::size_t multiple_of = 256) {
  const std::size_t h = (8 * embed_dim + 2) / 3;
  return (h + multiple_of - 1) / multiple_of * multiple_of;
}

struct ParamCount {
  std::uint64_t embedding = 0;  // input table, plus output head when untied
  std::uint64_t blocks = 0;     // attention + FFN projections of all distinct blocks
  std::uint64_t norms = 0;      // per-block norm scales + final norm
  std::uint64_t total() const { return embedding + blocks + norms; }
};

inline std::uint64_t block_param_count(const ModelConfig& c) {
  const std::uint64_t d = c.embed_dim, kv = c.kv_dim(), h = c.hidden_dim;
  return 2 * d * d + 2 * d * kv + 3 * d * h + 2 * d;
}

// Exact number of scalar parameters. No biases; norms are scale-only. Layer
// sharing never changes the count.
inline ParamCount count_params(const ModelConfig& c) {
  require_valid(c);
  const std::uint64_t d = c.embed_dim, kv = c.kv_dim(), h = c.hidden_dim, V = c.vocab_size;
  ParamCount p;
  p.embedding = V * d * (c.share_embeddings ? 1 : 2);
  p.blocks = c.n_layers * (2 * d * d + 2 * d * kv + 3 * d * h);
  p.norms = c.n_layers * 2 * d + d;
  return p;
}

struct SweepResult {
  std::vector<ModelConfig> configs;  // sorted by depth
  std::vector<std::string> warnings;
};

struct SweepOptions {
  std::size_t head_dim = kDefaultHeadDim;
  std::size_t vocab_size = 32000;
  bool share_embeddings = false;
  double upper_slack = 1.02;  // admissible count <= upper_slack * budget
  double tolerance = 0.03;    // final configs within +-tolerance of budget
};

// For each depth, the widest multi-head config (embed_dim a multiple of
// head_dim) whose count stays under upper_slack * budget.
inline SweepResult enumerate_depth_width(std::uint64_t budget, std::vector<std::size_t> depths,
                                         const SweepOptions& opt = {}) {
  if (depths.empty()) throw ConfigError("enumerate_depth_width: no depths given");
  if (opt.head_dim == 0) throw ConfigError("enumerate_depth_width: head_dim must be positive");
  std::sort(depths.begin(), depths.end());
  depths.erase(std::unique(depths.begin(), depths.end()), depths.end());

  SweepResult out;
  const double cap = opt.upper_slack * static_cast<double>(budget);
  for (auto depth : depths) {
    if (depth == 0) {
      out.warnings.push_back("depth 0 skipped");
      continue;
    }
    ModelConfig best;
    bool found = false;
    for (std::size_t heads = 1;; ++heads) {
      ModelConfig c;
      c.n_layers = depth;
      c.n_heads = heads;
      c.n_kv_heads = heads;
      c.embed_dim = heads * opt.head_dim;
      c.hidden_dim = swiglu_hidden_dim(c.embed_dim);
      c.vocab_size = opt.vocab_size;
      c.share_embeddings = opt.share_embeddings;
      if (static_cast<double>(count_params(c).total()) > cap) break;
      best = c;
      found = true;
    }
    if (!found) {
      out.warnings.push_back("depth " + std::to_string(depth) + ": no width fits the budget");
      continue;
    }
    const double n = static_cast<double>(count_params(best).total());
    const double rel = n / static_cast<double>(budget) - 1.0;
    if (rel < -opt.tolerance || rel > opt.tolerance) {
      out.warnings.push_back("depth " + std::to_string(depth) + ": closest width " +
                             std::to_string(best.embed_dim) + " gives " + std::to_string(count_params(best).total()) +
                             " params, outside tolerance");
      continue;
    }
    out.configs.push_back(best);
  }
  return out;
}

}  // namespace mllm
