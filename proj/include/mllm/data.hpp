#pragma once

// Byte-level tokenizer, token-stream files and deterministic batch sampling.
//
// Token stream file ("MTOK"): 16-byte header of magic "MTOK", then version,
// vocab_size and token count as unsigned 32-bit little-endian, followed by
// `count` unsigned 16-bit little-endian token ids. Any other file is read as
// raw bytes and tokenized byte-by-byte.

#include <cstdint>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "mllm/errors.hpp"
#include "mllm/model.hpp"

namespace mllm {

struct ByteTokenizer {
  static constexpr TokenId kBos = 256;
  static constexpr TokenId kEos = 257;
  static constexpr std::size_t kVocabSize = 258;

  static std::vector<TokenId> encode(std::string_view text) {
    std::vector<TokenId> out;
    out.reserve(text.size());
    for (unsigned char c : text) out.push_back(static_cast<TokenId>(c));
    return out;
  }

  // Specials and out-of-range ids are dropped.
  static std::string decode(std::span<const TokenId> ids) {
    std::string out;
    for (auto id : ids)
      if (id >= 0 && id < 256) out.push_back(static_cast<char>(id));
    return out;
  }
};

inline constexpr char kTokenMagic[4] = {'M', 'T', 'O', 'K'};
inline constexpr std::uint32_t kTokenFormatVersion = 1;

struct TokenStream {
  std::vector<TokenId> tokens;
  std::size_t vocab_size = ByteTokenizer::kVocabSize;
};

namespace detail {

inline std::uint32_t read_u32_le(const unsigned char* p) {
  return std::uint32_t{p[0]} | std::uint32_t{p[1]} << 8 | std::uint32_t{p[2]} << 16 | std::uint32_t{p[3]} << 24;
}

inline void put_u32_le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

}  // namespace detail

inline TokenStream parse_token_stream(const std::string& bytes) {
  TokenStream s;
  if (bytes.size() >= 16 && std::equal(kTokenMagic, kTokenMagic + 4, bytes.begin())) {
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    const std::uint32_t version = detail::read_u32_le(p + 4);
    if (version != kTokenFormatVersion) throw FormatError("unsupported token stream version " + std::to_string(version));
    s.vocab_size = detail::read_u32_le(p + 8);
    const std::uint32_t count = detail::read_u32_le(p + 12);
    if (bytes.size() != 16 + std::size_t{count} * 2) throw FormatError("token stream length does not match header");
    s.tokens.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
      const auto id = static_cast<TokenId>(p[16 + 2 * i] | p[17 + 2 * i] << 8);
      if (static_cast<std::size_t>(id) >= s.vocab_size) throw FormatError("token id outside header vocabulary");
      s.tokens.push_back(id);
    }
    return s;
  }
  s.tokens = ByteTokenizer::encode(bytes);
  return s;
}

inline std::string serialize_token_stream(const TokenStream& s) {
  if (s.tokens.size() > 0xffffffffu) throw FormatError("token stream too long");
  std::string out(kTokenMagic, 4);
  detail::put_u32_le(out, kTokenFormatVersion);
  detail::put_u32_le(out, static_cast<std::uint32_t>(s.vocab_size));
  detail::put_u32_le(out, static_cast<std::uint32_t>(s.tokens.size()));
  for (auto id : s.tokens) {
    if (id < 0 || id > 0xffff) throw FormatError("token id does not fit 16 bits");
    out.push_back(static_cast<char>(id & 0xff));
    out.push_back(static_cast<char>((id >> 8) & 0xff));
  }
  return out;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline TokenStream load_token_stream(const std::string& path) { return parse_token_stream(read_file(path)); }

// Random windows of seq_len tokens, drawn in an order fixed by the seed.
class BatchSampler {
 public:
  BatchSampler(std::vector<TokenId> tokens, std::size_t batch, std::size_t seq_len, std::uint64_t seed)
      : tokens_(std::move(tokens)), batch_(batch), seq_(seq_len), rng_(seed) {
    if (tokens_.size() < seq_len) {
      throw LengthError("corpus of " + std::to_string(tokens_.size()) + " tokens is shorter than seq_len " +
                        std::to_string(seq_len));
    }
  }

  TokenBatch next() {
    TokenBatch b{batch_, seq_, {}};
    b.ids.reserve(batch_ * seq_);
    const std::uint64_t starts = tokens_.size() - seq_ + 1;
    for (std::size_t i = 0; i < batch_; ++i) {
      const std::size_t start = static_cast<std::size_t>(rng_() % starts);
      b.ids.insert(b.ids.end(), tokens_.begin() + static_cast<std::ptrdiff_t>(start),
                   tokens_.begin() + static_cast<std::ptrdiff_t>(start + seq_));
    }
    return b;
  }

 private:
  std::vector<TokenId> tokens_;
  std::size_t batch_;
  std::size_t seq_;
  std::mt19937_64 rng_;
};

}  // namespace mllm
