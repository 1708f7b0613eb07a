#pragma once

// Binary checkpoint container.
//
//   magic          "MLLM"
//   version        u32   1: every tensor is f32; 2: every tensor carries a dtype tag
//   config         u64 length + UTF-8 JSON object
//   tensor count   u64
//   per tensor     u64 length + UTF-8 name
//                  (v2) u64 length + dtype tag: "f32" | "u8+scale+zp"
//                  u32 rank, rank x u64 extents
//                  f32:          numel x f32
//                  u8+scale+zp:  u32 axis, u64 slices, slices x f64 scale,
//                                slices x i32 zero_point, slices x f64 offset,
//                                numel x u8 codes
//
// All integers and floats are little-endian. A tied output head is stored
// once, under "embedding".

#include <bit>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "mllm/config.hpp"
#include "mllm/data.hpp"
#include "mllm/errors.hpp"
#include "mllm/model.hpp"
#include "mllm/quant.hpp"

namespace mllm {

inline constexpr char kCheckpointMagic[4] = {'M', 'L', 'L', 'M'};
inline constexpr std::uint32_t kCheckpointF32 = 1;
inline constexpr std::uint32_t kCheckpointTagged = 2;
inline constexpr std::string_view kDtypeF32 = "f32";
inline constexpr std::string_view kDtypeU8 = "u8+scale+zp";

inline nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"n_layers", c.n_layers},       {"n_heads", c.n_heads},
          {"n_kv_heads", c.n_kv_heads},   {"embed_dim", c.embed_dim},
          {"hidden_dim", c.hidden_dim},   {"vocab_size", c.vocab_size},
          {"context_len", c.context_len}, {"share_embeddings", c.share_embeddings},
          {"sharing", to_string(c.sharing)}, {"repeat_factor", c.repeat_factor}};
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
  try {
    ModelConfig c;
    c.n_layers = j.at("n_layers").get<std::size_t>();
    c.n_heads = j.at("n_heads").get<std::size_t>();
    c.n_kv_heads = j.at("n_kv_heads").get<std::size_t>();
    c.embed_dim = j.at("embed_dim").get<std::size_t>();
    c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    c.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.context_len = j.at("context_len").get<std::size_t>();
    c.share_embeddings = j.at("share_embeddings").get<bool>();
    c.sharing = parse_sharing(j.at("sharing").get<std::string>());
    c.repeat_factor = j.at("repeat_factor").get<std::size_t>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad config object: ") + e.what());
  }
}

namespace detail {

class ByteWriter {
 public:
  void bytes(std::string_view s) { out_.append(s); }
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u64(s.size());
    bytes(s);
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  std::string_view bytes(std::size_t n) {
    if (n > data_.size() - pos_) throw FormatError("checkpoint truncated");
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint8_t u8() { return static_cast<std::uint8_t>(bytes(1)[0]); }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{u8()} << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{u8()} << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() { return std::string(bytes(static_cast<std::size_t>(u64()))); }
  bool done() const { return pos_ == data_.size(); }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace detail

template <std::floating_point T>
std::string serialize_checkpoint(const Model<T>& model) {
  const bool tagged = !model.weight_codes.empty();
  detail::ByteWriter w;
  w.bytes(std::string_view(kCheckpointMagic, 4));
  w.u32(tagged ? kCheckpointTagged : kCheckpointF32);
  auto cfg = config_to_json(model.config());
  if (model.activation_quant) cfg["w8a8"] = true;
  w.str(cfg.dump());
  const auto params = model.parameters();
  w.u64(params.size());
  for (const auto& p : params) {
    w.str(p.name);
    auto code = model.weight_codes.find(p.name);
    const bool quantized = code != model.weight_codes.end();
    if (tagged) w.str(quantized ? kDtypeU8 : kDtypeF32);
    w.u32(static_cast<std::uint32_t>(p.tensor.rank()));
    for (auto e : p.tensor.shape()) w.u64(e);
    if (!quantized) {
      for (auto v : p.tensor.data()) w.f32(static_cast<float>(v));
      continue;
    }
    const auto& qt = code->second;
    if (qt.shape != p.tensor.shape()) throw FormatError("quantized codes for '" + p.name + "' have the wrong shape");
    w.u32(static_cast<std::uint32_t>(qt.axis));
    w.u64(qt.slice_count());
    for (auto s : qt.scale) w.f64(s);
    for (auto z : qt.zero_point) w.u32(static_cast<std::uint32_t>(z));
    for (auto o : qt.offset) w.f64(o);
    for (auto q : qt.q) w.u8(q);
  }
  return w.take();
}

template <std::floating_point T>
Model<T> parse_checkpoint(std::string_view bytes) {
  detail::ByteReader r(bytes);
  if (r.bytes(4) != std::string_view(kCheckpointMagic, 4)) throw FormatError("not a checkpoint (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointF32 && version != kCheckpointTagged)
    throw FormatError("unsupported checkpoint version " + std::to_string(version));

  nlohmann::json cfg;
  try {
    cfg = nlohmann::json::parse(r.str());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad config json: ") + e.what());
  }
  const ModelConfig config = config_from_json(cfg);

  std::map<std::string, Tensor<T>> named;
  std::map<std::string, QuantizedTensor> codes;
  const std::uint64_t count = r.u64();
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = r.str();
    std::string dtype(kDtypeF32);
    if (version == kCheckpointTagged) dtype = r.str();
    const std::uint32_t rank = r.u32();
    Shape shape(rank);
    for (auto& e : shape) e = static_cast<std::size_t>(r.u64());
    const std::size_t n = shape_numel(shape);
    std::vector<T> values;
    if (dtype == kDtypeF32) {
      values.resize(n);
      for (auto& v : values) v = static_cast<T>(r.f32());
    } else if (dtype == kDtypeU8) {
      QuantizedTensor qt;
      qt.shape = shape;
      qt.axis = r.u32();
      const std::uint64_t slices = r.u64();
      for (std::uint64_t s = 0; s < slices; ++s) qt.scale.push_back(r.f64());
      for (std::uint64_t s = 0; s < slices; ++s) qt.zero_point.push_back(static_cast<std::int32_t>(r.u32()));
      for (std::uint64_t s = 0; s < slices; ++s) qt.offset.push_back(r.f64());
      const auto L = detail::axis_layout(shape, qt.axis);
      if (L.outer * L.inner != slices) throw FormatError("slice count of '" + name + "' does not match its shape");
      auto raw = r.bytes(n);
      qt.q.assign(raw.begin(), raw.end());
      values = dequantize_values<T>(qt);
      codes.emplace(name, std::move(qt));
    } else {
      throw FormatError("unknown dtype tag '" + dtype + "'");
    }
    if (!named.emplace(name, Tensor<T>::from(std::move(shape), std::move(values), true)).second)
      throw FormatError("duplicate tensor '" + name + "'");
  }
  if (!r.done()) throw FormatError("trailing bytes after last tensor");
  if (named.size() != config.n_layers * 9 + 2 + (config.share_embeddings ? 0 : 1))
    throw FormatError("tensor set does not match the config");

  auto model = Model<T>::from_parameters(config, named);
  model.weight_codes = std::move(codes);
  model.activation_quant = cfg.value("w8a8", false);
  return model;
}

template <std::floating_point T>
void save_checkpoint(const Model<T>& model, const std::string& path) {
  write_file(path, serialize_checkpoint(model));
}

template <std::floating_point T = float>
Model<T> load_checkpoint(const std::string& path) {
  return parse_checkpoint<T>(read_file(path));
}

}  // namespace mllm
