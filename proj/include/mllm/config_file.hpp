#pragma once

// Human-editable configuration files: one `key = value` per line, `#` starts a
// comment, `[section]` headers group keys. Keys before the first header (or
// under [model]) describe the model; [hardware] holds the cost envelope and
// [train] the training plan.

#include <charconv>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "mllm/config.hpp"
#include "mllm/cost_model.hpp"
#include "mllm/data.hpp"
#include "mllm/errors.hpp"
#include "mllm/training.hpp"

namespace mllm {

class ConfigFile {
 public:
  using Section = std::map<std::string, std::string>;

  static ConfigFile parse(std::string_view text) {
    ConfigFile f;
    std::string section = "model";
    std::size_t line_no = 0;
    while (!text.empty()) {
      auto nl = text.find('\n');
      std::string_view line = text.substr(0, nl);
      text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
      ++line_no;
      if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') throw ConfigError(where(line_no) + "unterminated section header");
        section = std::string(trim(line.substr(1, line.size() - 2)));
        if (section != "model" && section != "hardware" && section != "train")
          throw ConfigError(where(line_no) + "unknown section [" + section + "]");
        continue;
      }
      auto eq = line.find('=');
      if (eq == std::string_view::npos) throw ConfigError(where(line_no) + "expected 'key = value'");
      std::string key(trim(line.substr(0, eq)));
      std::string value(trim(line.substr(eq + 1)));
      if (key.empty()) throw ConfigError(where(line_no) + "empty key");
      if (!f.sections_[section].emplace(key, value).second)
        throw ConfigError(where(line_no) + "duplicate key '" + key + "'");
    }
    return f;
  }

  bool has_section(const std::string& name) const { return sections_.contains(name); }

  ModelConfig model() const {
    Section s = section("model");
    ModelConfig c;
    c.n_layers = take_uint(s, "n_layers").value_or(c.n_layers);
    c.n_heads = take_uint(s, "n_heads").value_or(c.n_heads);
    c.n_kv_heads = take_uint(s, "n_kv_heads").value_or(c.n_heads);
    c.embed_dim = take_uint(s, "embed_dim").value_or(c.embed_dim);
    c.hidden_dim = take_uint(s, "hidden_dim").value_or(swiglu_hidden_dim(c.embed_dim));
    c.vocab_size = take_uint(s, "vocab_size").value_or(c.vocab_size);
    c.context_len = take_uint(s, "context_len").value_or(c.context_len);
    c.share_embeddings = take_bool(s, "share_embeddings").value_or(c.share_embeddings);
    if (auto v = take(s, "sharing")) c.sharing = parse_sharing(*v);
    const std::size_t default_repeat = c.sharing == SharingStrategy::None ? 1 : 2;
    c.repeat_factor = take_uint(s, "repeat_factor").value_or(default_repeat);
    reject_leftovers(s, "model");
    return c;
  }

  CostEnvelope hardware() const {
    Section s = section("hardware");
    CostEnvelope e;
    e.energy_per_token_per_b = take_real(s, "energy_per_token_per_b").value_or(e.energy_per_token_per_b);
    e.sram_bytes = take_uint(s, "sram_bytes").value_or(e.sram_bytes);
    e.battery_joules = take_real(s, "battery_joules").value_or(e.battery_joules);
    e.bytes_per_param = take_real(s, "bytes_per_param").value_or(e.bytes_per_param);
    if (auto bw = take_real(s, "dram_bandwidth")) e.dram_bandwidth = *bw;
    reject_leftovers(s, "hardware");
    e.validate();
    return e;
  }

  // Overrides on top of `plan`; total_steps and seed usually come from the command line.
  TrainPlan train(TrainPlan plan) const {
    Section s = section("train");
    plan.peak_lr = take_real(s, "peak_lr").value_or(plan.peak_lr);
    plan.weight_decay = take_real(s, "weight_decay").value_or(plan.weight_decay);
    plan.batch_size = take_uint(s, "batch_size").value_or(plan.batch_size);
    plan.seq_len = take_uint(s, "seq_len").value_or(plan.seq_len);
    plan.grad_clip = take_real(s, "grad_clip").value_or(plan.grad_clip);
    plan.beta1 = take_real(s, "beta1").value_or(plan.beta1);
    plan.beta2 = take_real(s, "beta2").value_or(plan.beta2);
    plan.kd_weight = take_real(s, "kd_weight").value_or(plan.kd_weight);
    if (auto w = take_uint(s, "warmup_steps")) plan.warmup_steps = *w;
    reject_leftovers(s, "train");
    return plan;
  }

 private:
  static std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  static std::string where(std::size_t line) { return "config line " + std::to_string(line) + ": "; }

  Section section(const std::string& name) const {
    auto it = sections_.find(name);
    return it == sections_.end() ? Section{} : it->second;
  }

  static std::optional<std::string> take(Section& s, const std::string& key) {
    auto it = s.find(key);
    if (it == s.end()) return std::nullopt;
    std::string v = it->second;
    s.erase(it);
    return v;
  }

  static std::optional<std::uint64_t> take_uint(Section& s, const std::string& key) {
    auto v = take(s, key);
    if (!v) return std::nullopt;
    std::uint64_t out = 0;
    auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec == std::errc{} && p == v->data() + v->size()) return out;
    // Accept integral values written in scientific notation, e.g. 134e6.
    double d = parse_real(key, *v);
    if (d < 0 || d != static_cast<double>(static_cast<std::uint64_t>(d)))
      throw ConfigError("'" + key + "' must be a non-negative integer, got '" + *v + "'");
    return static_cast<std::uint64_t>(d);
  }

  static double parse_real(const std::string& key, const std::string& v) {
    double d = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), d);
    if (ec != std::errc{} || p != v.data() + v.size())
      throw ConfigError("'" + key + "' must be a number, got '" + v + "'");
    return d;
  }

  static std::optional<double> take_real(Section& s, const std::string& key) {
    auto v = take(s, key);
    if (!v) return std::nullopt;
    return parse_real(key, *v);
  }

  static std::optional<bool> take_bool(Section& s, const std::string& key) {
    auto v = take(s, key);
    if (!v) return std::nullopt;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    throw ConfigError("'" + key + "' must be true or false, got '" + *v + "'");
  }

  static void reject_leftovers(const Section& s, const std::string& name) {
    if (s.empty()) return;
    throw ConfigError("unknown key '" + s.begin()->first + "' in [" + name + "]");
  }

  std::map<std::string, Section> sections_;
};

inline ConfigFile load_config_file(const std::string& path) { return ConfigFile::parse(read_file(path)); }

}  // namespace mllm
