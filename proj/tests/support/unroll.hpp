#pragma once

// Oracle for layer sharing: a plain model whose blocks are physical copies of
// the shared blocks laid out along the execution schedule.

#include <map>
#include <string>
#include <vector>

#include "mllm/model.hpp"

namespace mllm::testing {

template <std::floating_point T>
Model<T> unroll(const Model<T>& shared) {
  ModelConfig c = shared.config();
  const auto schedule = shared.schedule();
  c.n_layers = schedule.size();
  c.sharing = SharingStrategy::None;
  c.repeat_factor = 1;

  std::map<std::string, Tensor<T>> src;
  for (const auto& p : shared.parameters()) src.emplace(p.name, p.tensor);
  std::map<std::string, Tensor<T>> named;
  for (const auto& [name, t] : src) {
    if (!name.starts_with("blocks.")) named.emplace(name, t.clone(true));
  }
  static const char* kBlockTensors[] = {"attn_norm", "wq", "wk", "wv", "wo", "ffn_norm", "w_gate", "w_up", "w_down"};
  for (std::size_t step = 0; step < schedule.size(); ++step)
    for (const char* leaf : kBlockTensors) {
      const auto& from = src.at("blocks." + std::to_string(schedule[step]) + "." + leaf);
      named.emplace("blocks." + std::to_string(step) + "." + leaf, from.clone(true));
    }
  auto out = Model<T>::from_parameters(c, named);
  out.activation_quant = shared.activation_quant;
  return out;
}

// Sum of the unrolled model's gradients over every occurrence of each
// physical block, keyed by the shared model's parameter names.
template <std::floating_point T>
std::map<std::string, std::vector<double>> fold_gradients(const Model<T>& unrolled,
                                                           const std::vector<std::size_t>& schedule) {
  std::map<std::string, std::vector<double>> out;
  for (const auto& p : unrolled.parameters()) {
    std::string name = p.name;
    if (name.starts_with("blocks.")) {
      const auto dot = name.find('.', 7);
      const std::size_t step = std::stoul(name.substr(7, dot - 7));
      name = "blocks." + std::to_string(schedule[step]) + name.substr(dot);
    }
    auto& acc = out[name];
    acc.resize(p.tensor.numel(), 0.0);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += p.tensor.has_grad() ? static_cast<double>(p.tensor.grad()[i]) : 0.0;
  }
  return out;
}

}  // namespace mllm::testing
