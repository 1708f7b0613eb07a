#pragma once

// W8A8 post-training quantization (simulated): weights are replaced by their
// quantize-dequantize image and activations are fake-quantized per token.

#include <string>

#include "mllm/model.hpp"
#include "mllm/quant.hpp"

namespace mllm {

// Reduction axis for a named weight: one slice per output unit. Projections
// are stored [in, out]; embedding tables are [vocab, dim] with one row per
// output logit. Returns -1 for tensors that stay in floating point.
inline int weight_quant_axis(const std::string& name) {
  if (name == "embedding" || name == "output_head") return 1;
  if (name.ends_with("_norm")) return -1;
  return 0;
}

template <std::floating_point T>
Model<T> ptq_model(const Model<T>& model) {
  Model<T> out = model;
  out.weight_codes.clear();
  for (auto& p : out.parameters()) {
    const int axis = weight_quant_axis(p.name);
    if (axis < 0) continue;
    auto qt = quantize_minmax(p.tensor, static_cast<std::size_t>(axis));
    auto values = dequantize_values<T>(qt);
    std::copy(values.begin(), values.end(), p.tensor.mutable_data().begin());
    out.weight_codes.emplace(p.name, std::move(qt));
  }
  out.activation_quant = true;
  return out;
}

}  // namespace mllm
