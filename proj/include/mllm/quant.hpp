#pragma once

// Asymmetric 8-bit min-max quantization over slices of a tensor.
//
// A slice is the set of elements that share every index except `axis`; min
// and max are taken along `axis`. For a [tokens, features] activation with
// axis = 1 that is one scale per token; for a [in, out] weight with axis = 0
// it is one scale per output channel.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "mllm/errors.hpp"
#include "mllm/ops.hpp"
#include "mllm/tensor.hpp"

namespace mllm {

struct QuantizedTensor {
  Shape shape;
  std::size_t axis = 0;
  std::vector<std::uint8_t> q;           // one code per element, 0..255
  std::vector<double> scale;             // per slice
  std::vector<std::int32_t> zero_point;  // per slice
  std::vector<double> offset;            // per slice; the constant for degenerate slices, else 0

  std::size_t slice_count() const { return scale.size(); }
  bool operator==(const QuantizedTensor&) const = default;
};

namespace detail {

// Calls fn(slice, element_index) for every element, in slice-major order.
template <typename Fn>
void for_each_in_slices(const AxisLayout& L, Fn&& fn) {
  for (std::size_t o = 0; o < L.outer; ++o)
    for (std::size_t in = 0; in < L.inner; ++in) {
      const std::size_t s = o * L.inner + in;
      const std::size_t base = o * L.len * L.inner + in;
      for (std::size_t i = 0; i < L.len; ++i) fn(s, base + i * L.inner);
    }
}

}  // namespace detail

template <std::floating_point T>
QuantizedTensor quantize_minmax(std::span<const T> values, const Shape& shape, std::size_t axis) {
  if (shape_numel(shape) != values.size()) throw DimensionError("quantize_minmax: shape does not match data");
  for (auto v : values)
    if (!std::isfinite(v)) throw ValueError("quantize_minmax: non-finite input");
  const auto L = detail::axis_layout(shape, axis);
  const std::size_t n_slices = L.outer * L.inner;

  std::vector<double> lo(n_slices, std::numeric_limits<double>::infinity()),
      hi(n_slices, -std::numeric_limits<double>::infinity());
  detail::for_each_in_slices(L, [&](std::size_t s, std::size_t k) {
    lo[s] = std::min(lo[s], static_cast<double>(values[k]));
    hi[s] = std::max(hi[s], static_cast<double>(values[k]));
  });

  QuantizedTensor qt;
  qt.shape = shape;
  qt.axis = axis;
  qt.q.assign(values.size(), 0);
  qt.scale.resize(n_slices);
  qt.zero_point.resize(n_slices);
  qt.offset.assign(n_slices, 0.0);
  for (std::size_t s = 0; s < n_slices; ++s) {
    if (hi[s] == lo[s]) {
      qt.scale[s] = 1.0;
      qt.zero_point[s] = 0;
      qt.offset[s] = lo[s];
    } else {
      qt.scale[s] = (hi[s] - lo[s]) / 255.0;
      qt.zero_point[s] = static_cast<std::int32_t>(std::round(-lo[s] / qt.scale[s]));
    }
  }
  detail::for_each_in_slices(L, [&](std::size_t s, std::size_t k) {
    if (hi[s] == lo[s]) return;
    const double code = std::round(static_cast<double>(values[k]) / qt.scale[s]) + qt.zero_point[s];
    qt.q[k] = static_cast<std::uint8_t>(std::clamp(code, 0.0, 255.0));
  });
  return qt;
}

template <std::floating_point T>
QuantizedTensor quantize_minmax(const Tensor<T>& x, std::size_t axis) {
  return quantize_minmax<T>(x.data(), x.shape(), axis);
}

template <std::floating_point T>
std::vector<T> dequantize_values(const QuantizedTensor& qt) {
  const auto L = detail::axis_layout(qt.shape, qt.axis);
  std::vector<T> out(qt.q.size());
  detail::for_each_in_slices(L, [&](std::size_t s, std::size_t k) {
    out[k] = static_cast<T>((static_cast<double>(qt.q[k]) - qt.zero_point[s]) * qt.scale[s] + qt.offset[s]);
  });
  return out;
}

template <std::floating_point T>
Tensor<T> dequantize(const QuantizedTensor& qt, bool requires_grad = false) {
  return Tensor<T>::from(qt.shape, dequantize_values<T>(qt), requires_grad);
}

// Quantize-dequantize in the forward pass; identity (straight-through) in the
// backward pass.
template <std::floating_point T>
Tensor<T> fake_quantize(const Tensor<T>& x, std::size_t axis) {
  auto values = dequantize_values<T>(quantize_minmax(x, axis));
  return detail::make_result<T>(x.shape(), std::move(values), {x}, [](Node<T>& self) {
    auto& d = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += self.grad[i];
  });
}

}  // namespace mllm
