#pragma once

// Differentiable operations over Tensor<T>. No implicit broadcasting: operands
// of elementwise ops must have identical shapes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "mllm/errors.hpp"
#include "mllm/tensor.hpp"

namespace mllm {

using TokenId = std::int32_t;

inline constexpr double kRmsNormEps = 1e-5;
inline constexpr double kRopeBase = 10000.0;

namespace detail {

inline void require_same_shape(const char* op, const Shape& a, const Shape& b) {
  if (a != b) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
  }
}

inline void require_rank(const char* op, const Shape& s, std::size_t rank) {
  if (s.size() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " + shape_str(s));
  }
}

template <typename T>
std::vector<T>* grad_of(Node<T>& self, std::size_t parent) {
  auto& p = self.parents[parent];
  return p->requires_grad ? &p->ensure_grad() : nullptr;
}

}  // namespace detail

// C[m,n] = A[m,k] * B[k,n]
template <std::floating_point T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_rank("matmul", a.shape(), 2);
  detail::require_rank("matmul", b.shape(), 2);
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner extents disagree " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  std::vector<T> out(m * n, T{0});
  auto A = a.data();
  auto B = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    T* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = A[i * k + p];
      const T* brow = B.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
  return detail::make_result<T>({m, n}, std::move(out), {a, b}, [m, k, n](Node<T>& self) {
    const auto& A = self.parents[0]->data;
    const auto& B = self.parents[1]->data;
    const auto& dC = self.grad;
    if (auto* dA = detail::grad_of(self, 0)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          T acc{0};
          for (std::size_t j = 0; j < n; ++j) acc += dC[i * n + j] * B[p * n + j];
          (*dA)[i * k + p] += acc;
        }
    }
    if (auto* dB = detail::grad_of(self, 1)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const T av = A[i * k + p];
          for (std::size_t j = 0; j < n; ++j) (*dB)[p * n + j] += av * dC[i * n + j];
        }
    }
  });
}

template <std::floating_point T>
Tensor<T> transpose(const Tensor<T>& a) {
  detail::require_rank("transpose", a.shape(), 2);
  const std::size_t r = a.dim(0), c = a.dim(1);
  std::vector<T> out(r * c);
  auto A = a.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = A[i * c + j];
  return detail::make_result<T>({c, r}, std::move(out), {a}, [r, c](Node<T>& self) {
    auto& dA = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) dA[i * c + j] += self.grad[j * r + i];
  });
}

template <std::floating_point T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw DimensionError("reshape: " + shape_str(a.shape()) + " to " + shape_str(shape));
  }
  std::vector<T> out(a.data().begin(), a.data().end());
  return detail::make_result<T>(std::move(shape), std::move(out), {a}, [](Node<T>& self) {
    auto& dA = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < dA.size(); ++i) dA[i] += self.grad[i];
  });
}

template <std::floating_point T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape("add", a.shape(), b.shape());
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return detail::make_result<T>(a.shape(), std::move(out), {a, b}, [](Node<T>& self) {
    for (std::size_t p = 0; p < 2; ++p)
      if (auto* d = detail::grad_of(self, p))
        for (std::size_t i = 0; i < d->size(); ++i) (*d)[i] += self.grad[i];
  });
}

template <std::floating_point T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape("sub", a.shape(), b.shape());
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return detail::make_result<T>(a.shape(), std::move(out), {a, b}, [](Node<T>& self) {
    if (auto* d = detail::grad_of(self, 0))
      for (std::size_t i = 0; i < d->size(); ++i) (*d)[i] += self.grad[i];
    if (auto* d = detail::grad_of(self, 1))
      for (std::size_t i = 0; i < d->size(); ++i) (*d)[i] -= self.grad[i];
  });
}

// Elementwise (Hadamard) product.
template <std::floating_point T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape("mul", a.shape(), b.shape());
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return detail::make_result<T>(a.shape(), std::move(out), {a, b}, [](Node<T>& self) {
    const auto& A = self.parents[0]->data;
    const auto& B = self.parents[1]->data;
    if (auto* d = detail::grad_of(self, 0))
      for (std::size_t i = 0; i < d->size(); ++i) (*d)[i] += self.grad[i] * B[i];
    if (auto* d = detail::grad_of(self, 1))
      for (std::size_t i = 0; i < d->size(); ++i) (*d)[i] += self.grad[i] * A[i];
  });
}

template <std::floating_point T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * factor;
  return detail::make_result<T>(a.shape(), std::move(out), {a}, [factor](Node<T>& self) {
    auto& d = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += self.grad[i] * factor;
  });
}

template <std::floating_point T>
Tensor<T> sum(const Tensor<T>& a) {
  T acc{0};
  for (auto v : a.data()) acc += v;
  return detail::make_result<T>({1}, {acc}, {a}, [](Node<T>& self) {
    auto& d = self.parents[0]->ensure_grad();
    for (auto& g : d) g += self.grad[0];
  });
}

template <std::floating_point T>
Tensor<T> mean(const Tensor<T>& a) {
  return scale(sum(a), T{1} / static_cast<T>(a.numel()));
}

// x * sigmoid(x)
template <std::floating_point T>
Tensor<T> silu(const Tensor<T>& x) {
  std::vector<T> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T v = x[i];
    out[i] = v / (T{1} + std::exp(-v));
  }
  return detail::make_result<T>(x.shape(), std::move(out), {x}, [](Node<T>& self) {
    const auto& X = self.parents[0]->data;
    auto& d = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < d.size(); ++i) {
      const T s = T{1} / (T{1} + std::exp(-X[i]));
      d[i] += self.grad[i] * s * (T{1} + X[i] * (T{1} - s));
    }
  });
}

// Normalizes each slice along the last axis by its root mean square, then
// multiplies by a learned per-feature scale.
template <std::floating_point T>
Tensor<T> rmsnorm(const Tensor<T>& x, const Tensor<T>& gain, T eps = static_cast<T>(kRmsNormEps)) {
  const std::size_t d = x.shape().back();
  if (gain.rank() != 1 || gain.dim(0) != d) {
    throw DimensionError("rmsnorm: scale " + shape_str(gain.shape()) + " vs input " + shape_str(x.shape()));
  }
  const std::size_t rows = x.numel() / d;
  std::vector<T> out(x.numel());
  std::vector<T> inv_rms(rows);
  auto X = x.data();
  auto G = gain.data();
  for (std::size_t r = 0; r < rows; ++r) {
    T ss{0};
    for (std::size_t j = 0; j < d; ++j) ss += X[r * d + j] * X[r * d + j];
    const T inv = T{1} / std::sqrt(ss / static_cast<T>(d) + eps);
    inv_rms[r] = inv;
    for (std::size_t j = 0; j < d; ++j) out[r * d + j] = X[r * d + j] * inv * G[j];
  }
  return detail::make_result<T>(
      x.shape(), std::move(out), {x, gain}, [rows, d, inv_rms = std::move(inv_rms)](Node<T>& self) {
        const auto& X = self.parents[0]->data;
        const auto& G = self.parents[1]->data;
        const auto& dY = self.grad;
        auto* dX = detail::grad_of(self, 0);
        auto* dG = detail::grad_of(self, 1);
        for (std::size_t r = 0; r < rows; ++r) {
          const T inv = inv_rms[r];
          const T* xr = X.data() + r * d;
          const T* gy = dY.data() + r * d;
          if (dG)
            for (std::size_t j = 0; j < d; ++j) (*dG)[j] += gy[j] * xr[j] * inv;
          if (dX) {
            T dot{0};
            for (std::size_t j = 0; j < d; ++j) dot += gy[j] * G[j] * xr[j];
            const T coef = dot * inv * inv * inv / static_cast<T>(d);
            for (std::size_t j = 0; j < d; ++j) (*dX)[r * d + j] += inv * G[j] * gy[j] - xr[j] * coef;
          }
        }
      });
}

namespace detail {

struct AxisLayout {
  std::size_t outer, len, inner;
};

inline AxisLayout axis_layout(const Shape& s, std::size_t axis) {
  if (axis >= s.size()) throw IndexError("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  AxisLayout l{1, s[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) l.outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) l.inner *= s[i];
  return l;
}

}  // namespace detail

// Max-shifted softmax along `axis`. Entries equal to -inf map to exactly 0.
template <std::floating_point T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis) {
  const auto L = detail::axis_layout(x.shape(), axis);
  std::vector<T> out(x.numel());
  auto X = x.data();
  for (std::size_t o = 0; o < L.outer; ++o)
    for (std::size_t in = 0; in < L.inner; ++in) {
      const std::size_t base = o * L.len * L.inner + in;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t i = 0; i < L.len; ++i) mx = std::max(mx, X[base + i * L.inner]);
      T z{0};
      for (std::size_t i = 0; i < L.len; ++i) {
        const T e = std::exp(X[base + i * L.inner] - mx);
        out[base + i * L.inner] = e;
        z += e;
      }
      for (std::size_t i = 0; i < L.len; ++i) out[base + i * L.inner] /= z;
    }
  return detail::make_result<T>(x.shape(), std::move(out), {x}, [L](Node<T>& self) {
    auto& dX = self.parents[0]->ensure_grad();
    const auto& Y = self.data;
    const auto& dY = self.grad;
    for (std::size_t o = 0; o < L.outer; ++o)
      for (std::size_t in = 0; in < L.inner; ++in) {
        const std::size_t base = o * L.len * L.inner + in;
        T dot{0};
        for (std::size_t i = 0; i < L.len; ++i) dot += dY[base + i * L.inner] * Y[base + i * L.inner];
        for (std::size_t i = 0; i < L.len; ++i) {
          const std::size_t k = base + i * L.inner;
          dX[k] += Y[k] * (dY[k] - dot);
        }
      }
  });
}

// Log-softmax along the last axis.
template <std::floating_point T>
Tensor<T> log_softmax(const Tensor<T>& x) {
  const std::size_t V = x.shape().back();
  const std::size_t rows = x.numel() / V;
  std::vector<T> out(x.numel());
  auto X = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = X.data() + r * V;
    const T mx = *std::max_element(xr, xr + V);
    T z{0};
    for (std::size_t c = 0; c < V; ++c) z += std::exp(xr[c] - mx);
    const T lse = mx + std::log(z);
    for (std::size_t c = 0; c < V; ++c) out[r * V + c] = xr[c] - lse;
  }
  return detail::make_result<T>(x.shape(), std::move(out), {x}, [rows, V](Node<T>& self) {
    auto& dX = self.parents[0]->ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      T gsum{0};
      for (std::size_t c = 0; c < V; ++c) gsum += self.grad[r * V + c];
      for (std::size_t c = 0; c < V; ++c) {
        const std::size_t k = r * V + c;
        dX[k] += self.grad[k] - std::exp(self.data[k]) * gsum;
      }
    }
  });
}

// Mean over rows of -log softmax(logits)[row, target[row]].
template <std::floating_point T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const TokenId> targets) {
  detail::require_rank("cross_entropy", logits.shape(), 2);
  const std::size_t N = logits.dim(0), V = logits.dim(1);
  if (targets.size() != N) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) + " targets for logits " +
                         shape_str(logits.shape()));
  }
  std::vector<TokenId> tgt(targets.begin(), targets.end());
  for (auto t : tgt)
    if (t < 0 || static_cast<std::size_t>(t) >= V)
      throw IndexError("cross_entropy: target " + std::to_string(t) + " outside vocabulary of " + std::to_string(V));

  std::vector<T> probs(N * V);
  T loss{0};
  auto X = logits.data();
  for (std::size_t r = 0; r < N; ++r) {
    const T* xr = X.data() + r * V;
    const T mx = *std::max_element(xr, xr + V);
    T z{0};
    for (std::size_t c = 0; c < V; ++c) {
      probs[r * V + c] = std::exp(xr[c] - mx);
      z += probs[r * V + c];
    }
    for (std::size_t c = 0; c < V; ++c) probs[r * V + c] /= z;
    loss += -(xr[tgt[r]] - mx - std::log(z));
  }
  loss /= static_cast<T>(N);
  return detail::make_result<T>(
      {1}, {loss}, {logits}, [N, V, tgt = std::move(tgt), probs = std::move(probs)](Node<T>& self) {
        auto& dX = self.parents[0]->ensure_grad();
        const T g = self.grad[0] / static_cast<T>(N);
        for (std::size_t r = 0; r < N; ++r) {
          for (std::size_t c = 0; c < V; ++c) dX[r * V + c] += g * probs[r * V + c];
          dX[r * V + static_cast<std::size_t>(tgt[r])] -= g;
        }
      });
}

// Rotary position embedding on x[T, head_dim]: feature pairs (2i, 2i+1) are
// rotated by positions[t] * base^(-2i/head_dim).
template <std::floating_point T>
Tensor<T> rope(const Tensor<T>& x, std::span<const std::size_t> positions, T base = static_cast<T>(kRopeBase)) {
  detail::require_rank("rope", x.shape(), 2);
  const std::size_t rows = x.dim(0), hd = x.dim(1);
  if (hd % 2 != 0) throw DimensionError("rope: head dimension must be even, got " + shape_str(x.shape()));
  if (positions.size() != rows) throw DimensionError("rope: positions do not match rows of " + shape_str(x.shape()));

  std::vector<T> cos_t(rows * hd / 2), sin_t(rows * hd / 2);
  for (std::size_t t = 0; t < rows; ++t)
    for (std::size_t i = 0; i < hd / 2; ++i) {
      const double freq = std::pow(static_cast<double>(base), -2.0 * static_cast<double>(i) / static_cast<double>(hd));
      const double angle = static_cast<double>(positions[t]) * freq;
      cos_t[t * hd / 2 + i] = static_cast<T>(std::cos(angle));
      sin_t[t * hd / 2 + i] = static_cast<T>(std::sin(angle));
    }
  std::vector<T> out(x.numel());
  auto X = x.data();
  for (std::size_t t = 0; t < rows; ++t)
    for (std::size_t i = 0; i < hd / 2; ++i) {
      const T c = cos_t[t * hd / 2 + i], s = sin_t[t * hd / 2 + i];
      const T x0 = X[t * hd + 2 * i], x1 = X[t * hd + 2 * i + 1];
      out[t * hd + 2 * i] = x0 * c - x1 * s;
      out[t * hd + 2 * i + 1] = x0 * s + x1 * c;
    }
  return detail::make_result<T>(
      x.shape(), std::move(out), {x},
      [rows, hd, cos_t = std::move(cos_t), sin_t = std::move(sin_t)](Node<T>& self) {
        auto& dX = self.parents[0]->ensure_grad();
        for (std::size_t t = 0; t < rows; ++t)
          for (std::size_t i = 0; i < hd / 2; ++i) {
            const T c = cos_t[t * hd / 2 + i], s = sin_t[t * hd / 2 + i];
            const T g0 = self.grad[t * hd + 2 * i], g1 = self.grad[t * hd + 2 * i + 1];
            dX[t * hd + 2 * i] += g0 * c + g1 * s;
            dX[t * hd + 2 * i + 1] += -g0 * s + g1 * c;
          }
      });
}

// Row lookup: out[i] = table[ids[i]]. Used for token embeddings and row selection.
template <std::floating_point T>
Tensor<T> gather_rows(const Tensor<T>& table, std::span<const TokenId> ids) {
  detail::require_rank("gather_rows", table.shape(), 2);
  const std::size_t R = table.dim(0), D = table.dim(1);
  std::vector<TokenId> idx(ids.begin(), ids.end());
  if (idx.empty()) throw DimensionError("gather_rows: empty index list");
  std::vector<T> out(idx.size() * D);
  auto X = table.data();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || static_cast<std::size_t>(idx[i]) >= R)
      throw IndexError("index " + std::to_string(idx[i]) + " outside [0, " + std::to_string(R) + ")");
    std::copy_n(X.data() + static_cast<std::size_t>(idx[i]) * D, D, out.data() + i * D);
  }
  const std::size_t n = idx.size();
  return detail::make_result<T>({n, D}, std::move(out), {table}, [D, idx = std::move(idx)](Node<T>& self) {
    auto& dT = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < D; ++j) dT[static_cast<std::size_t>(idx[i]) * D + j] += self.grad[i * D + j];
  });
}

// Rectangular block x[r0:r0+nr, c0:c0+nc] of a matrix.
template <std::floating_point T>
Tensor<T> slice(const Tensor<T>& x, std::size_t r0, std::size_t nr, std::size_t c0, std::size_t nc) {
  detail::require_rank("slice", x.shape(), 2);
  const std::size_t R = x.dim(0), C = x.dim(1);
  if (r0 + nr > R || c0 + nc > C || nr == 0 || nc == 0) {
    throw IndexError("slice out of bounds for " + shape_str(x.shape()));
  }
  std::vector<T> out(nr * nc);
  auto X = x.data();
  for (std::size_t i = 0; i < nr; ++i) std::copy_n(X.data() + (r0 + i) * C + c0, nc, out.data() + i * nc);
  return detail::make_result<T>({nr, nc}, std::move(out), {x}, [r0, nr, c0, nc, C](Node<T>& self) {
    auto& dX = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < nr; ++i)
      for (std::size_t j = 0; j < nc; ++j) dX[(r0 + i) * C + c0 + j] += self.grad[i * nc + j];
  });
}

// Horizontal concatenation of matrices with equal row counts.
template <std::floating_point T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t R = parts[0].dim(0);
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    detail::require_rank("concat_cols", p.shape(), 2);
    if (p.dim(0) != R)
      throw DimensionError("concat_cols: row mismatch " + shape_str(parts[0].shape()) + " vs " + shape_str(p.shape()));
    widths.push_back(p.dim(1));
  }
  const std::size_t C = std::accumulate(widths.begin(), widths.end(), std::size_t{0});
  std::vector<T> out(R * C);
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto P = parts[k].data();
    for (std::size_t i = 0; i < R; ++i) std::copy_n(P.data() + i * widths[k], widths[k], out.data() + i * C + off);
    off += widths[k];
  }
  return detail::make_result<T>({R, C}, std::move(out), parts, [R, C, widths](Node<T>& self) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < widths.size(); ++k) {
      if (auto* d = detail::grad_of(self, k))
        for (std::size_t i = 0; i < R; ++i)
          for (std::size_t j = 0; j < widths[k]; ++j) (*d)[i * widths[k] + j] += self.grad[i * C + off + j];
      off += widths[k];
    }
  });
}

// Vertical concatenation of matrices with equal column counts.
template <std::floating_point T>
Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const std::size_t C = parts[0].dim(1);
  std::vector<std::size_t> offsets;
  std::size_t R = 0;
  for (const auto& p : parts) {
    detail::require_rank("concat_rows", p.shape(), 2);
    if (p.dim(1) != C)
      throw DimensionError("concat_rows: column mismatch " + shape_str(parts[0].shape()) + " vs " + shape_str(p.shape()));
    offsets.push_back(R * C);
    R += p.dim(0);
  }
  std::vector<T> out;
  out.reserve(R * C);
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  return detail::make_result<T>({R, C}, std::move(out), parts, [offsets](Node<T>& self) {
    for (std::size_t k = 0; k < offsets.size(); ++k)
      if (auto* d = detail::grad_of(self, k))
        for (std::size_t i = 0; i < d->size(); ++i) (*d)[i] += self.grad[offsets[k] + i];
  });
}

// Adds -inf to scores[i, j] wherever key_positions[j] > query_positions[i].
template <std::floating_point T>
Tensor<T> causal_mask(const Tensor<T>& scores, std::span<const std::size_t> query_positions,
                      std::span<const std::size_t> key_positions) {
  detail::require_rank("causal_mask", scores.shape(), 2);
  const std::size_t Tq = scores.dim(0), Tk = scores.dim(1);
  if (query_positions.size() != Tq || key_positions.size() != Tk) {
    throw DimensionError("causal_mask: positions do not match scores " + shape_str(scores.shape()));
  }
  std::vector<T> out(scores.data().begin(), scores.data().end());
  std::vector<bool> keep(Tq * Tk);
  for (std::size_t i = 0; i < Tq; ++i)
    for (std::size_t j = 0; j < Tk; ++j) {
      keep[i * Tk + j] = key_positions[j] <= query_positions[i];
      if (!keep[i * Tk + j]) out[i * Tk + j] = -std::numeric_limits<T>::infinity();
    }
  return detail::make_result<T>(scores.shape(), std::move(out), {scores}, [keep = std::move(keep)](Node<T>& self) {
    auto& d = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < d.size(); ++i)
      if (keep[i]) d[i] += self.grad[i];
  });
}

}  // namespace mllm
