#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "mllm/ops.hpp"
#include "support/finite_difference.hpp"

using namespace mllm;
using mllm::testing::check_op;

namespace {

using T64 = Tensor<double>;

T64 random_tensor(Shape shape, std::uint64_t seed, bool grad = true, double sd = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, sd);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = dist(rng);
  return T64::from(std::move(shape), std::move(v), grad);
}

void expect_grad_ok(const mllm::testing::GradCheckStats& s) {
  EXPECT_LT(s.max_rel, 1e-4);
  EXPECT_LT(s.median_rel, 1e-6);
}

}  // namespace

TEST(Tensor, RejectsInconsistentShapes) {
  EXPECT_THROW(T64::from({2, 3}, std::vector<double>(5)), DimensionError);
  EXPECT_THROW(T64::from({0, 3}, {}), DimensionError);
}

TEST(Tensor, BackwardTwiceIsAnError) {
  auto a = random_tensor({2, 2}, 1);
  auto s = sum(a);
  s.backward();
  EXPECT_THROW(s.backward(), std::logic_error);
}

TEST(Matmul, IdentityAndHandExample) {
  auto a = random_tensor({3, 3}, 2, false);
  auto eye = T64::from({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  auto r = matmul(a, eye);
  for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(r[i], a[i]);

  auto x = T64::from({2, 2}, {1, 2, 3, 4});
  auto y = T64::from({2, 1}, {1, 1});
  auto z = matmul(x, y);
  EXPECT_EQ(z.shape(), (Shape{2, 1}));
  EXPECT_EQ(z[0], 3);
  EXPECT_EQ(z[1], 7);
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  try {
    matmul(random_tensor({2, 3}, 1), random_tensor({4, 2}, 2));
    FAIL();
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2,3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[4,2]"), std::string::npos) << msg;
  }
}

TEST(Matmul, GradientOfSumMatchesFiniteDifferences) {
  auto a = random_tensor({4, 5}, 3);
  auto b = random_tensor({5, 3}, 4);
  sum(matmul(a, b)).backward();
  std::vector<double> analytic(a.grad().begin(), a.grad().end());
  auto numeric = mllm::testing::numeric_gradient(a.mutable_data(), [&] { return sum(matmul(a, b)).item(); });
  auto s = mllm::testing::compare_gradients(analytic, numeric);
  EXPECT_LT(s.max_rel, 1e-6);
}

TEST(Softmax, UniformAndShiftInvariant) {
  auto z = softmax(T64::zeros({1, 4}), 1);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(z[i], 0.25);

  auto x = random_tensor({3, 6}, 5, false);
  std::vector<double> shifted(x.data().begin(), x.data().end());
  for (auto& v : shifted) v += 123.0;
  auto a = softmax(x, 1);
  auto b = softmax(T64::from({3, 6}, shifted), 1);
  for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_NEAR(a[i], b[i], 1e-6);
}

TEST(Softmax, IsADistributionAlongAnyAxis) {
  auto x = random_tensor({3, 4, 5}, 6, false, 10.0);
  for (std::size_t axis = 0; axis < 3; ++axis) {
    auto p = softmax(x, axis);
    const auto L = detail::axis_layout(x.shape(), axis);
    for (std::size_t o = 0; o < L.outer; ++o)
      for (std::size_t in = 0; in < L.inner; ++in) {
        double s = 0;
        for (std::size_t i = 0; i < L.len; ++i) {
          const double v = p[o * L.len * L.inner + i * L.inner + in];
          EXPECT_GE(v, 0.0);
          s += v;
        }
        EXPECT_NEAR(s, 1.0, 1e-6);
      }
  }
  EXPECT_THROW(softmax(x, 3), IndexError);
}

TEST(Silu, ZeroAtZero) { EXPECT_EQ(silu(T64::zeros({1}))[0], 0.0); }

TEST(Rope, IdentityAtPositionZero) {
  auto x = random_tensor({1, 8}, 7, false);
  const std::size_t pos[] = {0};
  auto r = rope(x, std::span<const std::size_t>(pos));
  for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(r[i], x[i]);
  EXPECT_THROW(rope(random_tensor({1, 7}, 1), std::span<const std::size_t>(pos)), DimensionError);
}

TEST(Rope, PreservesPairNorms) {
  auto x = random_tensor({3, 6}, 8, false);
  const std::size_t pos[] = {5, 17, 250};
  auto r = rope(x, std::span<const std::size_t>(pos));
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t i = 0; i < 3; ++i) {
      const std::size_t k = t * 6 + 2 * i;
      EXPECT_NEAR(std::hypot(r[k], r[k + 1]), std::hypot(x[k], x[k + 1]), 1e-12);
    }
}

TEST(CrossEntropy, UniformLogitsGiveLogV) {
  const std::size_t V = 13;
  const TokenId targets[] = {0, 4, 12};
  auto ce = cross_entropy(T64::zeros({3, V}), std::span<const TokenId>(targets));
  EXPECT_NEAR(ce.item(), std::log(13.0), 1e-12);
  const TokenId bad[] = {0, 13, 1};
  EXPECT_THROW(cross_entropy(T64::zeros({3, V}), std::span<const TokenId>(bad)), IndexError);
}

TEST(RmsNorm, ScaleInvariant) {
  auto x = random_tensor({4, 8}, 9, false, 10.0);
  auto gain = random_tensor({8}, 10, false);
  std::vector<double> scaled(x.data().begin(), x.data().end());
  for (auto& v : scaled) v *= 37.5;
  auto a = rmsnorm(x, gain);
  auto b = rmsnorm(T64::from({4, 8}, scaled), gain);
  for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_NEAR(a[i], b[i], 1e-5);
  EXPECT_THROW(rmsnorm(x, random_tensor({7}, 1)), DimensionError);
}

TEST(GradCheck, MatmulTransposeReshape) {
  expect_grad_ok(check_op({random_tensor({3, 5}, 1), random_tensor({5, 4}, 2)},
                          [](auto& in) { return matmul(in[0], in[1]); }));
  expect_grad_ok(check_op({random_tensor({3, 5}, 3)}, [](auto& in) { return transpose(in[0]); }));
  expect_grad_ok(check_op({random_tensor({4, 6}, 4)}, [](auto& in) { return reshape(in[0], {2, 12}); }));
}

TEST(GradCheck, Elementwise) {
  expect_grad_ok(check_op({random_tensor({4, 4}, 5), random_tensor({4, 4}, 6)},
                          [](auto& in) { return add(in[0], in[1]); }));
  expect_grad_ok(check_op({random_tensor({4, 4}, 7), random_tensor({4, 4}, 8)},
                          [](auto& in) { return sub(in[0], in[1]); }));
  expect_grad_ok(check_op({random_tensor({4, 4}, 9), random_tensor({4, 4}, 10)},
                          [](auto& in) { return mul(in[0], in[1]); }));
  expect_grad_ok(check_op({random_tensor({4, 4}, 11)}, [](auto& in) { return scale(in[0], 2.5); }));
  expect_grad_ok(check_op({random_tensor({8, 8}, 12, true, 3.0)}, [](auto& in) { return silu(in[0]); }));
  expect_grad_ok(check_op({random_tensor({3, 4}, 13)}, [](auto& in) { return mean(in[0]); }));
}

TEST(GradCheck, Normalizers) {
  for (std::size_t axis = 0; axis < 2; ++axis)
    expect_grad_ok(check_op({random_tensor({5, 6}, 14)}, [axis](auto& in) { return softmax(in[0], axis); }));
  expect_grad_ok(check_op({random_tensor({5, 6}, 15)}, [](auto& in) { return log_softmax(in[0]); }));
  expect_grad_ok(check_op({random_tensor({5, 8}, 16), random_tensor({8}, 17)},
                          [](auto& in) { return rmsnorm(in[0], in[1]); }));
  const TokenId targets[] = {1, 0, 5, 2};
  expect_grad_ok(check_op({random_tensor({4, 6}, 18)}, [&](auto& in) {
    return cross_entropy(in[0], std::span<const TokenId>(targets));
  }));
}

TEST(GradCheck, IndexingOps) {
  const std::size_t pos[] = {0, 3, 4, 9};
  expect_grad_ok(check_op({random_tensor({4, 8}, 19)}, [&](auto& in) {
    return rope(in[0], std::span<const std::size_t>(pos));
  }));
  const TokenId ids[] = {2, 0, 2, 5};
  expect_grad_ok(check_op({random_tensor({6, 3}, 20)}, [&](auto& in) {
    return gather_rows(in[0], std::span<const TokenId>(ids));
  }));
  expect_grad_ok(check_op({random_tensor({6, 5}, 21)}, [](auto& in) { return slice(in[0], 1, 3, 2, 2); }));
  expect_grad_ok(check_op({random_tensor({3, 2}, 22), random_tensor({3, 4}, 23)},
                          [](auto& in) { return concat_cols(std::vector<T64>{in[0], in[1]}); }));
  expect_grad_ok(check_op({random_tensor({2, 3}, 24), random_tensor({4, 3}, 25)},
                          [](auto& in) { return concat_rows(std::vector<T64>{in[0], in[1]}); }));
  const std::size_t q[] = {2, 3}, k[] = {0, 1, 2, 3};
  expect_grad_ok(check_op({random_tensor({2, 4}, 26)}, [&](auto& in) {
    return softmax(causal_mask(in[0], std::span<const std::size_t>(q), std::span<const std::size_t>(k)), 1);
  }));
}

TEST(Autodiff, SharedInputsAccumulate) {
  // d/dx sum(x*x + x) = 2x + 1, with x reached through three paths.
  auto x = random_tensor({2, 3}, 27);
  sum(add(mul(x, x), x)).backward();
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_NEAR(x.grad()[i], 2 * x[i] + 1, 1e-12);
}

TEST(Autodiff, DeterministicGradients) {
  auto run = [] {
    auto a = random_tensor({6, 6}, 28);
    auto b = random_tensor({6, 6}, 29);
    sum(mul(softmax(matmul(a, b), 1), b)).backward();
    return std::vector<double>(a.grad().begin(), a.grad().end());
  };
  EXPECT_EQ(run(), run());
}

TEST(Autodiff, ConstantsDoNotJoinTheTape) {
  auto a = random_tensor({2, 2}, 30, false);
  auto r = matmul(a, a);
  EXPECT_FALSE(r.requires_grad());
  EXPECT_THROW(sum(r).backward(), std::logic_error);
}
