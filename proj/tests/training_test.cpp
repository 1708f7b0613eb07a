#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "mllm/data.hpp"
#include "mllm/training.hpp"
#include "support/finite_difference.hpp"
#include "support/toy.hpp"

using namespace mllm;
using mllm::testing::random_batch;
using mllm::testing::tiny_config;
using T64 = Tensor<double>;

namespace {

TrainPlan small_plan(std::size_t steps, std::size_t batch, std::size_t seq) {
  TrainPlan p;
  p.total_steps = steps;
  p.warmup_steps = TrainPlan::default_warmup(steps);
  p.batch_size = batch;
  p.seq_len = seq;
  return p;
}

std::vector<double> snapshot(const Model<float>& m) {
  std::vector<double> out;
  for (const auto& p : m.parameters()) out.insert(out.end(), p.tensor.data().begin(), p.tensor.data().end());
  return out;
}

T64 random_logits(Shape shape, std::uint64_t seed, double sd = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, sd);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = d(rng);
  return T64::from(std::move(shape), std::move(v), true);
}

}  // namespace

TEST(LrSchedule, Endpoints) {
  auto p = small_plan(1000, 1, 2);
  EXPECT_EQ(p.warmup_steps, 20u);
  EXPECT_DOUBLE_EQ(lr_at(p, 0), 0.0);
  EXPECT_DOUBLE_EQ(lr_at(p, 10), 1e-3);
  EXPECT_DOUBLE_EQ(lr_at(p, p.warmup_steps), 2e-3);
  EXPECT_NEAR(lr_at(p, 1000), 0.0, 1e-18);
  EXPECT_NEAR(lr_at(p, 510), 1e-3, 1e-9);
  EXPECT_THROW(lr_at(p, 1001), IndexError);
  for (std::size_t s = p.warmup_steps + 1; s <= 1000; ++s) EXPECT_LE(lr_at(p, s), lr_at(p, s - 1));
}

TEST(Plan, Validation) {
  auto p = small_plan(10, 1, 4);
  EXPECT_NO_THROW(validate_plan(p));
  p.warmup_steps = 10;
  EXPECT_THROW(validate_plan(p), ConfigError);
  p = small_plan(10, 1, 4);
  p.peak_lr = -1;
  EXPECT_THROW(validate_plan(p), ConfigError);
}

TEST(KdLoss, DegenerateTeacherIsCrossEntropy) {
  const std::size_t V = 7;
  const std::vector<TokenId> targets{3, 0, 6, 2};
  std::vector<double> t(4 * V, -60.0);
  for (std::size_t i = 0; i < 4; ++i) t[i * V + static_cast<std::size_t>(targets[i])] = 60.0;
  auto student = random_logits({4, V}, 1);
  const double kd = kd_loss(T64::from({4, V}, t), student).item();
  const double ce = cross_entropy(student, std::span<const TokenId>(targets)).item();
  EXPECT_NEAR(kd, ce, 1e-5);
}

TEST(KdLoss, UniformIsLogV) {
  auto z = T64::zeros({2, 3, 11});
  EXPECT_NEAR(kd_loss(z, z).item(), std::log(11.0), 1e-12);
  EXPECT_THROW(kd_loss(T64::zeros({2, 3}), T64::zeros({3, 2})), DimensionError);
}

TEST(KdLoss, BoundedBelowByTeacherEntropy) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto teacher = random_logits({3, 5}, seed, 2.0);
    auto student = random_logits({3, 5}, seed + 100, 2.0);
    const double self = kd_loss(teacher, teacher).item();
    auto p = softmax(teacher, 1);
    double entropy = 0;
    for (auto v : p.data()) entropy -= v * std::log(v);
    entropy /= 3;
    EXPECT_NEAR(self, entropy, 1e-12);
    EXPECT_GT(kd_loss(teacher, student).item(), entropy);
  }
}

TEST(KdLoss, StudentGradientMatchesFiniteDifferences) {
  const auto teacher = random_logits({2, 3, 6}, 5).detach();
  auto s = mllm::testing::check_op({random_logits({2, 3, 6}, 6)},
                                   [&](auto& in) { return kd_loss(teacher, in[0]); });
  EXPECT_LT(s.max_rel, 1e-4);
  EXPECT_LT(s.median_rel, 1e-6);
}

TEST(AdamW, ZeroLearningRateIsANoOp) {
  auto c = tiny_config();
  auto m = Model<float>::init(c, 1);
  const auto before = snapshot(m);
  auto plan = small_plan(10, 2, 8);
  plan.peak_lr = 0;
  AdamW<float> opt(m);
  for (std::size_t s = 0; s < 3; ++s) train_step(m, random_batch(2, 8, c.vocab_size, s), plan, opt, s);
  EXPECT_EQ(snapshot(m), before);
}

TEST(AdamW, DecoupledDecayShrinksMultiplicatively) {
  auto c = tiny_config();
  auto m = Model<double>::init(c, 2);
  std::vector<double> before;
  for (const auto& p : m.parameters()) before.insert(before.end(), p.tensor.data().begin(), p.tensor.data().end());
  TrainPlan plan;
  plan.weight_decay = 0.1;
  AdamW<double> opt(m);
  const double lr = 0.01;
  m.zero_grad();
  for (int s = 0; s < 3; ++s) opt.step(m, plan, lr);
  std::size_t k = 0;
  const double f = std::pow(1.0 - lr * plan.weight_decay, 3);
  for (const auto& p : m.parameters())
    for (auto v : p.tensor.data()) EXPECT_NEAR(v, before[k++] * f, 1e-15);
}

TEST(AdamW, SingleStepThroughHeadMovesTiedEmbedding) {
  auto c = tiny_config();
  auto m = Model<float>::init(c, 3);
  const std::vector<float> before(m.embedding().data().begin(), m.embedding().data().end());
  auto weights = Tensor<float>::full(m.output_head().shape(), 1.0f);
  sum(mul(m.output_head(), weights)).backward();
  TrainPlan plan;
  plan.weight_decay = 0;
  AdamW<float> opt(m);
  opt.step(m, plan, 1e-3);
  double moved = 0;
  for (std::size_t i = 0; i < before.size(); ++i) moved = std::max(moved, std::abs(double(m.embedding()[i]) - before[i]));
  EXPECT_NEAR(moved, 1e-3, 1e-6);
}

TEST(Clip, GlobalNormBounded) {
  auto c = tiny_config();
  auto m = Model<double>::init(c, 4, 1.0);
  lm_loss(m, random_batch(2, 8, c.vocab_size, 1)).backward();
  const double before = clip_grad_norm(m, 0.5);
  EXPECT_GT(before, 0.5);
  double sq = 0;
  for (const auto& p : m.parameters())
    for (auto g : p.tensor.grad()) sq += g * g;
  EXPECT_NEAR(std::sqrt(sq), 0.5, 1e-12);
}

TEST(TrainStep, RejectsMismatchedBatch) {
  auto c = tiny_config();
  auto m = Model<float>::init(c, 5);
  AdamW<float> opt(m);
  auto plan = small_plan(10, 2, 8);
  EXPECT_THROW(train_step(m, random_batch(3, 8, c.vocab_size, 1), plan, opt, 0), DimensionError);
}

TEST(TrainStep, NonFiniteLossAborts) {
  auto c = tiny_config();
  auto m = Model<float>::init(c, 6);
  m.final_norm().mutable_data()[0] = std::numeric_limits<float>::infinity();
  AdamW<float> opt(m);
  auto plan = small_plan(10, 1, 8);
  EXPECT_THROW(train_step(m, random_batch(1, 8, c.vocab_size, 1), plan, opt, 1), std::runtime_error);
}

TEST(TrainStep, SameSeedSameTrajectory) {
  auto run = [] {
    auto c = tiny_config(64, 16, 2);
    auto m = Model<float>::init(c, 7);
    auto plan = small_plan(20, 2, 12);
    AdamW<float> opt(m);
    BatchSampler sampler(mllm::testing::random_batch(1, 500, 64, 8).ids, 2, 12, 9);
    std::vector<double> losses;
    for (std::size_t s = 0; s < 20; ++s) losses.push_back(train_step(m, sampler.next(), plan, opt, s).loss);
    return std::pair(losses, snapshot(m));
  };
  EXPECT_EQ(run(), run());
}

TEST(TrainStep, KdObjectiveAddsTeacherTerm) {
  auto c = tiny_config();
  auto m = Model<double>::init(c, 10);
  auto teacher = Model<double>::init(c, 11, 0.5);
  const auto batch = random_batch(2, 8, c.vocab_size, 3);
  double lm = 0, kd = 0;
  const double total = training_objective(m, batch, &teacher, 0.5, &lm, &kd).item();
  EXPECT_NEAR(lm, lm_loss(m, batch).item(), 1e-12);
  EXPECT_NEAR(total, lm + 0.5 * kd, 1e-12);
  EXPECT_GT(kd, 0.0);
}

TEST(TrainStep, OverfitsASingleBatch) {
  ModelConfig c = tiny_config(256, 64, 2);
  c.context_len = 64;
  auto m = Model<float>::init(c, 12);
  auto plan = small_plan(300, 4, 32);
  AdamW<float> opt(m);
  const auto batch = random_batch(4, 32, 256, 13);
  StepResult r;
  for (std::size_t s = 0; s < plan.total_steps; ++s) r = train_step(m, batch, plan, opt, s);
  EXPECT_LT(lm_loss(m, batch).item(), 0.05);
}

TEST(TrainStep, HeldOutLossFallsOnToyCorpus) {
  ModelConfig c = tiny_config(ByteTokenizer::kVocabSize, 32, 2);
  c.context_len = 32;
  auto m = Model<float>::init(c, 14);
  auto plan = small_plan(200, 4, 32);
  AdamW<float> opt(m);
  BatchSampler train(ByteTokenizer::encode(mllm::testing::toy_corpus(400, 1)), 4, 32, 2);
  BatchSampler held(ByteTokenizer::encode(mllm::testing::toy_corpus(100, 99)), 4, 32, 3);
  std::vector<double> held_loss;
  for (std::size_t s = 0; s < plan.total_steps; ++s) {
    train_step(m, train.next(), plan, opt, s);
    held_loss.push_back(lm_loss(m, held.next()).item());
  }
  const double first = std::accumulate(held_loss.begin(), held_loss.begin() + 50, 0.0) / 50;
  const double last = std::accumulate(held_loss.end() - 50, held_loss.end(), 0.0) / 50;
  EXPECT_LT(last, first - 0.5);
}
