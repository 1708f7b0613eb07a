#pragma once

// Pretraining loop pieces: cosine schedule with linear warmup, Adam with
// decoupled weight decay, global-norm clipping and logit distillation.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "mllm/errors.hpp"
#include "mllm/model.hpp"
#include "mllm/ops.hpp"

namespace mllm {

struct TrainPlan {
  double peak_lr = 2e-3;
  double weight_decay = 0.1;
  std::size_t total_steps = 1000;
  std::size_t warmup_steps = 20;
  std::size_t batch_size = 8;
  std::size_t seq_len = 64;
  double grad_clip = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double adam_eps = 1e-8;
  std::optional<std::string> kd_teacher;  // checkpoint path
  double kd_weight = 1.0;                 // objective = CE + kd_weight * KD
  std::uint64_t seed = 0;

  // Warmup of 2% of the run, at least one step when the run is long enough.
  static std::size_t default_warmup(std::size_t total_steps) {
    return total_steps > 1 ? std::max<std::size_t>(1, total_steps / 50) : 0;
  }
};

inline void validate_plan(const TrainPlan& p) {
  if (p.total_steps > 0 && p.warmup_steps >= p.total_steps) throw ConfigError("warmup_steps must be < total_steps");
  if (!(p.peak_lr >= 0) || !(p.weight_decay >= 0) || !(p.grad_clip > 0) || !(p.adam_eps > 0))
    throw ConfigError("learning rate, weight decay, clip and eps must be non-negative / positive");
  if (p.batch_size == 0 || p.seq_len < 2) throw ConfigError("batch_size must be >= 1 and seq_len >= 2");
}

// Linear warmup 0 -> peak over warmup_steps, then cosine decay to 0 at total_steps.
inline double lr_at(const TrainPlan& p, std::size_t step) {
  if (step > p.total_steps) {
    throw IndexError("lr_at: step " + std::to_string(step) + " outside [0, " + std::to_string(p.total_steps) + "]");
  }
  if (step < p.warmup_steps) return p.peak_lr * static_cast<double>(step) / static_cast<double>(p.warmup_steps);
  const double span = static_cast<double>(p.total_steps - p.warmup_steps);
  if (span == 0) return p.peak_lr;
  const double progress = static_cast<double>(step - p.warmup_steps) / span;
  return p.peak_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

// Mean over positions of the cross-entropy between teacher and student
// distributions: -(1/n) sum_i sum_c p_teacher(c|i) log p_student(c|i).
// The teacher is treated as a constant.
template <std::floating_point T>
Tensor<T> kd_loss(const Tensor<T>& teacher_logits, const Tensor<T>& student_logits) {
  detail::require_same_shape("kd_loss", teacher_logits.shape(), student_logits.shape());
  const std::size_t V = student_logits.shape().back();
  const std::size_t n = student_logits.numel() / V;
  auto teacher_probs = softmax(teacher_logits.detach(), teacher_logits.rank() - 1).detach();
  auto weighted = mul(teacher_probs, log_softmax(student_logits));
  return scale(sum(weighted), T{-1} / static_cast<T>(n));
}

template <std::floating_point T>
class AdamW {
 public:
  explicit AdamW(const Model<T>& model) {
    for (const auto& p : model.parameters()) {
      m_.emplace_back(p.tensor.numel(), 0.0);
      v_.emplace_back(p.tensor.numel(), 0.0);
    }
  }

  std::size_t steps_taken() const { return t_; }

  // Decoupled decay: p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + wd * p).
  void step(Model<T>& model, const TrainPlan& plan, double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(plan.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(plan.beta2, static_cast<double>(t_));
    auto params = model.parameters();
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto& t = params[k].tensor;
      auto data = t.mutable_data();
      auto grad = t.grad();
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < data.size(); ++i) {
        const double g = grad.empty() ? 0.0 : static_cast<double>(grad[i]);
        m[i] = plan.beta1 * m[i] + (1.0 - plan.beta1) * g;
        v[i] = plan.beta2 * v[i] + (1.0 - plan.beta2) * g * g;
        const double update = (m[i] / bc1) / (std::sqrt(v[i] / bc2) + plan.adam_eps) +
                              plan.weight_decay * static_cast<double>(data[i]);
        data[i] = static_cast<T>(static_cast<double>(data[i]) - lr * update);
      }
    }
  }

 private:
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

// Scales all gradients so their global L2 norm is at most max_norm. Returns
// the norm before clipping.
template <std::floating_point T>
double clip_grad_norm(Model<T>& model, double max_norm) {
  double sq = 0;
  auto params = model.parameters();
  for (const auto& p : params)
    for (auto g : p.tensor.grad()) sq += static_cast<double>(g) * static_cast<double>(g);
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double f = max_norm / norm;
    for (auto& p : params)
      if (p.tensor.has_grad())
        for (auto& g : p.tensor.mutable_grad()) g = static_cast<T>(static_cast<double>(g) * f);
  }
  return norm;
}

struct StepResult {
  double loss = 0;  // total objective
  double lm = 0;    // label cross-entropy part
  double kd = 0;    // distillation part (0 without a teacher)
  double lr = 0;
  double grad_norm = 0;
};

// Label cross-entropy (plus kd_weight * distillation when a teacher is given).
template <std::floating_point T>
Tensor<T> training_objective(const Model<T>& model, const TokenBatch& batch, const Model<T>* teacher,
                             double kd_weight, double* lm_part = nullptr, double* kd_part = nullptr) {
  if (!teacher) {
    auto loss = lm_loss(model, batch);
    if (lm_part) *lm_part = loss.item();
    return loss;
  }
  if (teacher->config().vocab_size != model.config().vocab_size) {
    throw ConfigError("teacher and student vocabularies differ");
  }
  auto student_logits = detail::forward_2d(model, batch);
  auto teacher_logits = detail::forward_2d(*teacher, batch).detach();
  std::vector<TokenId> rows, targets;
  for (std::size_t b = 0; b < batch.batch; ++b)
    for (std::size_t t = 0; t + 1 < batch.seq; ++t) {
      rows.push_back(static_cast<TokenId>(b * batch.seq + t));
      targets.push_back(batch.at(b, t + 1));
    }
  auto ce = cross_entropy(gather_rows(student_logits, rows), targets);
  auto kd = kd_loss(teacher_logits, student_logits);
  if (lm_part) *lm_part = ce.item();
  if (kd_part) *kd_part = kd.item();
  return add(ce, scale(kd, static_cast<T>(kd_weight)));
}

template <std::floating_point T>
StepResult train_step(Model<T>& model, const TokenBatch& batch, const TrainPlan& plan, AdamW<T>& opt,
                      std::size_t step, const Model<T>* teacher = nullptr) {
  if (batch.batch != plan.batch_size || batch.seq != plan.seq_len) {
    throw DimensionError("train_step: batch shape [" + std::to_string(batch.batch) + "," + std::to_string(batch.seq) +
                         "] does not match plan [" + std::to_string(plan.batch_size) + "," +
                         std::to_string(plan.seq_len) + "]");
  }
  StepResult r;
  r.lr = lr_at(plan, step);
  model.zero_grad();
  auto loss = training_objective(model, batch, teacher, plan.kd_weight, &r.lm, &r.kd);
  r.loss = loss.item();
  if (!std::isfinite(r.loss)) {
    throw std::runtime_error("non-finite loss " + std::to_string(r.loss) + " at step " + std::to_string(step) +
                             " (lr " + std::to_string(r.lr) + ")");
  }
  loss.backward();
  r.grad_norm = clip_grad_norm(model, plan.grad_clip);
  opt.step(model, plan, r.lr);
  return r;
}

}  // namespace mllm
