#pragma once

// Perplexity and length-normalized multiple-choice scoring over anything that
// can report per-token conditional log-likelihoods.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <span>
#include <vector>

#include "mllm/errors.hpp"
#include "mllm/model.hpp"
#include "mllm/ops.hpp"

namespace mllm {

// token_log_probs(seq)[i] = log p(seq[i+1] | seq[0..i]); seq fits the window.
template <typename S>
concept SequenceScorer = requires(const S& s, std::span<const TokenId> seq) {
  { s.token_log_probs(seq) } -> std::same_as<std::vector<double>>;
  { s.window() } -> std::convertible_to<std::size_t>;
};

template <std::floating_point T>
class ModelScorer {
 public:
  explicit ModelScorer(const Model<T>& model) : model_(&model) {}

  std::size_t window() const { return model_->config().context_len; }

  std::vector<double> token_log_probs(std::span<const TokenId> seq) const {
    if (seq.size() < 2) return {};
    auto logp = log_softmax(forward_sequence(*model_, seq.first(seq.size() - 1)));
    const std::size_t V = model_->config().vocab_size;
    std::vector<double> out(seq.size() - 1);
    for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
      const auto next = seq[i + 1];
      if (next < 0 || static_cast<std::size_t>(next) >= V) throw IndexError("token outside vocabulary");
      out[i] = static_cast<double>(logp[i * V + static_cast<std::size_t>(next)]);
    }
    return out;
  }

 private:
  const Model<T>* model_;
};

struct NllTotal {
  double nll = 0;
  std::size_t count = 0;
};

// Negative log-likelihood of every token after the first. Streams longer than
// the window are split into windows that overlap by one token so each token
// is predicted exactly once.
template <SequenceScorer S>
NllTotal stream_nll(const S& scorer, std::span<const TokenId> tokens) {
  if (tokens.size() < 2) throw LengthError("perplexity needs at least 2 tokens");
  const std::size_t w = scorer.window();
  if (w < 2) throw LengthError("scoring window must hold at least 2 tokens");
  NllTotal total;
  for (std::size_t start = 0; start + 1 < tokens.size(); start += w - 1) {
    const std::size_t len = std::min(w, tokens.size() - start);
    for (double lp : scorer.token_log_probs(tokens.subspan(start, len))) {
      total.nll -= lp;
      ++total.count;
    }
  }
  return total;
}

template <SequenceScorer S>
double perplexity(const S& scorer, std::span<const TokenId> tokens) {
  auto t = stream_nll(scorer, tokens);
  return std::exp(t.nll / static_cast<double>(t.count));
}

// Corpus perplexity over independent documents.
template <SequenceScorer S>
double perplexity(const S& scorer, const std::vector<std::vector<TokenId>>& streams) {
  NllTotal all;
  for (const auto& s : streams) {
    auto t = stream_nll(scorer, std::span<const TokenId>(s));
    all.nll += t.nll;
    all.count += t.count;
  }
  if (all.count == 0) throw LengthError("perplexity: no tokens");
  return std::exp(all.nll / static_cast<double>(all.count));
}

template <std::floating_point T>
double perplexity(const Model<T>& model, std::span<const TokenId> tokens) {
  return perplexity(ModelScorer<T>(model), tokens);
}

struct McResult {
  std::size_t best = 0;
  std::vector<double> scores;  // mean log-likelihood per choice token
};

// Index of the highest score; ties go to the lowest index.
inline std::size_t pick_choice(std::span<const double> scores) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = i;
  return best;
}

template <SequenceScorer S>
McResult mc_score(const S& scorer, std::span<const TokenId> context, const std::vector<std::vector<TokenId>>& choices) {
  if (context.empty()) throw ValueError("mc_score: empty context");
  if (choices.empty()) throw ValueError("mc_score: no choices");
  McResult r;
  for (const auto& choice : choices) {
    if (choice.empty()) throw ValueError("mc_score: empty choice");
    std::vector<TokenId> seq(context.begin(), context.end());
    seq.insert(seq.end(), choice.begin(), choice.end());
    if (seq.size() > scorer.window()) throw LengthError("mc_score: context + choice exceeds the window");
    auto lp = scorer.token_log_probs(seq);
    double s = 0;
    for (std::size_t i = context.size() - 1; i < lp.size(); ++i) s += lp[i];
    r.scores.push_back(s / static_cast<double>(choice.size()));
  }
  r.best = pick_choice(r.scores);
  return r;
}

template <std::floating_point T>
McResult mc_score(const Model<T>& model, std::span<const TokenId> context,
                  const std::vector<std::vector<TokenId>>& choices) {
  return mc_score(ModelScorer<T>(model), context, choices);
}

}  // namespace mllm
