#pragma once

// Text-to-semantic stage: a decoder-only transformer (pre-RMSNorm, rotary
// positions, GELU MLP) over the unified token stream. Predicts target semantic
// tokens from opponent semantics, text, and speaker-prompt semantics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "debatts/autodiff.hpp"
#include "debatts/errors.hpp"
#include "debatts/nn.hpp"
#include "debatts/tokens.hpp"
#include "debatts/transformer.hpp"

namespace debatts {

struct T2SConfig {
  int n_layers = 4;
  int n_heads = 4;
  int d_model = 128;
  int d_ff = 512;
  int max_seq_len = 512;
  int v_sem = 64;
  int v_text = 16;

  UnifiedVocab vocab() const { return UnifiedVocab(v_sem, v_text); }
  int vocab_size() const { return vocab().size(); }

  void validate() const {
    if (n_layers < 0 || n_heads <= 0 || d_model <= 0 || d_ff <= 0 || max_seq_len <= 0)
      throw DomainError("t2s config: sizes must be positive");
    if (d_model % n_heads != 0) throw DomainError("t2s config: d_model must be divisible by n_heads");
    if ((d_model / n_heads) % 2 != 0) throw DomainError("t2s config: head width must be even for rotary embeddings");
  }
};

template <class T>
class T2SModel {
 public:
  T2SModel(const T2SConfig& cfg, std::uint64_t seed) : cfg_(cfg), vocab_(cfg.vocab()) {
    cfg_.validate();
    Rng rng(seed);
    const auto d = static_cast<std::size_t>(cfg_.d_model);
    const auto v = static_cast<std::size_t>(vocab_.size());
    embedding_ = params_.create("tok_embedding", normal_tensor<T>({v, d}, 0.02, rng), false);
    blocks_ = make_blocks(params_, "blocks.", cfg_.n_layers, d, static_cast<std::size_t>(cfg_.d_ff), rng);
    final_norm_ = params_.create("head.norm", Tensor<T>({d}, T(1)), false);
    output_ = make_linear(params_, "head.out", d, v, false, 0.02, rng);
  }

  T2SModel(const T2SModel&) = delete;
  T2SModel& operator=(const T2SModel&) = delete;
  T2SModel(T2SModel&&) noexcept = default;
  T2SModel& operator=(T2SModel&&) noexcept = default;

  const T2SConfig& config() const { return cfg_; }
  const UnifiedVocab& vocab() const { return vocab_; }
  ParameterSet<T>& params() { return params_; }
  const ParameterSet<T>& params() const { return params_; }

  ad::Var<T> embed(std::span<const int> ids) const { return ad::embedding(embedding_, ids); }

  // Output head: final RMSNorm then projection to the unified vocabulary.
  ad::Var<T> head(const ad::Var<T>& x) const { return output_(ad::rms_norm(x, final_norm_)); }

  ad::Var<T> forward(std::span<const int> ids) const {
    const ad::RowSpan one{0, ids.size()};
    return forward_packed(ids, std::span<const ad::RowSpan>(&one, 1));
  }

  // Several sequences concatenated row-wise; each attends only within its span
  // and restarts positions at zero.
  ad::Var<T> forward_packed(std::span<const int> ids, std::span<const ad::RowSpan> spans) const {
    for (const auto& s : spans)
      if (s.length > static_cast<std::size_t>(cfg_.max_seq_len))
        throw LengthError("t2s: sequence length " + std::to_string(s.length) + " exceeds max " +
                          std::to_string(cfg_.max_seq_len));
    return head(run_blocks(blocks_, embed(ids), spans, static_cast<std::size_t>(cfg_.n_heads), true));
  }

 private:
  T2SConfig cfg_;
  UnifiedVocab vocab_;
  ParameterSet<T> params_;
  ad::Var<T> embedding_;
  std::vector<TransformerBlock<T>> blocks_;
  ad::Var<T> final_norm_;
  Linear<T> output_;
};

// Loss graph for one packed batch. Row t of the logits predicts ids[t + 1] of
// the same sequence and counts only where loss_mask[t + 1] holds.
template <class T>
struct T2SLoss {
  ad::Var<T> loss;
  ad::Var<T> logits;
  std::vector<ad::RowSpan> spans;
  std::vector<bool> row_mask;
};

template <class T>
T2SLoss<T> t2s_loss(const T2SModel<T>& model, std::span<const T2SInput> batch) {
  if (batch.empty()) throw DomainError("t2s: empty batch");
  T2SLoss<T> out;
  std::vector<int> ids, targets;
  for (const auto& in : batch) {
    if (!in.has_target) throw StateError("t2s training requires a target region in every batch element");
    if (in.loss_mask.size() != in.ids.size()) throw StateError("t2s: loss mask not aligned to ids");
    out.spans.push_back({ids.size(), in.ids.size()});
    for (std::size_t t = 0; t < in.ids.size(); ++t) {
      ids.push_back(in.ids[t]);
      const bool last = t + 1 == in.ids.size();
      targets.push_back(last ? 0 : in.ids[t + 1]);
      out.row_mask.push_back(!last && in.loss_mask[t + 1]);
    }
  }
  out.logits = model.forward_packed(ids, out.spans);
  out.loss = ad::softmax_cross_entropy(out.logits, std::span<const int>(targets), out.row_mask);
  return out;
}

// One optimizer update. Throws NumericError on a non-finite loss before any
// parameter is touched.
template <class T>
double t2s_train_step(T2SModel<T>& model, std::span<const T2SInput> batch, AdamW<T>& opt, double lr) {
  auto l = t2s_loss(model, batch);
  const double loss = static_cast<double>(l.loss.item());
  if (!std::isfinite(loss)) {
    model.params().zero_grad();
    throw NumericError("t2s: non-finite training loss");
  }
  l.loss.backward();
  opt.step(lr);
  return loss;
}

template <class T>
double t2s_train_step(T2SModel<T>& model, std::span<const T2SInput> batch, AdamW<T>& opt) {
  return t2s_train_step(model, batch, opt, opt.config().lr);
}

struct SamplingConfig {
  enum class Mode { greedy, top_k };
  Mode mode = Mode::top_k;
  int k = 10;
  double temperature = 0.8;
  std::uint64_t seed = 0;
  int max_new_tokens = 256;

  static SamplingConfig greedy(int max_new_tokens = 256) {
    SamplingConfig s;
    s.mode = Mode::greedy;
    s.max_new_tokens = max_new_tokens;
    return s;
  }
};

struct GenerationRequest {
  SemanticSequence s_op;
  TextSequence text;
  SemanticSequence s_prompt;
};

namespace detail {

// Index of the largest value; the lowest index wins ties.
template <class T>
int argmax_lowest(std::span<const T> v) {
  int best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  return best;
}

template <class T>
int sample_next(std::span<const T> logits, const UnifiedVocab& vocab, const SamplingConfig& cfg, Rng& rng) {
  const int eos = vocab.special(Special::eos);
  // Restrict to the semantic sub-range plus EOS.
  std::vector<double> allowed(static_cast<std::size_t>(vocab.v_sem() + 1));
  for (int i = 0; i < vocab.v_sem(); ++i) allowed[static_cast<std::size_t>(i)] = static_cast<double>(logits[static_cast<std::size_t>(i)]);
  allowed.back() = static_cast<double>(logits[static_cast<std::size_t>(eos)]);
  auto to_uid = [&](int local) { return local == vocab.v_sem() ? eos : local; };

  if (cfg.mode == SamplingConfig::Mode::greedy) return to_uid(argmax_lowest(std::span<const double>(allowed)));

  if (cfg.k <= 0) throw DomainError("top-k sampling requires k >= 1");
  if (!(cfg.temperature > 0)) throw DomainError("sampling temperature must be positive");
  std::vector<int> order(allowed.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return allowed[static_cast<std::size_t>(a)] > allowed[static_cast<std::size_t>(b)];
  });
  order.resize(std::min(order.size(), static_cast<std::size_t>(cfg.k)));
  std::vector<double> w(order.size());
  const double top = allowed[static_cast<std::size_t>(order.front())];
  for (std::size_t i = 0; i < order.size(); ++i)
    w[i] = std::exp((allowed[static_cast<std::size_t>(order[i])] - top) / cfg.temperature);
  std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
  return to_uid(order[pick(rng)]);
}

}  // namespace detail

// Autoregressive generation for several requests at once. Unfinished sequences
// are packed into one forward pass per step. Stops each sequence at EOS or
// after max_new_tokens.
template <class T>
std::vector<SemanticSequence> generate_batch(const T2SModel<T>& model, std::span<const GenerationRequest> requests,
                                             const SamplingConfig& sampling) {
  if (sampling.max_new_tokens < 0) throw DomainError("max_new_tokens must be non-negative");
  const auto& vocab = model.vocab();
  const int eos = vocab.special(Special::eos);
  std::vector<std::vector<int>> seqs;
  for (const auto& r : requests) {
    auto in = assemble_t2s_input(r.s_op, r.text, r.s_prompt, std::nullopt, vocab);
    if (in.ids.size() + static_cast<std::size_t>(sampling.max_new_tokens) >
        static_cast<std::size_t>(model.config().max_seq_len))
      throw LengthError("t2s: prefix of " + std::to_string(in.ids.size()) + " tokens plus " +
                        std::to_string(sampling.max_new_tokens) + " new tokens exceeds max " +
                        std::to_string(model.config().max_seq_len));
    seqs.push_back(std::move(in.ids));
  }
  std::vector<SemanticSequence> out(requests.size(), SemanticSequence{{}, SemanticSource::predicted});
  std::vector<bool> done(requests.size(), sampling.max_new_tokens == 0);
  std::vector<Rng> rngs;
  for (std::size_t i = 0; i < requests.size(); ++i) rngs.emplace_back(sampling.seed + i);

  ad::NoGradGuard no_grad;
  for (int step = 0; step < sampling.max_new_tokens; ++step) {
    std::vector<std::size_t> live;
    std::vector<int> ids;
    std::vector<ad::RowSpan> spans;
    for (std::size_t i = 0; i < seqs.size(); ++i) {
      if (done[i]) continue;
      live.push_back(i);
      spans.push_back({ids.size(), seqs[i].size()});
      ids.insert(ids.end(), seqs[i].begin(), seqs[i].end());
    }
    if (live.empty()) break;
    auto logits = model.forward_packed(ids, spans);
    for (std::size_t j = 0; j < live.size(); ++j) {
      const std::size_t i = live[j];
      const auto row = logits.value().row(spans[j].offset + spans[j].length - 1);
      const int next = detail::sample_next<T>(row, vocab, sampling, rngs[i]);
      if (next == eos) {
        done[i] = true;
        continue;
      }
      out[i].tokens.push_back(vocab.to_semantic(next));
      seqs[i].push_back(next);
      if (static_cast<int>(out[i].tokens.size()) >= sampling.max_new_tokens) done[i] = true;
    }
  }
  return out;
}

template <class T>
SemanticSequence generate(const T2SModel<T>& model, const SemanticSequence& s_op, const TextSequence& text,
                          const SemanticSequence& s_prompt, const SamplingConfig& sampling) {
  const GenerationRequest r{s_op, text, s_prompt};
  return generate_batch(model, std::span<const GenerationRequest>(&r, 1), sampling).front();
}

}  // namespace debatts
