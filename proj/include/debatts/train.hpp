#pragma once

// Minibatch training loops with epoch-wise shuffling and warmup+cosine
// learning-rate decay.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

#include "debatts/errors.hpp"
#include "debatts/nn.hpp"
#include "debatts/s2a.hpp"
#include "debatts/t2s.hpp"
#include "debatts/token_io.hpp"

namespace debatts {

struct TrainProgress {
  int step = 0;
  double loss = 0;
  double lr = 0;
  double seconds = 0;
};

using TrainCallback = std::function<void(const TrainProgress&)>;

namespace detail {

// Yields indices of shuffled passes over [0, n).
class EpochSampler {
 public:
  EpochSampler(std::size_t n, std::uint64_t seed) : order_(n), rng_(seed) {
    if (n == 0) throw DataError("training set is empty");
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    pos_ = n;
  }

  std::size_t next() {
    if (pos_ >= order_.size()) {
      std::shuffle(order_.begin(), order_.end(), rng_);
      pos_ = 0;
    }
    return order_[pos_++];
  }

  Rng& rng() { return rng_; }

 private:
  std::vector<std::size_t> order_;
  Rng rng_;
  std::size_t pos_;
};

template <class Example, class Step>
double run_training(const std::vector<Example>& data, const io::TrainSettings& s, Step&& step,
                    const TrainCallback& cb, int log_every) {
  EpochSampler sampler(data.size(), s.seed);
  const auto t0 = std::chrono::steady_clock::now();
  double last = 0;
  std::vector<Example> batch;
  for (int i = 0; i < s.steps; ++i) {
    batch.clear();
    for (int b = 0; b < s.batch_size; ++b) batch.push_back(data[sampler.next()]);
    const double lr = warmup_cosine_lr(s.lr, i, s.steps, s.warmup);
    last = step(std::span<const Example>(batch), lr, sampler.rng());
    if (cb && (i % log_every == 0 || i + 1 == s.steps))
      cb({i, last, lr, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()});
  }
  return last;
}

}  // namespace detail

template <class T>
double train_t2s(T2SModel<T>& model, const std::vector<T2SInput>& data, const io::TrainSettings& s,
                 const TrainCallback& cb = {}, int log_every = 50) {
  AdamWConfig ac;
  ac.lr = s.lr;
  AdamW<T> opt(model.params(), ac);
  return detail::run_training(
      data, s, [&](std::span<const T2SInput> batch, double lr, Rng&) { return t2s_train_step(model, batch, opt, lr); },
      cb, log_every);
}

template <class T>
double train_s2a(S2AModel<T>& model, const std::vector<S2AExample>& data, const io::TrainSettings& s,
                 const TrainCallback& cb = {}, int log_every = 50, const S2ATrainOptions& opts = {}) {
  AdamWConfig ac;
  ac.lr = s.lr;
  AdamW<T> opt(model.params(), ac);
  return detail::run_training(
      data, s,
      [&](std::span<const S2AExample> batch, double lr, Rng& rng) {
        return s2a_train_step(model, batch, opt, rng, lr, opts);
      },
      cb, log_every);
}

// Training pairs for each stage from token records carrying the style-copy
// extension fields.
inline std::vector<T2SInput> t2s_examples(const std::vector<io::TokenRecord>& records, const T2SConfig& cfg) {
  const auto vocab = cfg.vocab();
  const auto tok = io::task_tokenizer(cfg.v_text);
  std::vector<T2SInput> out;
  for (const auto& r : records) {
    const auto c = io::conditioned(r, tok);
    out.push_back(assemble_t2s_input(c.s_op, c.text, c.s_prompt, c.s_target, vocab));
  }
  return out;
}

// Prompt frames followed by target frames, as the decoder sees them.
inline std::vector<S2AExample> s2a_examples(const std::vector<io::TokenRecord>& records) {
  std::vector<S2AExample> out;
  for (const auto& r : records) {
    if (!r.acoustic) throw DataError("record " + r.utt_id + ": missing acoustic grid");
    std::vector<int> semantic;
    std::vector<std::vector<int>> layers = *r.acoustic;
    if (r.s_prompt && r.prompt_acoustic) {
      semantic = *r.s_prompt;
      layers = *r.prompt_acoustic;
      if (layers.size() != r.acoustic->size()) throw DataError("record " + r.utt_id + ": prompt layer count mismatch");
      for (std::size_t j = 0; j < layers.size(); ++j)
        layers[j].insert(layers[j].end(), (*r.acoustic)[j].begin(), (*r.acoustic)[j].end());
    }
    semantic.insert(semantic.end(), r.semantic.begin(), r.semantic.end());
    out.push_back({std::move(semantic), AcousticGrid::from_layers(layers)});
  }
  return out;
}

}  // namespace debatts
