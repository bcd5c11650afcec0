#pragma once

// Semantic-to-acoustic stage: a bidirectional masked-token transformer over
// frames. Each frame's input is the sum of its semantic embedding and one
// embedding per acoustic layer (with a dedicated MASK row). Decoding fills the
// grid layer by layer, coarse first, with confidence-ranked iterative rounds.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
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

struct S2AConfig {
  int n_q = 4;  // residual acoustic layers
  int v_ac = 64;
  int v_sem = 64;
  int d_model = 128;
  int n_layers = 2;
  int n_heads = 4;
  int d_ff = 256;
  int max_frames = 512;

  void validate() const {
    if (n_q < 1 || v_ac < 2 || v_sem < 1 || d_model <= 0 || n_layers < 0 || n_heads <= 0 || d_ff <= 0 ||
        max_frames <= 0)
      throw DomainError("s2a config: sizes must be positive");
    if (d_model % n_heads != 0 || (d_model / n_heads) % 2 != 0)
      throw DomainError("s2a config: head width must be even and divide d_model");
  }
};

// Cosine masking schedule: fraction of positions still masked at `progress`.
inline double mask_schedule(double progress) {
  if (!(progress >= 0.0 && progress <= 1.0)) throw DomainError("mask_schedule: progress must lie in [0, 1]");
  if (progress == 1.0) return 0.0;
  return std::cos(3.14159265358979323846 * progress / 2.0);
}

template <class T>
class S2AModel {
 public:
  S2AModel(const S2AConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(seed);
    const auto d = static_cast<std::size_t>(cfg_.d_model);
    semantic_embedding_ = params_.create("semantic_embedding",
                                         normal_tensor<T>({static_cast<std::size_t>(cfg_.v_sem), d}, 0.02, rng), false);
    for (int j = 0; j < cfg_.n_q; ++j)
      acoustic_embeddings_.push_back(params_.create(
          "acoustic_embedding." + std::to_string(j),
          normal_tensor<T>({static_cast<std::size_t>(cfg_.v_ac) + 1, d}, 0.02, rng), false));
    blocks_ = make_blocks(params_, "blocks.", cfg_.n_layers, d, static_cast<std::size_t>(cfg_.d_ff), rng);
    final_norm_ = params_.create("head.norm", Tensor<T>({d}, T(1)), false);
    for (int j = 0; j < cfg_.n_q; ++j)
      heads_.push_back(make_linear(params_, "head.out." + std::to_string(j), d, static_cast<std::size_t>(cfg_.v_ac),
                                   true, 0.02, rng));
  }

  S2AModel(const S2AModel&) = delete;
  S2AModel& operator=(const S2AModel&) = delete;
  S2AModel(S2AModel&&) noexcept = default;
  S2AModel& operator=(S2AModel&&) noexcept = default;

  const S2AConfig& config() const { return cfg_; }
  ParameterSet<T>& params() { return params_; }
  const ParameterSet<T>& params() const { return params_; }
  int mask_row() const { return cfg_.v_ac; }

  const ad::Var<T>& semantic_embedding() const { return semantic_embedding_; }
  const ad::Var<T>& acoustic_embedding(std::size_t layer) const { return acoustic_embeddings_.at(layer); }

  // semantic[f] + sum over layers of acoustic_j[grid[j][f] or MASK].
  ad::Var<T> embed_frames(std::span<const int> semantic, const AcousticGrid& grid) const {
    if (semantic.size() != grid.n_frames())
      throw AlignmentError("s2a: " + std::to_string(semantic.size()) + " semantic frames vs " +
                           std::to_string(grid.n_frames()) + " acoustic frames");
    if (grid.n_layers() != static_cast<std::size_t>(cfg_.n_q))
      throw AlignmentError("s2a: grid has " + std::to_string(grid.n_layers()) + " layers, model expects " +
                           std::to_string(cfg_.n_q));
    grid.validate(cfg_.v_ac, true);
    std::vector<std::vector<int>> layer_ids(grid.n_layers());
    for (std::size_t j = 0; j < grid.n_layers(); ++j)
      for (int t : grid.layer(j)) layer_ids[j].push_back(t == AcousticGrid::kMask ? mask_row() : t);
    return embed_ids(semantic, layer_ids);
  }

  // Final hidden states for a packed batch of frame sequences.
  ad::Var<T> hidden_packed(std::span<const int> semantic, const std::vector<std::vector<int>>& layer_ids,
                           std::span<const ad::RowSpan> spans) const {
    for (const auto& s : spans)
      if (s.length > static_cast<std::size_t>(cfg_.max_frames))
        throw LengthError("s2a: " + std::to_string(s.length) + " frames exceed max " + std::to_string(cfg_.max_frames));
    auto x = embed_ids(semantic, layer_ids);
    return ad::rms_norm(run_blocks(blocks_, x, spans, static_cast<std::size_t>(cfg_.n_heads), false), final_norm_);
  }

  ad::Var<T> head(std::size_t layer, const ad::Var<T>& hidden) const { return heads_.at(layer)(hidden); }

  // Logits [F x V_ac] of head `layer` for a single frame sequence.
  ad::Var<T> forward(std::span<const int> semantic, const AcousticGrid& grid, std::size_t layer) const {
    auto x = embed_frames(semantic, grid);
    const ad::RowSpan one{0, semantic.size()};
    if (semantic.size() > static_cast<std::size_t>(cfg_.max_frames))
      throw LengthError("s2a: " + std::to_string(semantic.size()) + " frames exceed max " +
                        std::to_string(cfg_.max_frames));
    auto h = ad::rms_norm(run_blocks(blocks_, x, std::span<const ad::RowSpan>(&one, 1),
                                     static_cast<std::size_t>(cfg_.n_heads), false),
                          final_norm_);
    return head(layer, h);
  }

 private:
  ad::Var<T> embed_ids(std::span<const int> semantic, const std::vector<std::vector<int>>& layer_ids) const {
    auto x = ad::embedding(semantic_embedding_, semantic);
    for (std::size_t j = 0; j < layer_ids.size(); ++j)
      x = ad::add(x, ad::embedding(acoustic_embeddings_[j], std::span<const int>(layer_ids[j])));
    return x;
  }

  S2AConfig cfg_;
  ParameterSet<T> params_;
  ad::Var<T> semantic_embedding_;
  std::vector<ad::Var<T>> acoustic_embeddings_;
  std::vector<TransformerBlock<T>> blocks_;
  ad::Var<T> final_norm_;
  std::vector<Linear<T>> heads_;
};

struct S2AExample {
  std::vector<int> semantic;
  AcousticGrid grid;
};

struct S2ATrainOptions {
  // Overrides the schedule-drawn mask fraction when set.
  std::optional<double> forced_mask_fraction;
  std::optional<int> forced_layer;
  // Keep a random unmasked prefix of up to half the frames, as at decode time.
  bool sample_prompt = true;
};

template <class T>
struct S2ALoss {
  ad::Var<T> loss;
  ad::Var<T> logits;           // rows of every example, each from its own head
  std::vector<bool> mask;      // loss positions
  std::vector<int> layers;     // head queried per example
  std::vector<ad::RowSpan> spans;
};

// Per example: draw layer j; layers below j stay visible, layers above j are
// masked outside the prompt, and layer j is masked at a schedule-drawn fraction.
// Loss is cross-entropy of head j on the masked positions of layer j.
template <class T>
S2ALoss<T> s2a_loss(const S2AModel<T>& model, std::span<const S2AExample> batch, Rng& rng,
                    const S2ATrainOptions& opts = {}) {
  const auto& cfg = model.config();
  const int n_q = cfg.n_q;
  S2ALoss<T> out;
  std::vector<int> semantic, targets;
  std::vector<std::vector<int>> layer_ids(static_cast<std::size_t>(n_q));
  for (const auto& ex : batch) {
    if (ex.semantic.size() != ex.grid.n_frames()) throw AlignmentError("s2a: semantic/acoustic frame mismatch");
    if (ex.grid.n_layers() != static_cast<std::size_t>(n_q)) throw AlignmentError("s2a: grid layer count mismatch");
    ex.grid.validate(cfg.v_ac, false);
    const std::size_t frames = ex.semantic.size();
    int j = opts.forced_layer ? *opts.forced_layer : std::uniform_int_distribution<int>(0, n_q - 1)(rng);
    if (j < 0 || j >= n_q) throw DomainError("s2a: forced layer out of range");
    std::size_t prompt = 0;
    if (opts.sample_prompt && frames > 1)
      prompt = std::uniform_int_distribution<std::size_t>(0, frames / 2)(rng);
    const std::size_t open = frames - prompt;
    double frac = opts.forced_mask_fraction ? *opts.forced_mask_fraction
                                            : mask_schedule(std::uniform_real_distribution<double>(0.0, 1.0)(rng));
    std::size_t n_mask = static_cast<std::size_t>(std::ceil(frac * static_cast<double>(open)));
    n_mask = std::clamp<std::size_t>(n_mask, open > 0 ? 1 : 0, open);
    std::vector<std::size_t> cand(open);
    std::iota(cand.begin(), cand.end(), prompt);
    std::shuffle(cand.begin(), cand.end(), rng);
    std::vector<bool> masked(frames, false);
    for (std::size_t i = 0; i < n_mask; ++i) masked[cand[i]] = true;

    out.spans.push_back({semantic.size(), frames});
    out.layers.push_back(j);
    for (std::size_t f = 0; f < frames; ++f) {
      semantic.push_back(ex.semantic[f]);
      for (int l = 0; l < n_q; ++l) {
        const int tok = ex.grid.at(static_cast<std::size_t>(l), f);
        const bool hide = (l == j && masked[f]) || (l > j && f >= prompt);
        layer_ids[static_cast<std::size_t>(l)].push_back(hide ? model.mask_row() : tok);
      }
      targets.push_back(ex.grid.at(static_cast<std::size_t>(j), f));
      out.mask.push_back(masked[f]);
    }
  }
  auto hidden = model.hidden_packed(semantic, layer_ids, out.spans);
  std::vector<ad::Var<T>> parts;
  for (std::size_t e = 0; e < out.spans.size(); ++e)
    parts.push_back(model.head(static_cast<std::size_t>(out.layers[e]),
                               ad::slice_rows(hidden, out.spans[e].offset, out.spans[e].length)));
  out.logits = ad::concat_rows(parts);
  out.loss = ad::softmax_cross_entropy(out.logits, std::span<const int>(targets), out.mask);
  return out;
}

template <class T>
double s2a_train_step(S2AModel<T>& model, std::span<const S2AExample> batch, AdamW<T>& opt, Rng& rng, double lr,
                      const S2ATrainOptions& opts = {}) {
  auto l = s2a_loss(model, batch, rng, opts);
  const double loss = static_cast<double>(l.loss.item());
  if (!std::isfinite(loss)) {
    model.params().zero_grad();
    throw NumericError("s2a: non-finite training loss");
  }
  l.loss.backward();
  opt.step(lr);
  return loss;
}

struct S2ADecodeConfig {
  int first_layer_iters = 8;
  int other_layer_iters = 1;
  bool greedy = true;
  double temperature = 1.0;
  std::uint64_t seed = 0;

  static S2ADecodeConfig uniform(int iters_per_layer) {
    S2ADecodeConfig c;
    c.first_layer_iters = c.other_layer_iters = iters_per_layer;
    return c;
  }
};

// Optional instrumentation of a decode run.
struct S2ADecodeTrace {
  int forward_calls = 0;
  std::vector<int> layer_queries;  // head index of every forward call, in order
};

template <class T>
AcousticGrid s2a_decode(const S2AModel<T>& model, std::span<const int> semantic, const AcousticGrid& prompt,
                        const S2ADecodeConfig& cfg, S2ADecodeTrace* trace = nullptr) {
  const auto& mc = model.config();
  const std::size_t frames = semantic.size();
  const std::size_t n_prompt = prompt.n_frames();
  if (prompt.n_layers() != static_cast<std::size_t>(mc.n_q))
    throw AlignmentError("s2a decode: prompt has " + std::to_string(prompt.n_layers()) + " layers, model expects " +
                         std::to_string(mc.n_q));
  if (n_prompt > frames)
    throw AlignmentError("s2a decode: prompt covers " + std::to_string(n_prompt) + " frames but only " +
                         std::to_string(frames) + " semantic frames given");
  prompt.validate(mc.v_ac, false);
  if (cfg.first_layer_iters < 1 || cfg.other_layer_iters < 1) throw DomainError("s2a decode: iterations must be >= 1");
  if (!cfg.greedy && !(cfg.temperature > 0)) throw DomainError("s2a decode: temperature must be positive");

  AcousticGrid grid(static_cast<std::size_t>(mc.n_q), frames);
  for (std::size_t j = 0; j < grid.n_layers(); ++j)
    for (std::size_t f = 0; f < n_prompt; ++f) grid.at(j, f) = prompt.at(j, f);
  if (n_prompt == frames) return grid;

  Rng rng(cfg.seed);
  ad::NoGradGuard no_grad;
  const std::size_t open = frames - n_prompt;
  for (std::size_t j = 0; j < grid.n_layers(); ++j) {
    for (std::size_t below = 0; below < j; ++below)
      if (grid.layer_has_mask(below))
        throw StateError("s2a decode: head " + std::to_string(j) + " queried before layer " + std::to_string(below) +
                         " was resolved");
    const int iters = j == 0 ? cfg.first_layer_iters : cfg.other_layer_iters;
    std::size_t still_masked = open;
    for (int r = 0; r < iters && still_masked > 0; ++r) {
      auto logits = model.forward(semantic, grid, j);
      if (trace) {
        ++trace->forward_calls;
        trace->layer_queries.push_back(static_cast<int>(j));
      }
      struct Candidate {
        std::size_t frame;
        int token;
        double confidence;
      };
      std::vector<Candidate> cands;
      for (std::size_t f = n_prompt; f < frames; ++f) {
        if (grid.at(j, f) != AcousticGrid::kMask) continue;
        auto row = logits.value().row(f);
        std::vector<double> p(row.size());
        const double temp = cfg.greedy ? 1.0 : cfg.temperature;
        for (std::size_t v = 0; v < row.size(); ++v) p[v] = static_cast<double>(row[v]) / temp;
        const double mx = *std::max_element(p.begin(), p.end());
        double s = 0;
        for (auto& x : p) s += (x = std::exp(x - mx));
        for (auto& x : p) x /= s;
        int tok = 0;
        if (cfg.greedy) {
          for (std::size_t v = 1; v < p.size(); ++v)
            if (p[v] > p[static_cast<std::size_t>(tok)]) tok = static_cast<int>(v);
        } else {
          tok = static_cast<int>(std::discrete_distribution<std::size_t>(p.begin(), p.end())(rng));
        }
        cands.push_back({f, tok, p[static_cast<std::size_t>(tok)]});
      }
      std::size_t keep_masked = 0;
      if (r + 1 < iters) {
        keep_masked = static_cast<std::size_t>(
            std::floor(static_cast<double>(open) * mask_schedule(static_cast<double>(r + 1) / iters)));
        keep_masked = std::min(keep_masked, still_masked - 1);
      }
      const std::size_t commit = still_masked - keep_masked;
      std::stable_sort(cands.begin(), cands.end(),
                       [](const Candidate& a, const Candidate& b) { return a.confidence > b.confidence; });
      for (std::size_t i = 0; i < commit; ++i) grid.at(j, cands[i].frame) = cands[i].token;
      still_masked = keep_masked;
    }
  }
  if (grid.count_masked() != 0) throw StateError("s2a decode: output still contains MASK entries");
  return grid;
}

template <class T>
AcousticGrid s2a_decode(const S2AModel<T>& model, std::span<const int> semantic, const AcousticGrid& prompt,
                        int iters_per_layer) {
  return s2a_decode(model, semantic, prompt, S2ADecodeConfig::uniform(iters_per_layer));
}

}  // namespace debatts
