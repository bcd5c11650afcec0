#pragma once

// Synthetic "style-copy" corpus. Each style owns a disjoint block of semantic
// ids and a bijective text -> semantic table onto that block. The opponent
// sequence carries marker tokens of one style; the target is the text mapped
// through that style's table. A deterministic toy codec supplies acoustic grids.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "debatts/errors.hpp"
#include "debatts/nn.hpp"
#include "debatts/tokens.hpp"

namespace debatts {

enum class PromptStyle { neutral, matched };

struct StyleCopySpec {
  int n_styles = 4;
  int v_text = 16;
  int v_sem = 64;
  // markers[s]: semantic ids that identify style s in an opponent sequence.
  std::vector<std::vector<int>> markers;
  // tables[s][text_id]: semantic id emitted for text_id under style s.
  std::vector<std::vector<int>> tables;
  int text_len_min = 4, text_len_max = 12;
  int op_len_min = 4, op_len_max = 8;
  int prompt_len_min = 4, prompt_len_max = 8;
  PromptStyle prompt_style = PromptStyle::neutral;
  // Toy acoustic codec.
  int n_q = 4;
  int v_ac = 64;
  std::uint64_t seed = 0;

  // Style s owns semantic block [s * v_text, (s + 1) * v_text). Tables are
  // seeded permutations of that block, or the identity when requested.
  static StyleCopySpec make(int n_styles, int v_text, std::uint64_t seed, bool identity_tables = false) {
    StyleCopySpec s;
    s.n_styles = n_styles;
    s.v_text = v_text;
    s.v_sem = n_styles * v_text;
    s.seed = seed;
    Rng rng(seed ^ 0x5eed7ab1e5ULL);
    for (int k = 0; k < n_styles; ++k) {
      std::vector<int> block(static_cast<std::size_t>(v_text));
      std::iota(block.begin(), block.end(), k * v_text);
      s.markers.push_back(block);
      if (!identity_tables) std::shuffle(block.begin(), block.end(), rng);
      s.tables.push_back(block);
    }
    return s;
  }

  void validate() const {
    if (n_styles < 2) throw DomainError("style-copy spec: n_styles must be >= 2");
    if (v_text <= 0 || v_sem <= 0) throw DomainError("style-copy spec: vocab sizes must be positive");
    if (static_cast<int>(markers.size()) != n_styles || static_cast<int>(tables.size()) != n_styles)
      throw DomainError("style-copy spec: need one marker set and one table per style");
    if (text_len_min < 0 || text_len_min > text_len_max || op_len_min < 1 || op_len_min > op_len_max ||
        prompt_len_min < 0 || prompt_len_min > prompt_len_max)
      throw DomainError("style-copy spec: invalid length ranges");
    if (n_q < 1 || v_ac < 2) throw DomainError("style-copy spec: invalid codec sizes");
    std::set<int> seen_markers;
    std::vector<std::set<int>> images;
    for (int k = 0; k < n_styles; ++k) {
      const auto& m = markers[static_cast<std::size_t>(k)];
      if (m.empty()) throw DomainError("style-copy spec: empty marker set for style " + std::to_string(k));
      for (int t : m) {
        if (t < 0 || t >= v_sem) throw DomainError("style-copy spec: marker outside semantic vocabulary");
        if (!seen_markers.insert(t).second) throw DomainError("style-copy spec: marker sets overlap");
      }
      const auto& tb = tables[static_cast<std::size_t>(k)];
      if (static_cast<int>(tb.size()) != v_text) throw DomainError("style-copy spec: table must cover every text id");
      std::set<int> img(tb.begin(), tb.end());
      if (img.size() != tb.size()) throw DomainError("style-copy spec: table for style " + std::to_string(k) + " is not a bijection");
      for (int t : img)
        if (t < 0 || t >= v_sem) throw DomainError("style-copy spec: table maps outside semantic vocabulary");
      for (const auto& other : images)
        for (int t : img)
          if (other.count(t)) throw DomainError("style-copy spec: table images overlap");
      images.push_back(std::move(img));
    }
  }
};

struct StyleCopyItem {
  std::string utt_id;
  int style = 0;
  SemanticSequence s_op{{}, SemanticSource::opponent};
  TextSequence text;
  SemanticSequence s_prompt{{}, SemanticSource::speaker_prompt};
  SemanticSequence s_target{{}, SemanticSource::target};
};

struct StyleCopyCorpus {
  std::vector<StyleCopyItem> train;
  std::vector<StyleCopyItem> test;
};

// The unique style whose markers occur in s_op; tokens outside every marker
// set are ignored.
inline int identify_style(const StyleCopySpec& spec, const SemanticSequence& s_op) {
  int found = -1;
  for (int k = 0; k < spec.n_styles; ++k) {
    const auto& m = spec.markers[static_cast<std::size_t>(k)];
    const bool hit = std::any_of(s_op.tokens.begin(), s_op.tokens.end(),
                                 [&](int t) { return std::find(m.begin(), m.end(), t) != m.end(); });
    if (!hit) continue;
    if (found >= 0) throw DomainError("opponent sequence mixes markers of styles " + std::to_string(found) + " and " + std::to_string(k));
    found = k;
  }
  if (found < 0) throw DomainError("opponent sequence carries no style markers");
  return found;
}

inline SemanticSequence oracle_target(const StyleCopySpec& spec, const SemanticSequence& s_op, const TextSequence& text) {
  const int style = identify_style(spec, s_op);
  SemanticSequence out{{}, SemanticSource::target};
  const auto& table = spec.tables[static_cast<std::size_t>(style)];
  for (int t : text.tokens) {
    if (t < 0 || t >= spec.v_text) throw VocabError("text id " + std::to_string(t) + " outside style-copy text vocabulary");
    out.tokens.push_back(table[static_cast<std::size_t>(t)]);
  }
  return out;
}

// Deterministic toy residual codec: layer 0 is the semantic id mod v_ac, each
// further layer is an affine bijection of the layer below.
inline int codec_layer_token(int below, int layer, int v_ac) { return (below * 5 + 3 * layer + 1) % v_ac; }

inline AcousticGrid codec_encode(std::span<const int> semantic, int n_q, int v_ac) {
  AcousticGrid g(static_cast<std::size_t>(n_q), semantic.size());
  for (std::size_t f = 0; f < semantic.size(); ++f) {
    g.at(0, f) = semantic[f] % v_ac;
    for (int j = 1; j < n_q; ++j)
      g.at(static_cast<std::size_t>(j), f) = codec_layer_token(g.at(static_cast<std::size_t>(j - 1), f), j, v_ac);
  }
  return g;
}

namespace detail {

inline int draw_between(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

inline StyleCopyItem draw_item(const StyleCopySpec& spec, Rng& rng) {
  StyleCopyItem it;
  it.style = draw_between(rng, 0, spec.n_styles - 1);
  const auto& markers = spec.markers[static_cast<std::size_t>(it.style)];
  const int op_len = draw_between(rng, spec.op_len_min, spec.op_len_max);
  for (int i = 0; i < op_len; ++i)
    it.s_op.tokens.push_back(markers[static_cast<std::size_t>(draw_between(rng, 0, static_cast<int>(markers.size()) - 1))]);
  const int text_len = draw_between(rng, spec.text_len_min, spec.text_len_max);
  for (int i = 0; i < text_len; ++i) it.text.tokens.push_back(draw_between(rng, 0, spec.v_text - 1));
  const int prompt_len = draw_between(rng, spec.prompt_len_min, spec.prompt_len_max);
  if (spec.prompt_style == PromptStyle::matched) {
    const auto& table = spec.tables[static_cast<std::size_t>(it.style)];
    for (int i = 0; i < prompt_len; ++i)
      it.s_prompt.tokens.push_back(table[static_cast<std::size_t>(draw_between(rng, 0, spec.v_text - 1))]);
  } else {
    for (int i = 0; i < prompt_len; ++i) it.s_prompt.tokens.push_back(draw_between(rng, 0, spec.v_sem - 1));
  }
  const auto& table = spec.tables[static_cast<std::size_t>(it.style)];
  for (int t : it.text.tokens) it.s_target.tokens.push_back(table[static_cast<std::size_t>(t)]);
  return it;
}

}  // namespace detail

// Train and test are disjoint at the text level: no test text occurs in train.
inline StyleCopyCorpus gen_corpus(const StyleCopySpec& spec, int n_train, int n_test) {
  spec.validate();
  if (n_train <= 0 || n_test <= 0) throw DomainError("corpus sizes must be positive");
  Rng rng(spec.seed);
  StyleCopyCorpus c;
  std::set<std::vector<int>> train_texts;
  for (int i = 0; i < n_train; ++i) {
    auto it = detail::draw_item(spec, rng);
    it.utt_id = "train-" + std::to_string(i);
    train_texts.insert(it.text.tokens);
    c.train.push_back(std::move(it));
  }
  const long max_attempts = 1000L * n_test + 10000;
  long attempts = 0;
  while (static_cast<int>(c.test.size()) < n_test) {
    if (++attempts > max_attempts) throw DomainError("cannot draw test texts disjoint from train; widen the text length range");
    auto it = detail::draw_item(spec, rng);
    if (train_texts.count(it.text.tokens)) continue;
    it.utt_id = "test-" + std::to_string(c.test.size());
    c.test.push_back(std::move(it));
  }
  return c;
}

// An opponent sequence of a different style than `style`, same length.
inline SemanticSequence swap_style(const StyleCopySpec& spec, const SemanticSequence& s_op, int style, Rng& rng) {
  const int other = (style + detail::draw_between(rng, 1, spec.n_styles - 1)) % spec.n_styles;
  const auto& markers = spec.markers[static_cast<std::size_t>(other)];
  SemanticSequence out{{}, SemanticSource::opponent};
  for (std::size_t i = 0; i < s_op.tokens.size(); ++i)
    out.tokens.push_back(markers[static_cast<std::size_t>(detail::draw_between(rng, 0, static_cast<int>(markers.size()) - 1))]);
  return out;
}

}  // namespace debatts
