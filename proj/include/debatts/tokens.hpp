#pragma once

// Discrete token types and the text-to-semantic input layout:
//
//   [BOS] S_op [SEP_OP] T [SEP_TEXT] S_prompt [SEP_PROMPT] S_target [EOS]
//
// All streams share one id space: semantic ids first, then text ids, then the
// five specials.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "debatts/errors.hpp"

namespace debatts {

enum class SemanticSource { opponent, speaker_prompt, target, predicted };

struct SemanticSequence {
  std::vector<int> tokens;
  SemanticSource source = SemanticSource::target;
};

struct TextSequence {
  std::vector<int> tokens;
};

enum class Special : int { sep_op = 0, sep_text = 1, sep_prompt = 2, bos = 3, eos = 4 };
inline constexpr int kNumSpecials = 5;

class UnifiedVocab {
 public:
  UnifiedVocab(int v_sem, int v_text) : v_sem_(v_sem), v_text_(v_text) {
    if (v_sem <= 0 || v_text <= 0) throw VocabError("sub-vocabulary sizes must be positive");
  }

  int v_sem() const { return v_sem_; }
  int v_text() const { return v_text_; }
  int size() const { return v_sem_ + v_text_ + kNumSpecials; }

  int text_offset() const { return v_sem_; }
  int special_offset() const { return v_sem_ + v_text_; }

  int semantic(int id) const {
    if (id < 0 || id >= v_sem_)
      throw VocabError("semantic id " + std::to_string(id) + " outside [0, " + std::to_string(v_sem_) + ")");
    return id;
  }
  int text(int id) const {
    if (id < 0 || id >= v_text_)
      throw VocabError("text id " + std::to_string(id) + " outside [0, " + std::to_string(v_text_) + ")");
    return text_offset() + id;
  }
  int special(Special s) const { return special_offset() + static_cast<int>(s); }

  bool is_semantic(int uid) const { return uid >= 0 && uid < v_sem_; }
  bool is_text(int uid) const { return uid >= text_offset() && uid < special_offset(); }
  bool is_special(int uid) const { return uid >= special_offset() && uid < size(); }

  int to_semantic(int uid) const {
    if (!is_semantic(uid)) throw VocabError("unified id " + std::to_string(uid) + " is not semantic");
    return uid;
  }
  int to_text(int uid) const {
    if (!is_text(uid)) throw VocabError("unified id " + std::to_string(uid) + " is not text");
    return uid - text_offset();
  }

  friend bool operator==(const UnifiedVocab&, const UnifiedVocab&) = default;

 private:
  int v_sem_;
  int v_text_;
};

struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool contains(std::size_t i) const { return i >= begin && i < end; }
  friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

struct T2SInput {
  std::vector<int> ids;
  IndexRange opponent;
  IndexRange text;
  IndexRange speaker_prompt;
  IndexRange target;
  bool has_target = false;
  std::vector<bool> loss_mask;

  friend bool operator==(const T2SInput&, const T2SInput&) = default;
};

std::vector<bool> build_loss_mask(const T2SInput& input);

inline T2SInput assemble_t2s_input(const SemanticSequence& s_op, const TextSequence& text,
                                   const SemanticSequence& s_prompt, const std::optional<SemanticSequence>& s_target,
                                   const UnifiedVocab& vocab) {
  if (s_op.source != SemanticSource::opponent) throw DomainError("opponent slot requires an opponent sequence");
  if (s_prompt.source != SemanticSource::speaker_prompt)
    throw DomainError("speaker-prompt slot requires a speaker_prompt sequence");
  if (s_target && s_target->source != SemanticSource::target)
    throw DomainError("target slot requires a target sequence");

  T2SInput in;
  auto& ids = in.ids;
  ids.reserve(4 + s_op.tokens.size() + text.tokens.size() + s_prompt.tokens.size() +
              (s_target ? s_target->tokens.size() + 1 : 0));
  auto put_semantic = [&](const SemanticSequence& s) -> IndexRange {
    IndexRange r{ids.size(), ids.size()};
    for (int t : s.tokens) ids.push_back(vocab.semantic(t));
    r.end = ids.size();
    return r;
  };

  ids.push_back(vocab.special(Special::bos));
  in.opponent = put_semantic(s_op);
  ids.push_back(vocab.special(Special::sep_op));
  in.text.begin = ids.size();
  for (int t : text.tokens) ids.push_back(vocab.text(t));
  in.text.end = ids.size();
  ids.push_back(vocab.special(Special::sep_text));
  in.speaker_prompt = put_semantic(s_prompt);
  ids.push_back(vocab.special(Special::sep_prompt));
  if (s_target) {
    in.target = put_semantic(*s_target);
    ids.push_back(vocab.special(Special::eos));
    in.has_target = true;
    in.loss_mask = build_loss_mask(in);
  } else {
    in.target = {ids.size(), ids.size()};
    in.loss_mask.assign(ids.size(), false);
  }
  return in;
}

// True on the target region and the closing EOS.
inline std::vector<bool> build_loss_mask(const T2SInput& input) {
  if (!input.has_target) throw StateError("loss mask requires a target region");
  std::vector<bool> mask(input.ids.size(), false);
  for (std::size_t i = input.target.begin; i < input.target.end; ++i) mask[i] = true;
  mask[input.target.end] = true;
  return mask;
}

// Prompt text goes in front of the target text inside the text region.
inline TextSequence join_prompt_text(const TextSequence& prompt_text, const TextSequence& text) {
  TextSequence out = prompt_text;
  out.tokens.insert(out.tokens.end(), text.tokens.begin(), text.tokens.end());
  return out;
}

// N x F grid of residual acoustic codes; kMask marks positions still to be
// generated.
class AcousticGrid {
 public:
  static constexpr int kMask = -1;

  AcousticGrid() = default;
  AcousticGrid(std::size_t n_layers, std::size_t n_frames, int fill = kMask)
      : n_layers_(n_layers), n_frames_(n_frames), tokens_(n_layers * n_frames, fill) {
    if (n_layers == 0) throw DomainError("acoustic grid needs at least one layer");
  }

  static AcousticGrid from_layers(const std::vector<std::vector<int>>& layers) {
    if (layers.empty()) throw DomainError("acoustic grid needs at least one layer");
    AcousticGrid g(layers.size(), layers.front().size());
    for (std::size_t j = 0; j < layers.size(); ++j) {
      if (layers[j].size() != g.n_frames_) throw DomainError("acoustic grid must be rectangular");
      std::copy(layers[j].begin(), layers[j].end(), g.tokens_.begin() + static_cast<std::ptrdiff_t>(j * g.n_frames_));
    }
    return g;
  }

  std::size_t n_layers() const { return n_layers_; }
  std::size_t n_frames() const { return n_frames_; }

  int& at(std::size_t layer, std::size_t frame) { return tokens_[layer * n_frames_ + frame]; }
  int at(std::size_t layer, std::size_t frame) const { return tokens_[layer * n_frames_ + frame]; }

  std::span<int> layer(std::size_t j) { return {tokens_.data() + j * n_frames_, n_frames_}; }
  std::span<const int> layer(std::size_t j) const { return {tokens_.data() + j * n_frames_, n_frames_}; }

  std::vector<std::vector<int>> to_layers() const {
    std::vector<std::vector<int>> out;
    for (std::size_t j = 0; j < n_layers_; ++j) out.emplace_back(layer(j).begin(), layer(j).end());
    return out;
  }

  std::size_t count_masked() const { return static_cast<std::size_t>(std::count(tokens_.begin(), tokens_.end(), kMask)); }
  bool layer_has_mask(std::size_t j) const {
    auto l = layer(j);
    return std::find(l.begin(), l.end(), kMask) != l.end();
  }

  void validate(int v_ac, bool allow_mask) const {
    for (int t : tokens_) {
      if (t == kMask && allow_mask) continue;
      if (t < 0 || t >= v_ac)
        throw VocabError("acoustic id " + std::to_string(t) + " outside [0, " + std::to_string(v_ac) + ")");
    }
  }

  friend bool operator==(const AcousticGrid&, const AcousticGrid&) = default;

 private:
  std::size_t n_layers_ = 0;
  std::size_t n_frames_ = 0;
  std::vector<int> tokens_;
};

// Character-level text tokenizer over a fixed alphabet of UTF-8 code points.
class CharTokenizer {
 public:
  explicit CharTokenizer(std::string_view alphabet) : symbols_(split_utf8(alphabet)) {
    for (std::size_t i = 0; i < symbols_.size(); ++i)
      for (std::size_t j = 0; j < i; ++j)
        if (symbols_[i] == symbols_[j]) throw VocabError("tokenizer alphabet has duplicate symbol '" + symbols_[i] + "'");
  }

  // "a", "b", ... for n <= 26.
  static CharTokenizer latin(int n) {
    if (n <= 0 || n > 26) throw VocabError("latin alphabet supports 1..26 symbols");
    std::string s;
    for (int i = 0; i < n; ++i) s.push_back(static_cast<char>('a' + i));
    return CharTokenizer(s);
  }

  int size() const { return static_cast<int>(symbols_.size()); }

  TextSequence encode(std::string_view text) const {
    TextSequence out;
    for (const auto& cp : split_utf8(text)) {
      auto it = std::find(symbols_.begin(), symbols_.end(), cp);
      if (it == symbols_.end()) throw VocabError("character '" + cp + "' not in tokenizer alphabet");
      out.tokens.push_back(static_cast<int>(it - symbols_.begin()));
    }
    return out;
  }

  std::string decode(const TextSequence& seq) const {
    std::string out;
    for (int t : seq.tokens) {
      if (t < 0 || t >= size()) throw VocabError("text id " + std::to_string(t) + " outside tokenizer alphabet");
      out += symbols_[static_cast<std::size_t>(t)];
    }
    return out;
  }

  static std::vector<std::string> split_utf8(std::string_view s) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < s.size();) {
      const auto c = static_cast<unsigned char>(s[i]);
      std::size_t len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xe ? 3 : (c >> 3) == 0x1e ? 4 : 0;
      if (len == 0 || i + len > s.size()) throw VocabError("invalid UTF-8 in text");
      out.emplace_back(s.substr(i, len));
      i += len;
    }
    return out;
  }

 private:
  std::vector<std::string> symbols_;
};

}  // namespace debatts
