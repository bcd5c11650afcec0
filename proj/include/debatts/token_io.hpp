#pragma once

// JSON(L) readers and writers for token sequences, style-copy specs and model
// or training configs.

#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "debatts/errors.hpp"
#include "debatts/s2a.hpp"
#include "debatts/synthetic.hpp"
#include "debatts/t2s.hpp"
#include "debatts/tokens.hpp"

namespace debatts::io {

using ojson = nlohmann::ordered_json;

// One utterance of the token-sequence JSONL format. The style-copy fields and
// the prompt acoustic grid are optional extensions.
struct TokenRecord {
  std::string utt_id;
  std::vector<int> semantic;
  std::optional<std::vector<std::vector<int>>> acoustic;
  std::string text;
  std::optional<std::vector<int>> s_op;
  std::optional<std::vector<int>> s_prompt;
  std::optional<int> style;
  std::optional<std::vector<std::vector<int>>> prompt_acoustic;

  friend bool operator==(const TokenRecord&, const TokenRecord&) = default;
};

inline ojson to_json(const TokenRecord& r) {
  ojson j;
  j["utt_id"] = r.utt_id;
  j["semantic"] = r.semantic;
  if (r.acoustic) j["acoustic"] = *r.acoustic;
  j["text"] = r.text;
  if (r.s_op) j["s_op"] = *r.s_op;
  if (r.s_prompt) j["s_prompt"] = *r.s_prompt;
  if (r.style) j["style"] = *r.style;
  if (r.prompt_acoustic) j["prompt_acoustic"] = *r.prompt_acoustic;
  return j;
}

inline TokenRecord record_from_json(const nlohmann::json& j) {
  TokenRecord r;
  r.utt_id = j.at("utt_id").get<std::string>();
  r.semantic = j.at("semantic").get<std::vector<int>>();
  r.text = j.at("text").get<std::string>();
  auto opt = [&](const char* key, auto& field) {
    if (j.contains(key) && !j[key].is_null()) field = j[key].get<typename std::decay_t<decltype(field)>::value_type>();
  };
  opt("acoustic", r.acoustic);
  opt("s_op", r.s_op);
  opt("s_prompt", r.s_prompt);
  opt("style", r.style);
  opt("prompt_acoustic", r.prompt_acoustic);
  return r;
}

inline void write_records(const std::vector<TokenRecord>& records, std::ostream& os) {
  for (const auto& r : records) os << to_json(r).dump() << '\n';
  if (!os) throw DataError("token jsonl: write failed");
}

inline std::vector<TokenRecord> read_records(std::istream& is) {
  std::vector<TokenRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("token jsonl line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<TokenRecord> read_records(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path);
  return read_records(is);
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path);
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Style-copy corpus

struct TaskGenConfig {
  int n_styles = 4;
  int v_text = 16;
  int text_len_min = 4, text_len_max = 12;
  int op_len_min = 4, op_len_max = 8;
  int prompt_len_min = 4, prompt_len_max = 8;
  std::string prompt_style = "neutral";
  bool identity_tables = false;
  int n_q = 4;
  int v_ac = 64;
  int n_train = 10000;
  int n_test = 500;
  std::uint64_t seed = 0;

  StyleCopySpec spec() const {
    auto s = StyleCopySpec::make(n_styles, v_text, seed, identity_tables);
    s.text_len_min = text_len_min;
    s.text_len_max = text_len_max;
    s.op_len_min = op_len_min;
    s.op_len_max = op_len_max;
    s.prompt_len_min = prompt_len_min;
    s.prompt_len_max = prompt_len_max;
    if (prompt_style == "neutral")
      s.prompt_style = PromptStyle::neutral;
    else if (prompt_style == "matched")
      s.prompt_style = PromptStyle::matched;
    else
      throw DomainError("prompt_style must be 'neutral' or 'matched'");
    s.n_q = n_q;
    s.v_ac = v_ac;
    s.validate();
    return s;
  }
};

namespace detail {

template <class V>
void take(const nlohmann::json& j, const char* key, V& field) {
  if (j.contains(key)) field = j.at(key).get<V>();
}

inline void take_range(const nlohmann::json& j, const char* key, int& lo, int& hi) {
  if (!j.contains(key)) return;
  const auto r = j.at(key).get<std::vector<int>>();
  if (r.size() != 2) throw ParseError(std::string(key) + " must be [min, max]");
  lo = r[0];
  hi = r[1];
}

}  // namespace detail

inline TaskGenConfig task_config_from_json(const nlohmann::json& j, TaskGenConfig c = {}) {
  try {
    detail::take(j, "n_styles", c.n_styles);
    detail::take(j, "v_text", c.v_text);
    detail::take_range(j, "text_len", c.text_len_min, c.text_len_max);
    detail::take_range(j, "op_len", c.op_len_min, c.op_len_max);
    detail::take_range(j, "prompt_len", c.prompt_len_min, c.prompt_len_max);
    detail::take(j, "prompt_style", c.prompt_style);
    detail::take(j, "identity_tables", c.identity_tables);
    detail::take(j, "n_q", c.n_q);
    detail::take(j, "v_ac", c.v_ac);
    detail::take(j, "n_train", c.n_train);
    detail::take(j, "n_test", c.n_test);
    detail::take(j, "seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("task spec: ") + e.what());
  }
  return c;
}

inline ojson spec_to_json(const StyleCopySpec& s) {
  ojson j;
  j["n_styles"] = s.n_styles;
  j["v_text"] = s.v_text;
  j["v_sem"] = s.v_sem;
  j["markers"] = s.markers;
  j["tables"] = s.tables;
  j["text_len"] = {s.text_len_min, s.text_len_max};
  j["op_len"] = {s.op_len_min, s.op_len_max};
  j["prompt_len"] = {s.prompt_len_min, s.prompt_len_max};
  j["prompt_style"] = s.prompt_style == PromptStyle::neutral ? "neutral" : "matched";
  j["n_q"] = s.n_q;
  j["v_ac"] = s.v_ac;
  j["seed"] = s.seed;
  return j;
}

inline StyleCopySpec spec_from_json(const nlohmann::json& j) {
  StyleCopySpec s;
  try {
    s.n_styles = j.at("n_styles").get<int>();
    s.v_text = j.at("v_text").get<int>();
    s.v_sem = j.at("v_sem").get<int>();
    s.markers = j.at("markers").get<std::vector<std::vector<int>>>();
    s.tables = j.at("tables").get<std::vector<std::vector<int>>>();
    detail::take_range(j, "text_len", s.text_len_min, s.text_len_max);
    detail::take_range(j, "op_len", s.op_len_min, s.op_len_max);
    detail::take_range(j, "prompt_len", s.prompt_len_min, s.prompt_len_max);
    s.prompt_style = j.value("prompt_style", std::string("neutral")) == "matched" ? PromptStyle::matched : PromptStyle::neutral;
    detail::take(j, "n_q", s.n_q);
    detail::take(j, "v_ac", s.v_ac);
    detail::take(j, "seed", s.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("style-copy spec: ") + e.what());
  }
  s.validate();
  return s;
}

// Text ids are written as letters 'a', 'b', ... so the "text" field stays a string.
inline CharTokenizer task_tokenizer(int v_text) { return CharTokenizer::latin(v_text); }

inline TokenRecord to_record(const StyleCopySpec& spec, const StyleCopyItem& it) {
  TokenRecord r;
  r.utt_id = it.utt_id;
  r.semantic = it.s_target.tokens;
  r.acoustic = codec_encode(it.s_target.tokens, spec.n_q, spec.v_ac).to_layers();
  r.text = task_tokenizer(spec.v_text).decode(it.text);
  r.s_op = it.s_op.tokens;
  r.s_prompt = it.s_prompt.tokens;
  r.style = it.style;
  r.prompt_acoustic = codec_encode(it.s_prompt.tokens, spec.n_q, spec.v_ac).to_layers();
  return r;
}

struct ConditionedRecord {
  SemanticSequence s_op{{}, SemanticSource::opponent};
  TextSequence text;
  SemanticSequence s_prompt{{}, SemanticSource::speaker_prompt};
  SemanticSequence s_target{{}, SemanticSource::target};
};

inline ConditionedRecord conditioned(const TokenRecord& r, const CharTokenizer& tok) {
  if (!r.s_op || !r.s_prompt) throw DataError("record " + r.utt_id + ": missing s_op or s_prompt");
  ConditionedRecord c;
  c.s_op.tokens = *r.s_op;
  c.text = tok.encode(r.text);
  c.s_prompt.tokens = *r.s_prompt;
  c.s_target.tokens = r.semantic;
  return c;
}

// ---------------------------------------------------------------------------
// Model and training configs

inline ojson t2s_config_to_json(const T2SConfig& c) {
  return ojson{{"kind", "t2s"},         {"n_layers", c.n_layers}, {"n_heads", c.n_heads},
               {"d_model", c.d_model},  {"d_ff", c.d_ff},         {"max_seq_len", c.max_seq_len},
               {"v_sem", c.v_sem},      {"v_text", c.v_text}};
}

inline T2SConfig t2s_config_from_json(const nlohmann::json& j, T2SConfig c = {}) {
  try {
    detail::take(j, "n_layers", c.n_layers);
    detail::take(j, "n_heads", c.n_heads);
    detail::take(j, "d_model", c.d_model);
    detail::take(j, "d_ff", c.d_ff);
    detail::take(j, "max_seq_len", c.max_seq_len);
    detail::take(j, "v_sem", c.v_sem);
    detail::take(j, "v_text", c.v_text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("t2s config: ") + e.what());
  }
  c.validate();
  return c;
}

inline ojson s2a_config_to_json(const S2AConfig& c) {
  return ojson{{"kind", "s2a"},        {"n_q", c.n_q},         {"v_ac", c.v_ac},           {"v_sem", c.v_sem},
               {"d_model", c.d_model}, {"n_layers", c.n_layers}, {"n_heads", c.n_heads}, {"d_ff", c.d_ff},
               {"max_frames", c.max_frames}};
}

inline S2AConfig s2a_config_from_json(const nlohmann::json& j, S2AConfig c = {}) {
  try {
    detail::take(j, "n_q", c.n_q);
    detail::take(j, "v_ac", c.v_ac);
    detail::take(j, "v_sem", c.v_sem);
    detail::take(j, "d_model", c.d_model);
    detail::take(j, "n_layers", c.n_layers);
    detail::take(j, "n_heads", c.n_heads);
    detail::take(j, "d_ff", c.d_ff);
    detail::take(j, "max_frames", c.max_frames);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("s2a config: ") + e.what());
  }
  c.validate();
  return c;
}

struct TrainSettings {
  double lr = 1e-3;
  int batch_size = 32;
  int steps = 1500;
  int warmup = 100;
  std::uint64_t seed = 0;
  std::string data_manifest;
};

inline TrainSettings train_settings_from_json(const nlohmann::json& j, TrainSettings s = {}) {
  try {
    detail::take(j, "lr", s.lr);
    detail::take(j, "batch_size", s.batch_size);
    detail::take(j, "steps", s.steps);
    detail::take(j, "warmup", s.warmup);
    detail::take(j, "seed", s.seed);
    detail::take(j, "data_manifest", s.data_manifest);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("train config: ") + e.what());
  }
  if (!(s.lr > 0) || s.batch_size <= 0 || s.steps < 0 || s.warmup < 0)
    throw DomainError("train config: lr and batch_size must be positive, steps and warmup non-negative");
  return s;
}

}  // namespace debatts::io
