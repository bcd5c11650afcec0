#pragma once

// Debate-corpus construction over external tool outputs (diarization RTTM and
// speaker-labelled transcripts):
//   1. moderator detection      detect_moderator
//   2. rebuttal sessions        extract_rebuttal_sessions
//   3. diarization              parse_rttm (segments come from an external toolkit)
//   4. overlap deletion/merge   delete_overlaps, merge_same_speaker
//   5. metadata                 build_pairs, emit_manifest
// Times are compared on an integer millisecond grid.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "debatts/errors.hpp"

namespace debatts::pipeline {

using Millis = std::int64_t;

inline Millis to_ms(double seconds) { return static_cast<Millis>(std::llround(seconds * 1000.0)); }
inline double from_ms(Millis ms) { return static_cast<double>(ms) / 1000.0; }

struct DiarSegment {
  std::string recording_id;
  std::string speaker;
  double onset = 0;
  double duration = 0;

  double end() const { return onset + duration; }
  Millis onset_ms() const { return to_ms(onset); }
  Millis end_ms() const { return to_ms(onset + duration); }

  static DiarSegment from_ms_range(std::string rec, std::string spk, Millis start, Millis end) {
    return {std::move(rec), std::move(spk), from_ms(start), from_ms(end - start)};
  }

  friend bool operator==(const DiarSegment&, const DiarSegment&) = default;
};

struct TranscriptUtterance {
  std::string speaker;
  double start = 0;
  double end = 0;
  std::string text;
  std::optional<std::vector<double>> style_vec;
};

struct RebuttalSession {
  std::string recording_id;
  double t_start = 0;
  double t_end = 0;
  std::string anchor_speaker;

  friend bool operator==(const RebuttalSession&, const RebuttalSession&) = default;
};

struct Turn {
  std::string speaker;
  double start = 0;
  double end = 0;
  std::string text;

  friend bool operator==(const Turn&, const Turn&) = default;
};

struct RebuttalPair {
  std::string pair_id;
  std::string recording_id;
  std::size_t session_index = 0;
  Turn opponent;
  Turn target;
  std::optional<std::vector<double>> style_vec;

  friend bool operator==(const RebuttalPair&, const RebuttalPair&) = default;
};

// ---------------------------------------------------------------------------
// RTTM

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t b = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > b) out.push_back(line.substr(b, i - b));
  }
  return out;
}

inline double parse_seconds(std::string_view field, std::size_t line_no, const char* what) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(v))
    throw ParseError("rttm line " + std::to_string(line_no) + ": malformed " + what + " '" + std::string(field) + "'");
  return v;
}

}  // namespace detail

// One segment per SPEAKER line; every other line type is skipped.
inline std::vector<DiarSegment> parse_rttm(std::string_view text) {
  std::vector<DiarSegment> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    const auto f = detail::split_ws(line);
    if (f.empty() || f[0] != "SPEAKER") continue;
    if (f.size() < 8)
      throw ParseError("rttm line " + std::to_string(line_no) + ": SPEAKER line needs at least 8 fields");
    const double onset = detail::parse_seconds(f[3], line_no, "onset");
    const double dur = detail::parse_seconds(f[4], line_no, "duration");
    if (onset < 0) throw ParseError("rttm line " + std::to_string(line_no) + ": negative onset");
    if (dur <= 0) throw ParseError("rttm line " + std::to_string(line_no) + ": duration must be positive");
    out.push_back({std::string(f[1]), std::string(f[7]), onset, dur});
  }
  return out;
}

inline std::string serialize_rttm(const std::vector<DiarSegment>& segments) {
  std::string out;
  char buf[64];
  for (const auto& s : segments) {
    out += "SPEAKER " + s.recording_id + " 1 ";
    std::snprintf(buf, sizeof buf, "%.3f %.3f", s.onset, s.duration);
    out += buf;
    out += " <NA> <NA> " + s.speaker + " <NA> <NA>\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Moderator detection and session extraction

// Non-overlapping occurrences of every keyword in text.
inline std::size_t keyword_hits(std::string_view text, const std::vector<std::string>& keywords) {
  std::size_t hits = 0;
  for (const auto& k : keywords) {
    if (k.empty()) continue;
    for (std::size_t at = text.find(k); at != std::string_view::npos; at = text.find(k, at + k.size())) ++hits;
  }
  return hits;
}

inline bool has_keyword(std::string_view text, const std::vector<std::string>& keywords) {
  return keyword_hits(text, keywords) > 0;
}

inline std::vector<TranscriptUtterance> sorted_by_start(std::vector<TranscriptUtterance> u) {
  std::stable_sort(u.begin(), u.end(), [](const auto& a, const auto& b) { return to_ms(a.start) < to_ms(b.start); });
  return u;
}

// Speaker with the most keyword hits; ties go to the speaker who spoke first.
inline std::string detect_moderator(const std::vector<TranscriptUtterance>& utterances,
                                    const std::vector<std::string>& lexicon) {
  if (utterances.empty()) throw DomainError("detect_moderator: no utterances");
  if (lexicon.empty()) throw DomainError("detect_moderator: empty lexicon");
  struct Tally {
    std::size_t hits = 0;
    Millis first = 0;
  };
  std::map<std::string, Tally> tally;
  for (const auto& u : utterances) {
    auto [it, fresh] = tally.try_emplace(u.speaker, Tally{0, to_ms(u.start)});
    if (!fresh) it->second.first = std::min(it->second.first, to_ms(u.start));
    it->second.hits += keyword_hits(u.text, lexicon);
  }
  const std::string* best = nullptr;
  Tally best_tally;
  for (const auto& [spk, t] : tally) {
    if (t.hits == 0) continue;
    if (!best || t.hits > best_tally.hits || (t.hits == best_tally.hits && t.first < best_tally.first)) {
      best = &spk;
      best_tally = t;
    }
  }
  if (!best) throw DataError("detect_moderator: no speaker uttered a moderator keyword");
  return *best;
}

struct SessionExtraction {
  std::vector<RebuttalSession> sessions;
  // End keywords seen while no session was open.
  std::size_t stray_end_keywords = 0;
};

// A session opens at the end of an anchor utterance with a start keyword and
// closes at the start of the next anchor utterance with an end keyword, or at
// recording_end. An utterance with both keywords closes the open session and
// then opens a new one.
inline SessionExtraction extract_rebuttal_sessions(const std::vector<TranscriptUtterance>& utterances,
                                                   const std::string& anchor_speaker,
                                                   const std::vector<std::string>& start_keywords,
                                                   const std::vector<std::string>& end_keywords,
                                                   const std::string& recording_id = {},
                                                   std::optional<double> recording_end = std::nullopt) {
  if (start_keywords.empty() || end_keywords.empty())
    throw DomainError("extract_rebuttal_sessions: keyword sets must be nonempty");
  SessionExtraction out;
  constexpr Millis kClosed = -1;
  Millis open = kClosed;
  Millis last_end = 0;
  for (const auto& u : sorted_by_start(utterances)) {
    last_end = std::max(last_end, to_ms(u.end));
    if (u.speaker != anchor_speaker) continue;
    if (has_keyword(u.text, end_keywords)) {
      if (open != kClosed) {
        if (to_ms(u.start) > open) out.sessions.push_back({recording_id, from_ms(open), u.start, anchor_speaker});
        open = kClosed;
      } else {
        ++out.stray_end_keywords;
      }
    }
    if (open == kClosed && has_keyword(u.text, start_keywords)) open = to_ms(u.end);
  }
  if (open != kClosed) {
    const Millis close = recording_end ? to_ms(*recording_end) : last_end;
    if (close > open) out.sessions.push_back({recording_id, from_ms(open), from_ms(close), anchor_speaker});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Interval algebra

namespace detail {

inline void require_single_recording(const std::vector<DiarSegment>& segments, const char* op) {
  for (const auto& s : segments)
    if (s.recording_id != segments.front().recording_id)
      throw DomainError(std::string(op) + ": segments span more than one recording");
}

}  // namespace detail

// Removes every instant claimed by two or more distinct speakers from all
// segments covering it. A segment may split into several pieces; pieces
// shorter than one millisecond vanish. Output is ordered by onset, then by
// input position.
inline std::vector<DiarSegment> delete_overlaps(const std::vector<DiarSegment>& segments) {
  if (segments.empty()) return {};
  detail::require_single_recording(segments, "delete_overlaps");

  // Sweep over boundary events, tracking how many segments of each speaker
  // are active, to find the maximal conflict intervals.
  struct Event {
    Millis t;
    int delta;
    std::size_t speaker;
  };
  std::map<std::string, std::size_t> speaker_ids;
  std::vector<Event> events;
  for (const auto& s : segments) {
    const auto id = speaker_ids.try_emplace(s.speaker, speaker_ids.size()).first->second;
    if (s.end_ms() <= s.onset_ms()) continue;
    events.push_back({s.onset_ms(), +1, id});
    events.push_back({s.end_ms(), -1, id});
  }
  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) { return a.t < b.t; });
  std::vector<int> active(speaker_ids.size(), 0);
  std::size_t distinct = 0;
  std::vector<std::pair<Millis, Millis>> conflicts;
  std::optional<Millis> conflict_start;
  for (std::size_t i = 0; i < events.size();) {
    const Millis t = events[i].t;
    for (; i < events.size() && events[i].t == t; ++i) {
      int& a = active[events[i].speaker];
      if (events[i].delta > 0 && a++ == 0) ++distinct;
      if (events[i].delta < 0 && --a == 0) --distinct;
    }
    if (distinct >= 2 && !conflict_start) conflict_start = t;
    if (distinct < 2 && conflict_start) {
      conflicts.emplace_back(*conflict_start, t);
      conflict_start.reset();
    }
  }

  struct Piece {
    Millis start;
    std::size_t order;
    DiarSegment seg;
  };
  std::vector<Piece> pieces;
  for (std::size_t idx = 0; idx < segments.size(); ++idx) {
    const auto& s = segments[idx];
    Millis cur = s.onset_ms();
    const Millis end = s.end_ms();
    auto it = std::lower_bound(conflicts.begin(), conflicts.end(), cur,
                               [](const auto& c, Millis t) { return c.second <= t; });
    for (; it != conflicts.end() && it->first < end && cur < end; ++it) {
      if (it->first > cur) pieces.push_back({cur, idx, DiarSegment::from_ms_range(s.recording_id, s.speaker, cur, it->first)});
      cur = std::max(cur, it->second);
    }
    if (cur < end) pieces.push_back({cur, idx, DiarSegment::from_ms_range(s.recording_id, s.speaker, cur, end)});
  }
  std::stable_sort(pieces.begin(), pieces.end(), [](const Piece& a, const Piece& b) {
    return a.start != b.start ? a.start < b.start : a.order < b.order;
  });
  std::vector<DiarSegment> out;
  out.reserve(pieces.size());
  for (auto& p : pieces) out.push_back(std::move(p.seg));
  return out;
}

// Joins neighbouring segments of the same speaker (adjacent in onset order,
// no other speaker between them) whose gap is at most max_gap seconds.
inline std::vector<DiarSegment> merge_same_speaker(const std::vector<DiarSegment>& segments, double max_gap) {
  if (!(max_gap >= 0)) throw DomainError("merge_same_speaker: max_gap must be non-negative");
  if (segments.empty()) return {};
  detail::require_single_recording(segments, "merge_same_speaker");
  const Millis gap = to_ms(max_gap);
  std::vector<std::size_t> order(segments.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return segments[a].onset_ms() < segments[b].onset_ms();
  });
  std::vector<DiarSegment> out;
  Millis cur_start = 0, cur_end = 0;
  const DiarSegment* cur = nullptr;
  for (std::size_t i : order) {
    const auto& s = segments[i];
    if (cur && s.speaker == cur->speaker && s.onset_ms() - cur_end <= gap) {
      cur_end = std::max(cur_end, s.end_ms());
      continue;
    }
    if (cur) out.push_back(DiarSegment::from_ms_range(cur->recording_id, cur->speaker, cur_start, cur_end));
    cur = &s;
    cur_start = s.onset_ms();
    cur_end = s.end_ms();
  }
  out.push_back(DiarSegment::from_ms_range(cur->recording_id, cur->speaker, cur_start, cur_end));
  return out;
}

// ---------------------------------------------------------------------------
// Pair construction

struct PairBuild {
  std::vector<RebuttalPair> pairs;
  // Sessions skipped for having fewer than two non-anchor speakers.
  std::size_t sessions_without_pairs = 0;
};

inline std::string make_pair_id(const std::string& recording_id, std::size_t session, std::size_t pair) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "-s%03zu-p%03zu", session, pair);
  return recording_id + buf;
}

namespace detail {

struct TurnSpan {
  std::string speaker;
  Millis start;
  Millis end;
};

// Utterances of `speaker` whose midpoint falls inside the turn, in order.
inline void attach_text(const TurnSpan& t, const std::vector<TranscriptUtterance>& utterances, Turn& turn,
                        std::optional<std::vector<double>>* style) {
  std::vector<const TranscriptUtterance*> hits;
  for (const auto& u : utterances) {
    if (u.speaker != t.speaker) continue;
    const Millis mid = (to_ms(u.start) + to_ms(u.end)) / 2;
    if (mid >= t.start && mid < t.end) hits.push_back(&u);
  }
  for (const auto* u : hits) {
    if (!turn.text.empty()) turn.text += ' ';
    turn.text += u->text;
  }
  if (!style) return;
  // Mean of the utterance style vectors when every utterance supplies one of
  // the same width.
  if (hits.empty()) return;
  std::vector<double> acc;
  for (const auto* u : hits) {
    if (!u->style_vec) return;
    if (acc.empty()) acc.assign(u->style_vec->size(), 0.0);
    if (u->style_vec->size() != acc.size()) return;
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += (*u->style_vec)[i];
  }
  for (auto& x : acc) x /= static_cast<double>(hits.size());
  *style = std::move(acc);
}

}  // namespace detail

// Within each session, consecutive maximal same-speaker turns form
// (opponent, target) pairs. Anchor-speaker speech is dropped before turns are
// formed. Segments are clipped to the session window.
inline PairBuild build_pairs(const std::vector<RebuttalSession>& sessions, const std::vector<DiarSegment>& segments,
                             const std::vector<TranscriptUtterance>& utterances) {
  PairBuild out;
  const auto utts = sorted_by_start(utterances);
  for (std::size_t si = 0; si < sessions.size(); ++si) {
    const auto& sess = sessions[si];
    const Millis ws = to_ms(sess.t_start), we = to_ms(sess.t_end);
    std::vector<detail::TurnSpan> clipped;
    for (const auto& s : segments) {
      if (s.recording_id != sess.recording_id || s.speaker == sess.anchor_speaker) continue;
      const Millis a = std::max(ws, s.onset_ms()), b = std::min(we, s.end_ms());
      if (a < b) clipped.push_back({s.speaker, a, b});
    }
    std::stable_sort(clipped.begin(), clipped.end(), [](const auto& x, const auto& y) { return x.start < y.start; });
    std::vector<detail::TurnSpan> turns;
    std::set<std::string> speakers;
    for (const auto& c : clipped) {
      speakers.insert(c.speaker);
      if (!turns.empty() && turns.back().speaker == c.speaker)
        turns.back().end = std::max(turns.back().end, c.end);
      else
        turns.push_back(c);
    }
    if (speakers.size() < 2) {
      ++out.sessions_without_pairs;
      continue;
    }
    for (std::size_t k = 0; k + 1 < turns.size(); ++k) {
      RebuttalPair p;
      p.pair_id = make_pair_id(sess.recording_id, si, k);
      p.recording_id = sess.recording_id;
      p.session_index = si;
      p.opponent = {turns[k].speaker, from_ms(turns[k].start), from_ms(turns[k].end), {}};
      p.target = {turns[k + 1].speaker, from_ms(turns[k + 1].start), from_ms(turns[k + 1].end), {}};
      detail::attach_text(turns[k], utts, p.opponent, nullptr);
      detail::attach_text(turns[k + 1], utts, p.target, &p.style_vec);
      out.pairs.push_back(std::move(p));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Manifest

inline nlohmann::ordered_json pair_to_json(const RebuttalPair& p) {
  nlohmann::ordered_json j;
  j["pair_id"] = p.pair_id;
  j["recording_id"] = p.recording_id;
  j["opp_spk"] = p.opponent.speaker;
  j["tgt_spk"] = p.target.speaker;
  j["opp_window"] = {p.opponent.start, p.opponent.end};
  j["tgt_window"] = {p.target.start, p.target.end};
  j["opp_text"] = p.opponent.text;
  j["tgt_text"] = p.target.text;
  if (p.style_vec) {
    for (double v : *p.style_vec)
      if (!std::isfinite(v)) throw DataError("emit_manifest: pair " + p.pair_id + ": non-finite style vector entry");
    j["style_vec"] = *p.style_vec;
  } else {
    j["style_vec"] = nullptr;
  }
  return j;
}

// One JSON object per line with a fixed field order.
inline void emit_manifest(const std::vector<RebuttalPair>& pairs, std::ostream& os) {
  for (const auto& p : pairs) {
    std::string line;
    try {
      line = pair_to_json(p).dump();
    } catch (const nlohmann::json::exception& e) {
      throw DataError("emit_manifest: pair " + p.pair_id + ": " + e.what());
    }
    os << line << '\n';
  }
  if (!os) throw DataError("emit_manifest: write failed");
}

inline std::size_t session_from_pair_id(const std::string& id) {
  const auto s = id.rfind("-s");
  if (s == std::string::npos) return 0;
  std::size_t v = 0;
  std::from_chars(id.data() + s + 2, id.data() + id.size(), v);
  return v;
}

inline std::vector<RebuttalPair> parse_manifest(std::istream& is) {
  std::vector<RebuttalPair> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      RebuttalPair p;
      p.pair_id = j.at("pair_id").get<std::string>();
      p.recording_id = j.at("recording_id").get<std::string>();
      p.session_index = session_from_pair_id(p.pair_id);
      const auto ow = j.at("opp_window").get<std::vector<double>>();
      const auto tw = j.at("tgt_window").get<std::vector<double>>();
      if (ow.size() != 2 || tw.size() != 2) throw ParseError("window must have two entries");
      p.opponent = {j.at("opp_spk").get<std::string>(), ow[0], ow[1], j.at("opp_text").get<std::string>()};
      p.target = {j.at("tgt_spk").get<std::string>(), tw[0], tw[1], j.at("tgt_text").get<std::string>()};
      if (!j.at("style_vec").is_null()) p.style_vec = j.at("style_vec").get<std::vector<double>>();
      out.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("manifest line " + std::to_string(line_no) + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError("manifest line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

struct CorpusStats {
  std::size_t n_pairs = 0;
  std::size_t n_speakers = 0;
  double total_hours = 0;
  std::size_t n_sessions = 0;
};

// Speakers are distinct (recording, label) pairs; hours count every distinct
// turn window once even when it serves as both target and opponent.
inline CorpusStats compute_stats(const std::vector<RebuttalPair>& pairs) {
  CorpusStats st;
  st.n_pairs = pairs.size();
  std::set<std::pair<std::string, std::string>> speakers;
  std::set<std::pair<std::string, std::size_t>> sessions;
  std::set<std::tuple<std::string, std::string, Millis, Millis>> turns;
  for (const auto& p : pairs) {
    speakers.emplace(p.recording_id, p.opponent.speaker);
    speakers.emplace(p.recording_id, p.target.speaker);
    sessions.emplace(p.recording_id, p.session_index);
    for (const Turn* t : {&p.opponent, &p.target}) turns.emplace(p.recording_id, t->speaker, to_ms(t->start), to_ms(t->end));
  }
  Millis total = 0;
  for (const auto& t : turns) total += std::get<3>(t) - std::get<2>(t);
  st.n_speakers = speakers.size();
  st.n_sessions = sessions.size();
  st.total_hours = static_cast<double>(total) / 3.6e6;
  return st;
}

inline nlohmann::ordered_json stats_to_json(const CorpusStats& st) {
  nlohmann::ordered_json j;
  j["n_pairs"] = st.n_pairs;
  j["n_speakers"] = st.n_speakers;
  j["total_hours"] = st.total_hours;
  j["n_sessions"] = st.n_sessions;
  j["speaker_count_method"] = "distinct diarization labels per recording";
  return j;
}

// ---------------------------------------------------------------------------
// Per-recording driver

struct Lexicons {
  std::vector<std::string> moderator;
  std::vector<std::string> session_start;
  std::vector<std::string> session_end;
};

struct RecordingResult {
  std::string recording_id;
  std::string moderator;
  std::vector<RebuttalSession> sessions;
  std::vector<DiarSegment> cleaned_segments;
  PairBuild pairs;
  std::size_t stray_end_keywords = 0;
};

inline RecordingResult run_recording(const std::string& recording_id, const std::vector<DiarSegment>& segments,
                                     const std::vector<TranscriptUtterance>& utterances, const Lexicons& lex,
                                     double max_gap = 1.0) {
  RecordingResult r;
  r.recording_id = recording_id;
  r.moderator = detect_moderator(utterances, lex.moderator);
  auto ex = extract_rebuttal_sessions(utterances, r.moderator, lex.session_start, lex.session_end, recording_id);
  r.sessions = std::move(ex.sessions);
  r.stray_end_keywords = ex.stray_end_keywords;
  r.cleaned_segments = merge_same_speaker(delete_overlaps(segments), max_gap);
  r.pairs = build_pairs(r.sessions, r.cleaned_segments, utterances);
  return r;
}

// Transcript JSONL: {"speaker", "start", "end", "text"} plus optional
// "style_vec".
inline std::vector<TranscriptUtterance> parse_transcript(std::istream& is) {
  std::vector<TranscriptUtterance> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      TranscriptUtterance u;
      u.speaker = j.at("speaker").get<std::string>();
      u.start = j.at("start").get<double>();
      u.end = j.at("end").get<double>();
      u.text = j.at("text").get<std::string>();
      if (j.contains("style_vec") && !j["style_vec"].is_null()) u.style_vec = j["style_vec"].get<std::vector<double>>();
      if (!(u.start < u.end)) throw ParseError("start must precede end");
      out.push_back(std::move(u));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("transcript line " + std::to_string(line_no) + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError("transcript line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

// One keyword per line; surrounding whitespace trimmed, blank lines skipped.
inline std::vector<std::string> parse_keywords(std::istream& is) {
  std::vector<std::string> out;
  std::string line;
  while (std::getline(is, line)) {
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    out.push_back(line.substr(b, e - b + 1));
  }
  return out;
}

}  // namespace debatts::pipeline
