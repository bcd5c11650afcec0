#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "debatts/checkpoint.hpp"
#include "debatts/errors.hpp"
#include "debatts/metrics.hpp"
#include "debatts/pipeline.hpp"
#include "debatts/s2a.hpp"
#include "debatts/synthetic.hpp"
#include "debatts/t2s.hpp"
#include "debatts/token_io.hpp"
#include "debatts/train.hpp"

namespace fs = std::filesystem;
using namespace debatts;
using io::ojson;

namespace {

constexpr const char* kPrecedence =
    "Settings precedence: values in a JSON --config/--spec file override command-line flags, which override "
    "built-in defaults.";

void log_kv(const std::string& line) {
  static std::mutex mu;
  std::lock_guard lock(mu);
  std::cerr << line << '\n';
}

std::string fmt4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string read_text(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw DataError("cannot open '" + p.string() + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary);
  if (!os) throw DataError("cannot open '" + p.string() + "' for writing");
  return os;
}

std::vector<std::string> read_keywords(const fs::path& p) {
  std::ifstream is(p);
  if (!is) throw DataError("cannot open keyword file '" + p.string() + "'");
  return pipeline::parse_keywords(is);
}

// ---------------------------------------------------------------------------
// pipeline

struct PipelineArgs {
  std::string rttm, transcripts, keywords, out, config;
  double max_gap = 1.0;
  int jobs = 1;
};

int cmd_pipeline_run(PipelineArgs a) {
  if (!a.config.empty()) {
    const auto j = io::read_json_file(a.config);
    a.max_gap = j.value("max_gap", a.max_gap);
    a.jobs = j.value("jobs", a.jobs);
  }
  if (a.jobs < 1) throw DomainError("--jobs must be at least 1");
  pipeline::Lexicons lex{read_keywords(fs::path(a.keywords) / "moderator.txt"),
                         read_keywords(fs::path(a.keywords) / "start.txt"),
                         read_keywords(fs::path(a.keywords) / "end.txt")};

  std::vector<fs::path> rttms;
  for (const auto& e : fs::directory_iterator(a.rttm))
    if (e.is_regular_file() && e.path().extension() == ".rttm") rttms.push_back(e.path());
  std::sort(rttms.begin(), rttms.end());
  if (rttms.empty()) throw DataError("no .rttm files in '" + a.rttm + "'");

  std::vector<pipeline::RecordingResult> results(rttms.size());
  std::vector<std::exception_ptr> failures(rttms.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < rttms.size();) {
      try {
        const std::string rec = rttms[i].stem().string();
        auto segs = pipeline::parse_rttm(read_text(rttms[i]));
        for (const auto& s : segs)
          if (s.recording_id != rec)
            throw DataError(rttms[i].string() + ": segment for recording '" + s.recording_id + "'");
        std::ifstream ts(fs::path(a.transcripts) / (rec + ".jsonl"));
        if (!ts) throw DataError("missing transcript for recording '" + rec + "'");
        const auto utts = pipeline::parse_transcript(ts);
        results[i] = pipeline::run_recording(rec, segs, utts, lex, a.max_gap);
        log_kv("event=recording id=" + rec + " moderator=" + results[i].moderator +
               " sessions=" + std::to_string(results[i].sessions.size()) +
               " pairs=" + std::to_string(results[i].pairs.pairs.size()) +
               " sessions_without_pairs=" + std::to_string(results[i].pairs.sessions_without_pairs) +
               " stray_end_keywords=" + std::to_string(results[i].stray_end_keywords));
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const int n_threads = std::min<int>(a.jobs, static_cast<int>(rttms.size()));
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);

  std::vector<pipeline::RebuttalPair> pairs;
  for (const auto& r : results) pairs.insert(pairs.end(), r.pairs.pairs.begin(), r.pairs.pairs.end());
  auto os = open_out(a.out);
  pipeline::emit_manifest(pairs, os);
  std::cout << pipeline::stats_to_json(pipeline::compute_stats(pairs)).dump() << '\n';
  return 0;
}

int cmd_pipeline_stats(const std::string& manifest, const std::string& out) {
  std::ifstream is(manifest);
  if (!is) throw DataError("cannot open '" + manifest + "'");
  const auto j = pipeline::stats_to_json(pipeline::compute_stats(pipeline::parse_manifest(is)));
  if (out.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    auto os = open_out(out);
    os << j.dump(2) << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------
// task gen

int cmd_task_gen(const std::string& spec_path, const std::string& out, io::TaskGenConfig cfg) {
  if (!spec_path.empty()) cfg = io::task_config_from_json(io::read_json_file(spec_path), cfg);
  const auto spec = cfg.spec();
  const auto corpus = gen_corpus(spec, cfg.n_train, cfg.n_test);
  fs::create_directories(out);
  auto dump = [&](const std::vector<StyleCopyItem>& items, const char* name) {
    std::vector<io::TokenRecord> recs;
    for (const auto& it : items) recs.push_back(io::to_record(spec, it));
    auto os = open_out(fs::path(out) / name);
    io::write_records(recs, os);
  };
  dump(corpus.train, "train.jsonl");
  dump(corpus.test, "test.jsonl");
  auto os = open_out(fs::path(out) / "spec.json");
  os << io::spec_to_json(spec).dump(2) << '\n';
  log_kv("event=task_gen n_train=" + std::to_string(corpus.train.size()) +
         " n_test=" + std::to_string(corpus.test.size()) + " seed=" + std::to_string(spec.seed));
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string config, data, out;
  io::TrainSettings settings;
  int log_every = 50;
};

void log_progress(const char* stage, const TrainProgress& p) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "event=train stage=%s step=%d loss=%.6f lr=%.6g seconds=%.1f", stage, p.step, p.loss,
                p.lr, p.seconds);
  log_kv(buf);
}

template <class Cfg, class ToJson>
void write_model_dir(const fs::path& dir, const ParameterSet<float>& params, const Cfg& cfg, ToJson to_json) {
  fs::create_directories(dir);
  checkpoint::save(params, (dir / "model.ckpt").string());
  auto os = open_out(dir / "config.json");
  os << to_json(cfg).dump(2) << '\n';
}

int cmd_train_t2s(TrainArgs a, T2SConfig mc) {
  if (!a.config.empty()) {
    const auto j = io::read_json_file(a.config);
    mc = io::t2s_config_from_json(j, mc);
    a.settings = io::train_settings_from_json(j, a.settings);
  }
  if (!a.settings.data_manifest.empty()) a.data = a.settings.data_manifest;
  if (a.data.empty()) throw DomainError("training data manifest required (--data or data_manifest)");
  mc.validate();
  const auto data = t2s_examples(io::read_records(a.data), mc);
  T2SModel<float> model(mc, a.settings.seed);
  log_kv("event=train_start stage=t2s examples=" + std::to_string(data.size()) +
         " params=" + std::to_string(model.params().numel()) + " steps=" + std::to_string(a.settings.steps));
  train_t2s(model, data, a.settings, [](const TrainProgress& p) { log_progress("t2s", p); }, a.log_every);
  write_model_dir(a.out, model.params(), mc, io::t2s_config_to_json);
  return 0;
}

int cmd_train_s2a(TrainArgs a, S2AConfig mc) {
  if (!a.config.empty()) {
    const auto j = io::read_json_file(a.config);
    mc = io::s2a_config_from_json(j, mc);
    a.settings = io::train_settings_from_json(j, a.settings);
  }
  if (!a.settings.data_manifest.empty()) a.data = a.settings.data_manifest;
  if (a.data.empty()) throw DomainError("training data manifest required (--data or data_manifest)");
  mc.validate();
  const auto data = s2a_examples(io::read_records(a.data));
  S2AModel<float> model(mc, a.settings.seed);
  log_kv("event=train_start stage=s2a examples=" + std::to_string(data.size()) +
         " params=" + std::to_string(model.params().numel()) + " steps=" + std::to_string(a.settings.steps));
  train_s2a(model, data, a.settings, [](const TrainProgress& p) { log_progress("s2a", p); }, a.log_every);
  write_model_dir(a.out, model.params(), mc, io::s2a_config_to_json);
  return 0;
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  std::string t2s_dir, s2a_dir, input, out;
  bool greedy = false;
  std::uint64_t seed = 0;
  int max_new_tokens = 64;
  int top_k = 10;
  double temperature = 0.8;
  int first_layer_iters = 8;
  int other_layer_iters = 1;
};

int cmd_synth(const SynthArgs& a) {
  const auto t2s_cfg = io::t2s_config_from_json(io::read_json_file((fs::path(a.t2s_dir) / "config.json").string()));
  T2SModel<float> t2s(t2s_cfg, 0);
  checkpoint::load(t2s.params(), (fs::path(a.t2s_dir) / "model.ckpt").string());
  const auto s2a_cfg = io::s2a_config_from_json(io::read_json_file((fs::path(a.s2a_dir) / "config.json").string()));
  S2AModel<float> s2a(s2a_cfg, 0);
  checkpoint::load(s2a.params(), (fs::path(a.s2a_dir) / "model.ckpt").string());
  if (s2a_cfg.v_sem < t2s_cfg.v_sem) throw DomainError("s2a semantic vocabulary smaller than t2s semantic vocabulary");

  const auto tok = io::task_tokenizer(t2s_cfg.v_text);
  const auto records = io::read_records(a.input);
  std::vector<io::TokenRecord> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const auto c = io::conditioned(r, tok);
    const std::size_t prefix = assemble_t2s_input(c.s_op, c.text, c.s_prompt, std::nullopt, t2s.vocab()).ids.size();
    const int budget = std::max(0, std::min(a.max_new_tokens, t2s_cfg.max_seq_len - static_cast<int>(prefix)));
    SamplingConfig sc = a.greedy ? SamplingConfig::greedy(budget) : SamplingConfig{};
    sc.max_new_tokens = budget;
    if (!a.greedy) {
      sc.k = a.top_k;
      sc.temperature = a.temperature;
    }
    sc.seed = a.seed + i;
    const auto sem = generate(t2s, c.s_op, c.text, c.s_prompt, sc);

    std::vector<int> frames;
    AcousticGrid prompt(static_cast<std::size_t>(s2a_cfg.n_q), 0);
    if (r.prompt_acoustic) {
      prompt = AcousticGrid::from_layers(*r.prompt_acoustic);
      frames = c.s_prompt.tokens;
    }
    frames.insert(frames.end(), sem.tokens.begin(), sem.tokens.end());
    S2ADecodeConfig dc;
    dc.first_layer_iters = a.first_layer_iters;
    dc.other_layer_iters = a.other_layer_iters;
    dc.greedy = a.greedy;
    dc.temperature = a.greedy ? 1.0 : a.temperature;
    dc.seed = a.seed + i;
    const auto grid = s2a_decode(s2a, frames, prompt, dc);

    io::TokenRecord o;
    o.utt_id = r.utt_id;
    o.semantic = sem.tokens;
    std::vector<std::vector<int>> layers;
    for (std::size_t j = 0; j < grid.n_layers(); ++j) {
      const auto l = grid.layer(j);
      layers.emplace_back(l.begin() + static_cast<std::ptrdiff_t>(prompt.n_frames()), l.end());
    }
    o.acoustic = std::move(layers);
    o.text = r.text;
    out.push_back(std::move(o));
  }
  auto os = open_out(a.out);
  io::write_records(out, os);
  log_kv("event=synth records=" + std::to_string(out.size()) + " greedy=" + (a.greedy ? "1" : "0") +
         " seed=" + std::to_string(a.seed));
  return 0;
}

// ---------------------------------------------------------------------------
// eval

std::vector<nlohmann::json> read_jsonl(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open '" + path + "'");
  std::vector<nlohmann::json> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

// utt_id -> field, in file order.
template <class V>
std::vector<std::pair<std::string, V>> keyed(const std::string& path, const char* field) {
  std::vector<std::pair<std::string, V>> out;
  for (const auto& j : read_jsonl(path)) {
    try {
      out.emplace_back(j.at("utt_id").get<std::string>(), j.at(field).get<V>());
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + ": " + e.what());
    }
  }
  return out;
}

// Pairs reference entries with hypothesis entries by utt_id.
template <class V>
std::vector<std::pair<V, V>> align(const std::string& ref_path, const std::string& hyp_path, const char* field) {
  const auto ref = keyed<V>(ref_path, field);
  std::map<std::string, V> hyp;
  for (auto& [k, v] : keyed<V>(hyp_path, field))
    if (!hyp.emplace(k, v).second) throw DataError(hyp_path + ": duplicate utt_id '" + k + "'");
  if (ref.empty()) throw DataError(ref_path + ": no entries");
  std::vector<std::pair<V, V>> out;
  for (const auto& [k, v] : ref) {
    auto it = hyp.find(k);
    if (it == hyp.end()) throw DataError(hyp_path + ": missing utt_id '" + k + "'");
    out.emplace_back(v, it->second);
  }
  return out;
}

std::vector<std::string> units(const std::string& text, const std::string& unit) {
  std::vector<std::string> out;
  if (unit == "char") {
    for (std::size_t i = 0; i < text.size();) {
      std::size_t n = 1;
      const auto c = static_cast<unsigned char>(text[i]);
      if (c >= 0xF0) n = 4;
      else if (c >= 0xE0) n = 3;
      else if (c >= 0xC0) n = 2;
      if (c != ' ') out.push_back(text.substr(i, n));
      i += n;
    }
  } else {
    std::istringstream ss(text);
    for (std::string w; ss >> w;) out.push_back(w);
  }
  return out;
}

double corpus_wer(const std::string& ref, const std::string& hyp, const std::string& field, const std::string& unit) {
  std::size_t edits = 0, total = 0;
  if (field == "semantic") {
    for (const auto& [r, h] : align<std::vector<int>>(ref, hyp, "semantic")) {
      edits += metrics::edit_distance(std::span<const int>(r), std::span<const int>(h));
      total += r.size();
    }
  } else {
    for (const auto& [r, h] : align<std::string>(ref, hyp, "text")) {
      const auto ru = units(r, unit), hu = units(h, unit);
      edits += metrics::edit_distance(std::span<const std::string>(ru), std::span<const std::string>(hu));
      total += ru.size();
    }
  }
  if (total == 0) throw DomainError("wer: reference has no tokens");
  return static_cast<double>(edits) / static_cast<double>(total);
}

double mean_similarity(const std::string& ref, const std::string& hyp) {
  double acc = 0;
  const auto pairs = align<std::vector<double>>(ref, hyp, "vec");
  for (const auto& [r, h] : pairs) acc += metrics::cosine_similarity(r, h);
  return acc / static_cast<double>(pairs.size());
}

double consistency(const std::string& ref, const std::string& hyp) {
  std::vector<std::string> g, r;
  for (const auto& [a, b] : align<std::string>(ref, hyp, "label")) {
    r.push_back(a);
    g.push_back(b);
  }
  return metrics::style_consistency(g, r);
}

struct EvalArgs {
  std::string ref, hyp, out, field = "text", unit = "word";
  std::string spk_ref, spk_hyp, style_ref, style_hyp, label_ref, label_hyp;
};

void emit_report(const std::vector<std::pair<std::string, std::optional<double>>>& entries,
                 const std::vector<std::pair<std::string, std::string>>& notes, const std::string& out) {
  std::string s = "{";
  bool first = true;
  for (const auto& [k, v] : entries) {
    s += (first ? "\"" : ", \"") + k + "\": " + (v ? fmt4(*v) : "null");
    first = false;
  }
  for (const auto& [k, v] : notes) s += (first ? "\"" : ", \"") + k + "\": " + nlohmann::json(v).dump();
  s += "}\n";
  if (out.empty()) {
    std::cout << s;
  } else {
    auto os = open_out(out);
    os << s;
  }
}

const std::pair<std::string, std::string> kConsistNote{"style_consist_method",
                                                       "per-utterance label agreement averaged over utterances"};

int cmd_eval(const std::string& which, const EvalArgs& a) {
  if (which == "wer") {
    emit_report({{"wer", corpus_wer(a.ref, a.hyp, a.field, a.unit)}}, {}, a.out);
  } else if (which == "sim") {
    emit_report({{"sim", mean_similarity(a.ref, a.hyp)}}, {}, a.out);
  } else if (which == "consist") {
    emit_report({{"style_consist", consistency(a.ref, a.hyp)}}, {kConsistNote}, a.out);
  } else {
    std::optional<double> w, sp, st, sc;
    if (!a.ref.empty() && !a.hyp.empty()) w = corpus_wer(a.ref, a.hyp, a.field, a.unit);
    if (!a.spk_ref.empty() && !a.spk_hyp.empty()) sp = mean_similarity(a.spk_ref, a.spk_hyp);
    if (!a.style_ref.empty() && !a.style_hyp.empty()) st = mean_similarity(a.style_ref, a.style_hyp);
    if (!a.label_ref.empty() && !a.label_hyp.empty()) sc = consistency(a.label_ref, a.label_hyp);
    emit_report({{"wer", w}, {"sim_spk", sp}, {"sim_style", st}, {"style_consist", sc}}, {kConsistNote}, a.out);
  }
  return 0;
}

int run(int argc, char** argv) {
  CLI::App app{"debatts: two-stage opponent-conditioned TTS toolkit at desk scale.\n" + std::string(kPrecedence)};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("debatts ") + DEBATTS_BUILD_ID);

  // pipeline
  auto* pipe = app.add_subcommand("pipeline", "Build rebuttal-pair manifests from diarization and transcripts");
  pipe->require_subcommand(1);
  PipelineArgs pa;
  auto* prun = pipe->add_subcommand("run", std::string("Process every recording in --rttm. ") + kPrecedence);
  prun->add_option("--rttm", pa.rttm, "Directory of <recording>.rttm files")->required()->check(CLI::ExistingDirectory);
  prun->add_option("--transcripts", pa.transcripts, "Directory of <recording>.jsonl transcripts")
      ->required()
      ->check(CLI::ExistingDirectory);
  prun->add_option("--keywords", pa.keywords, "Directory with moderator.txt, start.txt, end.txt")
      ->required()
      ->check(CLI::ExistingDirectory);
  prun->add_option("--out", pa.out, "Output pair manifest (JSONL)")->required();
  prun->add_option("--max-gap", pa.max_gap, "Same-speaker merge gap in seconds")->capture_default_str();
  prun->add_option("--jobs", pa.jobs, "Recordings processed in parallel")->capture_default_str();
  prun->add_option("--config", pa.config, "JSON with max_gap and/or jobs");
  std::string stats_manifest, stats_out;
  auto* pstats = pipe->add_subcommand("stats", "Corpus statistics of a pair manifest");
  pstats->add_option("--manifest", stats_manifest)->required()->check(CLI::ExistingFile);
  pstats->add_option("--out", stats_out, "Write the stats JSON here instead of stdout");

  // task gen
  auto* task = app.add_subcommand("task", "Synthetic style-copy corpus");
  task->require_subcommand(1);
  io::TaskGenConfig tg;
  std::string spec_path, task_out;
  auto* tgen = task->add_subcommand("gen", std::string("Write train.jsonl, test.jsonl and spec.json. ") + kPrecedence);
  tgen->add_option("--spec", spec_path, "Task JSON (n_styles, v_text, text_len, op_len, prompt_len, prompt_style, "
                                        "identity_tables, n_q, v_ac, n_train, n_test, seed)")
      ->check(CLI::ExistingFile);
  tgen->add_option("--out", task_out, "Output directory")->required();
  tgen->add_option("--seed", tg.seed)->capture_default_str();
  tgen->add_option("--n-train", tg.n_train)->capture_default_str();
  tgen->add_option("--n-test", tg.n_test)->capture_default_str();
  tgen->add_option("--prompt-style", tg.prompt_style)->check(CLI::IsMember({"neutral", "matched"}))->capture_default_str();

  // train
  auto* train = app.add_subcommand("train", "Train a stage model");
  train->require_subcommand(1);
  TrainArgs ta;
  T2SConfig t2s_cfg;
  S2AConfig s2a_cfg;
  auto add_train_flags = [&](CLI::App* sc) {
    sc->add_option("--config", ta.config, "JSON with model sizes and lr, batch_size, steps, warmup, seed, data_manifest")
        ->check(CLI::ExistingFile);
    sc->add_option("--data", ta.data, "Token-sequence JSONL with style-copy fields");
    sc->add_option("--out", ta.out, "Output directory (model.ckpt, config.json)")->required();
    sc->add_option("--seed", ta.settings.seed)->capture_default_str();
    sc->add_option("--steps", ta.settings.steps)->capture_default_str();
    sc->add_option("--lr", ta.settings.lr)->capture_default_str();
    sc->add_option("--batch-size", ta.settings.batch_size)->capture_default_str();
    sc->add_option("--warmup", ta.settings.warmup)->capture_default_str();
    sc->add_option("--log-every", ta.log_every)->capture_default_str();
  };
  auto* tt2s = train->add_subcommand("t2s", std::string("Semantic token language model. ") + kPrecedence);
  add_train_flags(tt2s);
  tt2s->add_option("--layers", t2s_cfg.n_layers)->capture_default_str();
  tt2s->add_option("--d-model", t2s_cfg.d_model)->capture_default_str();
  auto* ts2a = train->add_subcommand("s2a", std::string("Masked acoustic token model. ") + kPrecedence);
  add_train_flags(ts2a);
  ts2a->add_option("--layers", s2a_cfg.n_layers)->capture_default_str();
  ts2a->add_option("--d-model", s2a_cfg.d_model)->capture_default_str();

  // synth
  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Generate semantic then acoustic tokens for each input record");
  synth->add_option("--t2s", sa.t2s_dir, "Directory written by train t2s")->required()->check(CLI::ExistingDirectory);
  synth->add_option("--s2a", sa.s2a_dir, "Directory written by train s2a")->required()->check(CLI::ExistingDirectory);
  synth->add_option("--input", sa.input, "Records with s_op, text, s_prompt")->required()->check(CLI::ExistingFile);
  synth->add_option("--out", sa.out, "Output token-sequence JSONL")->required();
  synth->add_flag("--greedy", sa.greedy, "Greedy decoding in both stages");
  synth->add_option("--seed", sa.seed)->capture_default_str();
  synth->add_option("--max-new-tokens", sa.max_new_tokens)->capture_default_str();
  synth->add_option("--top-k", sa.top_k)->capture_default_str();
  synth->add_option("--temperature", sa.temperature)->capture_default_str();
  synth->add_option("--first-layer-iters", sa.first_layer_iters)->capture_default_str();
  synth->add_option("--other-layer-iters", sa.other_layer_iters)->capture_default_str();

  // eval
  auto* eval = app.add_subcommand("eval", "Objective metrics; reports use 4-decimal fixed formatting");
  eval->require_subcommand(1);
  EvalArgs ea;
  auto* ewer = eval->add_subcommand("wer", "Corpus WER between token-sequence JSONL files matched by utt_id");
  auto* esim = eval->add_subcommand("sim", "Mean cosine similarity of embedding JSONL {utt_id, vec}");
  auto* econ = eval->add_subcommand("consist", "Style-label agreement of label JSONL {utt_id, label}");
  auto* erep = eval->add_subcommand("report", "All metrics whose inputs are given");
  for (auto* sc : {ewer, esim, econ}) {
    sc->add_option("--ref", ea.ref)->required()->check(CLI::ExistingFile);
    sc->add_option("--hyp", ea.hyp)->required()->check(CLI::ExistingFile);
    sc->add_option("--out", ea.out, "Write the report here instead of stdout");
  }
  for (auto* sc : {ewer, erep}) {
    sc->add_option("--field", ea.field, "Compare 'text' or 'semantic'")
        ->check(CLI::IsMember({"text", "semantic"}))
        ->capture_default_str();
    sc->add_option("--unit", ea.unit, "Text units: 'word' or 'char'")
        ->check(CLI::IsMember({"word", "char"}))
        ->capture_default_str();
  }
  erep->add_option("--wer-ref", ea.ref)->check(CLI::ExistingFile);
  erep->add_option("--wer-hyp", ea.hyp)->check(CLI::ExistingFile);
  erep->add_option("--spk-ref", ea.spk_ref)->check(CLI::ExistingFile);
  erep->add_option("--spk-hyp", ea.spk_hyp)->check(CLI::ExistingFile);
  erep->add_option("--style-ref", ea.style_ref)->check(CLI::ExistingFile);
  erep->add_option("--style-hyp", ea.style_hyp)->check(CLI::ExistingFile);
  erep->add_option("--label-ref", ea.label_ref)->check(CLI::ExistingFile);
  erep->add_option("--label-hyp", ea.label_hyp)->check(CLI::ExistingFile);
  erep->add_option("--out", ea.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 1;
  }

  if (*prun) return cmd_pipeline_run(pa);
  if (*pstats) return cmd_pipeline_stats(stats_manifest, stats_out);
  if (*tgen) return cmd_task_gen(spec_path, task_out, tg);
  if (*tt2s) return cmd_train_t2s(ta, t2s_cfg);
  if (*ts2a) return cmd_train_s2a(ta, s2a_cfg);
  if (*synth) return cmd_synth(sa);
  for (auto* sc : {ewer, esim, econ, erep})
    if (*sc) return cmd_eval(sc->get_name(), ea);
  std::cerr << app.help();
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const NumericError& e) {
    log_kv(std::string("event=error kind=numeric message=\"") + e.what() + "\"");
    return 3;
  } catch (const Error& e) {
    log_kv(std::string("event=error kind=data message=\"") + e.what() + "\"");
    return 2;
  } catch (const std::exception& e) {
    log_kv(std::string("event=error kind=data message=\"") + e.what() + "\"");
    return 2;
  }
}
