// Acceptance suite: one PASS/FAIL line per criterion with the measured values.
// Exits nonzero when any criterion fails.

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "debatts/checkpoint.hpp"
#include "debatts/metrics.hpp"
#include "debatts/pipeline.hpp"
#include "debatts/s2a.hpp"
#include "debatts/synthetic.hpp"
#include "debatts/t2s.hpp"
#include "debatts/token_io.hpp"
#include "debatts/train.hpp"
#include "support/competition.hpp"
#include "support/grad_cases.hpp"
#include "support/interval_oracles.hpp"

namespace fs = std::filesystem;
using namespace debatts;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<int> draw(std::mt19937_64& rng, int lo, int hi, int vocab) {
  std::vector<int> out(static_cast<std::size_t>(std::uniform_int_distribution<int>(lo, hi)(rng)));
  for (auto& x : out) x = std::uniform_int_distribution<int>(0, vocab - 1)(rng);
  return out;
}

T2SInput random_t2s_input(std::mt19937_64& rng, const UnifiedVocab& v) {
  return assemble_t2s_input({draw(rng, 1, 8, v.v_sem()), SemanticSource::opponent}, TextSequence{draw(rng, 1, 12, v.v_text())},
                            {draw(rng, 1, 8, v.v_sem()), SemanticSource::speaker_prompt},
                            SemanticSequence{draw(rng, 1, 12, v.v_sem()), SemanticSource::target}, v);
}

// 1. Finite-difference gradient checks.
Outcome autodiff_soundness() {
  const auto t0 = Clock::now();
  double worst = 0;
  std::string worst_name;
  std::size_t checks = 0;
  for (const auto& c : testing::grad_cases())
    for (std::uint64_t seed = 0; seed < 5; ++seed, ++checks) {
      const double e = c.worst_error(seed);
      if (e > worst) {
        worst = e;
        worst_name = c.name;
      }
    }
  const double secs = since(t0);
  return {worst < testing::kGradTol && secs < 120,
          fmt("%zu checks, max rel err %.3g (%s), %.1f s", checks, worst, worst_name.c_str(), secs)};
}

// 2. Logit gradient vanishes at conditioning positions.
Outcome loss_mask_contract() {
  T2SModel<double> model(T2SConfig{}, 1);
  std::mt19937_64 rng(2);
  std::size_t checked = 0, nonzero = 0;
  for (int b = 0; b < 100; ++b) {
    std::vector<T2SInput> batch;
    for (int i = 0; i < 4; ++i) batch.push_back(random_t2s_input(rng, model.vocab()));
    auto l = t2s_loss(model, std::span<const T2SInput>(batch));
    l.loss.backward();
    const auto& g = l.logits.grad();
    for (std::size_t e = 0; e < batch.size(); ++e) {
      const auto& in = batch[e];
      for (std::size_t t = 0; t < in.ids.size(); ++t) {
        if (!(in.opponent.contains(t) || in.text.contains(t) || in.speaker_prompt.contains(t))) continue;
        ++checked;
        for (double x : g.row(l.spans[e].offset + t)) nonzero += x != 0.0;
      }
    }
  }
  return {nonzero == 0 && checked > 0, fmt("100 batches, %zu conditioning rows, %zu nonzero entries", checked, nonzero)};
}

// 3. Causality under perturbation of later tokens.
Outcome causality() {
  T2SModel<float> model(T2SConfig{}, 3);
  const int V = model.vocab().size();
  std::mt19937_64 rng(4);
  int violations = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> ids(static_cast<std::size_t>(std::uniform_int_distribution<int>(2, 64)(rng)));
    for (auto& x : ids) x = std::uniform_int_distribution<int>(0, V - 1)(rng);
    const auto t = std::uniform_int_distribution<std::size_t>(0, ids.size() - 2)(rng);
    const auto base = model.forward(ids).value();
    for (std::size_t i = t + 1; i < ids.size(); ++i)
      ids[i] = (ids[i] + 1 + static_cast<int>(rng() % static_cast<unsigned>(V - 1))) % V;
    const auto pert = model.forward(ids).value();
    violations += std::memcmp(base.data(), pert.data(), (t + 1) * base.cols() * sizeof(float)) != 0;
  }
  return {violations == 0, fmt("200 trials, %d bitwise violations", violations)};
}

// 4. Style copy end to end with the default task and model.
Outcome style_copy() {
  const auto t0 = Clock::now();
  io::TaskGenConfig tc;
  const auto spec = tc.spec();
  const auto corpus = gen_corpus(spec, tc.n_train, tc.n_test);
  const T2SConfig cfg;
  std::vector<T2SInput> train;
  for (const auto& it : corpus.train)
    train.push_back(assemble_t2s_input(it.s_op, it.text, it.s_prompt, it.s_target, cfg.vocab()));
  T2SModel<float> model(cfg, 7);
  const io::TrainSettings settings;
  double last_loss = 0;
  train_t2s(model, train, settings, [&](const TrainProgress& p) {
    last_loss = p.loss;
    std::fprintf(stderr, "event=train stage=t2s step=%d loss=%.5f seconds=%.1f\n", p.step, p.loss, p.seconds);
  }, 100);
  const double train_secs = since(t0);

  std::vector<GenerationRequest> reqs, swapped;
  Rng rng(11);
  for (const auto& it : corpus.test) {
    reqs.push_back({it.s_op, it.text, it.s_prompt});
    swapped.push_back({swap_style(spec, it.s_op, it.style, rng), it.text, it.s_prompt});
  }
  const auto greedy = SamplingConfig::greedy(spec.text_len_max + 4);
  const auto out = generate_batch(model, std::span<const GenerationRequest>(reqs), greedy);
  const auto out_swap = generate_batch(model, std::span<const GenerationRequest>(swapped), greedy);
  std::size_t exact = 0, exact_swap = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& want = oracle_target(spec, corpus.test[i].s_op, corpus.test[i].text).tokens;
    exact += out[i].tokens == want;
    exact_swap += out_swap[i].tokens == want;
  }
  const double acc = static_cast<double>(exact) / static_cast<double>(out.size());
  const double acc_swap = static_cast<double>(exact_swap) / static_cast<double>(out.size());
  const double total = since(t0);
  return {acc >= 0.95 && acc_swap < 0.20 && total <= 900,
          fmt("exact %.3f (%zu/%zu), swapped-style exact %.3f, final loss %.4f, train %.0f s, total %.0f s (limit 900 s, "
              "%u hardware threads)",
              acc, exact, out.size(), acc_swap, last_loss, train_secs, total, std::thread::hardware_concurrency())};
}

// 5. Decode invariants and trained toy codec accuracy.
Outcome s2a_decoding() {
  S2AConfig small;
  small.n_q = 3;
  small.v_ac = 16;
  small.v_sem = 16;
  small.d_model = 32;
  small.n_layers = 1;
  small.n_heads = 2;
  small.d_ff = 64;
  S2AModel<float> rnd(small, 1);
  std::mt19937_64 gen(5);
  int bad_mask = 0, bad_prompt = 0, bad_order = 0, fired = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t F = 1 + gen() % 16;
    const std::size_t P = gen() % (F + 1);
    const auto sem = draw(gen, static_cast<int>(F), static_cast<int>(F), 16);
    const auto prompt = codec_encode(std::span<const int>(sem.data(), P), 3, 16);
    S2ADecodeConfig cfg = S2ADecodeConfig::uniform(1 + static_cast<int>(gen() % 6));
    cfg.greedy = trial % 2 == 0;
    cfg.seed = static_cast<std::uint64_t>(trial);
    S2ADecodeTrace trace;
    try {
      const auto out = s2a_decode(rnd, sem, prompt, cfg, &trace);
      bad_mask += out.count_masked() != 0;
      for (std::size_t j = 0; j < 3; ++j)
        for (std::size_t f = 0; f < P; ++f) bad_prompt += out.at(j, f) != prompt.at(j, f);
      bad_order += !std::is_sorted(trace.layer_queries.begin(), trace.layer_queries.end());
    } catch (const StateError&) {
      ++fired;
    }
  }

  // Toy codec: train on style-copy records, decode held-out targets after
  // their prompt frames.
  const auto t0 = Clock::now();
  io::TaskGenConfig tc;
  tc.n_train = 2000;
  tc.n_test = 100;
  const auto spec = tc.spec();
  const auto corpus = gen_corpus(spec, tc.n_train, tc.n_test);
  std::vector<io::TokenRecord> recs;
  for (const auto& it : corpus.train) recs.push_back(io::to_record(spec, it));
  S2AConfig cfg;
  cfg.d_model = 64;
  cfg.d_ff = 128;
  S2AModel<float> model(cfg, 5);
  io::TrainSettings s;
  s.steps = 300;
  s.lr = 2e-3;
  s.batch_size = 16;
  s.warmup = 50;
  s.seed = 2;
  train_s2a(model, s2a_examples(recs), s);
  std::size_t ok = 0, total = 0;
  for (const auto& it : corpus.test) {
    const auto r = io::to_record(spec, it);
    std::vector<int> sem = *r.s_prompt;
    sem.insert(sem.end(), r.semantic.begin(), r.semantic.end());
    const auto prompt = AcousticGrid::from_layers(*r.prompt_acoustic);
    const auto out = s2a_decode(model, sem, prompt, S2ADecodeConfig{});
    const auto ref = codec_encode(sem, cfg.n_q, cfg.v_ac);
    for (std::size_t j = 0; j < static_cast<std::size_t>(cfg.n_q); ++j)
      for (std::size_t f = prompt.n_frames(); f < sem.size(); ++f, ++total) ok += out.at(j, f) == ref.at(j, f);
  }
  const double acc = static_cast<double>(ok) / static_cast<double>(total);
  return {bad_mask == 0 && bad_prompt == 0 && bad_order == 0 && fired == 0 && acc >= 0.95,
          fmt("1000 decodes: %d with MASK, %d prompt mismatches, %d order violations, %d assertion failures; "
              "codec accuracy %.4f over %zu tokens (%.0f s)",
              bad_mask, bad_prompt, bad_order, fired, acc, total, since(t0))};
}

// 6. Interval algebra against millisecond-grid oracles.
Outcome interval_algebra() {
  std::mt19937_64 rng(6);
  int del_bad = 0, merge_bad = 0, idem_bad = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto segs = testing::random_segments(rng, 20, 1 + static_cast<int>(rng() % 4), 2000);
    del_bad += pipeline::delete_overlaps(segs) != testing::occupancy_delete_overlaps(segs);
  }
  for (int trial = 0; trial < 1000; ++trial) {
    const auto segs = testing::random_segments(rng, 20, 1 + static_cast<int>(rng() % 3), 4000);
    const pipeline::Millis gap = static_cast<pipeline::Millis>(rng() % 400);
    const auto out = pipeline::merge_same_speaker(segs, pipeline::from_ms(gap));
    merge_bad += out != testing::closure_merge(segs, gap);
    idem_bad += pipeline::merge_same_speaker(out, pipeline::from_ms(gap)) != out;
  }
  return {del_bad == 0 && merge_bad == 0 && idem_bad == 0,
          fmt("delete_overlaps mismatches %d/1000, merge mismatches %d/1000, non-idempotent %d", del_bad, merge_bad,
              idem_bad)};
}

// 7. Recovery of planted competitions.
Outcome pipeline_recovery() {
  int mod_ok = 0, sess_ok = 0, pairs_ok = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto c = testing::make_competition(seed + 500, "acc" + std::to_string(seed));
    const auto segs = pipeline::parse_rttm(pipeline::serialize_rttm(c.segments));
    const auto r = pipeline::run_recording(c.recording_id, segs, c.utterances, c.lexicons);
    mod_ok += r.moderator == c.moderator;
    sess_ok += r.sessions == c.sessions && r.stray_end_keywords == c.stray_end_keywords;
    bool same = r.pairs.pairs.size() == c.pairs.size() && r.pairs.sessions_without_pairs == c.sessions_without_pairs;
    for (std::size_t i = 0; same && i < c.pairs.size(); ++i) {
      const auto& a = r.pairs.pairs[i];
      const auto& b = c.pairs[i];
      same = a.pair_id == b.pair_id && a.opponent == b.opponent && a.target == b.target && a.style_vec && b.style_vec &&
             a.style_vec->size() == b.style_vec->size();
      for (std::size_t k = 0; same && k < b.style_vec->size(); ++k)
        same = std::abs((*a.style_vec)[k] - (*b.style_vec)[k]) < 1e-12;
    }
    pairs_ok += same;
  }
  return {mod_ok == 100 && sess_ok == 100 && pairs_ok == 100,
          fmt("moderator %d/100, sessions %d/100, pairs %d/100", mod_ok, sess_ok, pairs_ok)};
}

// 8. Metrics against independent references.
Outcome metrics_oracles() {
  std::mt19937_64 rng(8);
  int wer_bad = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto r = draw(rng, 1, 20, 6), h = draw(rng, 0, 20, 6);
    std::vector<std::vector<int>> d(r.size() + 1, std::vector<int>(h.size() + 1));
    for (std::size_t i = 0; i <= r.size(); ++i) d[i][0] = static_cast<int>(i);
    for (std::size_t j = 0; j <= h.size(); ++j) d[0][j] = static_cast<int>(j);
    for (std::size_t i = 1; i <= r.size(); ++i)
      for (std::size_t j = 1; j <= h.size(); ++j)
        d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (r[i - 1] != h[j - 1])});
    wer_bad += metrics::wer(r, h) != static_cast<double>(d[r.size()][h.size()]) / static_cast<double>(r.size());
  }
  std::normal_distribution<double> n;
  double cos_worst = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> u(192), v(192);
    for (auto& x : u) x = n(rng);
    for (auto& x : v) x = n(rng);
    long double dot = 0, uu = 0, vv = 0;
    for (std::size_t i = u.size(); i-- > 0;) {
      dot += static_cast<long double>(u[i]) * v[i];
      uu += static_cast<long double>(u[i]) * u[i];
      vv += static_cast<long double>(v[i]) * v[i];
    }
    cos_worst = std::max(cos_worst, std::abs(metrics::cosine_similarity(u, v) - static_cast<double>(dot / std::sqrt(uu * vv))));
  }
  int consist_bad = 0;
  for (int k = 0; k <= 100; ++k) {
    std::vector<std::string> ref(100), gen(100);
    std::vector<int> idx(100);
    for (int i = 0; i < 100; ++i) {
      idx[static_cast<std::size_t>(i)] = i;
      ref[static_cast<std::size_t>(i)] = "L" + std::to_string(rng() % 4);
      gen[static_cast<std::size_t>(i)] = ref[static_cast<std::size_t>(i)];
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    for (int i = k; i < 100; ++i) gen[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])] += "_x";
    consist_bad += metrics::style_consistency(gen, ref) != k / 100.0;
  }
  return {wer_bad == 0 && cos_worst < 1e-12 && consist_bad == 0,
          fmt("wer mismatches %d/1000, cosine max |diff| %.2g, planted agreement misses %d/101", wer_bad, cos_worst,
              consist_bad)};
}

// 9. CLI byte-level determinism.
int sh(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

Outcome cli_determinism(const fs::path& work) {
  const std::string cli = std::string("'") + DEBATTS_CLI_PATH + "'";
  const std::string quiet = " >/dev/null 2>>'" + (work / "cli.log").string() + "'";
  const fs::path fx = fs::path(DEBATTS_TEST_DATA) / "pipeline";
  std::ofstream(work / "spec.json") << R"({"n_train": 300, "n_test": 20})";
  std::ofstream(work / "t2s.json")
      << R"({"n_layers": 2, "n_heads": 2, "d_model": 32, "d_ff": 64, "max_seq_len": 96, "steps": 40, "batch_size": 16})";
  std::ofstream(work / "s2a.json") << R"({"n_layers": 1, "n_heads": 2, "d_model": 32, "d_ff": 64, "steps": 40, "batch_size": 16})";
  bool task_same = true, pipe_same = true, synth_same = true;
  int failures = 0;
  for (int k = 0; k < 2; ++k) {
    const auto run = work / ("run" + std::to_string(k));
    failures += sh(cli + " task gen --spec '" + (work / "spec.json").string() + "' --out '" + (run / "task").string() +
                   "' --seed 7" + quiet) != 0;
    failures += sh(cli + " pipeline run --rttm '" + (fx / "rttm").string() + "' --transcripts '" +
                   (fx / "transcripts").string() + "' --keywords '" + (fx / "keywords").string() + "' --out '" +
                   (run / "manifest.jsonl").string() + "'" + quiet) != 0;
  }
  for (const char* f : {"train.jsonl", "test.jsonl", "spec.json"})
    task_same = task_same && slurp(work / "run0" / "task" / f) == slurp(work / "run1" / "task" / f) &&
                !slurp(work / "run0" / "task" / f).empty();
  pipe_same = slurp(work / "run0" / "manifest.jsonl") == slurp(work / "run1" / "manifest.jsonl") &&
              !slurp(work / "run0" / "manifest.jsonl").empty();

  const std::string data = (work / "run0" / "task" / "train.jsonl").string();
  failures += sh(cli + " train t2s --config '" + (work / "t2s.json").string() + "' --data '" + data + "' --out '" +
                 (work / "t2s").string() + "' --seed 1" + quiet) != 0;
  failures += sh(cli + " train s2a --config '" + (work / "s2a.json").string() + "' --data '" + data + "' --out '" +
                 (work / "s2a").string() + "' --seed 1" + quiet) != 0;
  for (int k = 0; k < 2; ++k)
    failures += sh(cli + " synth --t2s '" + (work / "t2s").string() + "' --s2a '" + (work / "s2a").string() +
                   "' --input '" + (work / "run0" / "task" / "test.jsonl").string() + "' --greedy --seed 3 --out '" +
                   (work / ("synth" + std::to_string(k) + ".jsonl")).string() + "'" + quiet) != 0;
  synth_same = slurp(work / "synth0.jsonl") == slurp(work / "synth1.jsonl") && !slurp(work / "synth0.jsonl").empty();
  return {failures == 0 && task_same && pipe_same && synth_same,
          fmt("task gen %s, pipeline run %s, greedy synth %s, %d failed commands", task_same ? "identical" : "DIFFERS",
              pipe_same ? "identical" : "DIFFERS", synth_same ? "identical" : "DIFFERS", failures)};
}

// 10. Checkpoint round trip.
Outcome checkpoint_round_trip(const fs::path& work) {
  const T2SConfig tc;
  T2SModel<float> a(tc, 21), b(tc, 22);
  checkpoint::save(a.params(), (work / "t2s.ckpt").string());
  checkpoint::load(b.params(), (work / "t2s.ckpt").string());
  std::mt19937_64 rng(10);
  bool t2s_same = true;
  for (int trial = 0; trial < 10; ++trial) {
    const auto ids = draw(rng, 1, 80, tc.vocab_size());
    const auto la = a.forward(ids).value(), lb = b.forward(ids).value();
    t2s_same = t2s_same && std::memcmp(la.data(), lb.data(), la.size() * sizeof(float)) == 0;
  }
  const S2AConfig sc;
  S2AModel<float> c(sc, 23), d(sc, 24);
  checkpoint::save(c.params(), (work / "s2a.ckpt").string());
  checkpoint::load(d.params(), (work / "s2a.ckpt").string());
  const auto sem = draw(rng, 30, 30, sc.v_sem);
  AcousticGrid grid(static_cast<std::size_t>(sc.n_q), sem.size());
  for (std::size_t f = 0; f < sem.size(); ++f) grid.at(0, f) = static_cast<int>(rng() % 64);
  const auto lc = c.forward(sem, grid, 1).value(), ld = d.forward(sem, grid, 1).value();
  const bool s2a_same = std::memcmp(lc.data(), ld.data(), lc.size() * sizeof(float)) == 0;
  return {t2s_same && s2a_same, fmt("t2s logits %s over 10 inputs, s2a logits %s", t2s_same ? "bitwise equal" : "DIFFER",
                                    s2a_same ? "bitwise equal" : "DIFFER")};
}

}  // namespace

int main() {
  const fs::path work = fs::temp_directory_path() / ("debatts_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(work);
  fs::create_directories(work);

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"autodiff soundness", autodiff_soundness},
      {"t2s loss-mask contract", loss_mask_contract},
      {"t2s causality", causality},
      {"style copy end to end", style_copy},
      {"s2a decode invariants and codec accuracy", s2a_decoding},
      {"interval algebra", interval_algebra},
      {"pipeline recovery", pipeline_recovery},
      {"metrics", metrics_oracles},
      {"cli determinism", [&] { return cli_determinism(work); }},
      {"checkpoint round trip", [&] { return checkpoint_round_trip(work); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  fs::remove_all(work);
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
