#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "debatts/s2a.hpp"
#include "debatts/synthetic.hpp"
#include "debatts/train.hpp"

using namespace debatts;

namespace {

S2AConfig small_config(int n_q = 3) {
  S2AConfig c;
  c.n_q = n_q;
  c.v_ac = 16;
  c.v_sem = 16;
  c.d_model = 32;
  c.n_layers = 1;
  c.n_heads = 2;
  c.d_ff = 64;
  return c;
}

std::vector<int> random_semantic(std::mt19937_64& rng, std::size_t n, int v) {
  std::vector<int> s(n);
  for (auto& x : s) x = std::uniform_int_distribution<int>(0, v - 1)(rng);
  return s;
}

}  // namespace

TEST(MaskSchedule, EndpointsAndClosedForm) {
  EXPECT_EQ(mask_schedule(0.0), 1.0);
  EXPECT_EQ(mask_schedule(1.0), 0.0);
  EXPECT_NEAR(mask_schedule(0.5), std::sqrt(0.5), 1e-12);
  double prev = 2;
  for (int i = 0; i <= 100; ++i) {
    const double v = mask_schedule(i / 100.0);
    EXPECT_LE(v, prev);
    prev = v;
  }
  EXPECT_THROW(mask_schedule(-0.01), DomainError);
  EXPECT_THROW(mask_schedule(1.01), DomainError);
}

TEST(EmbedFrames, AllMaskedIsSemanticPlusMaskRows) {
  S2AModel<double> m(small_config(), 1);
  const std::vector<int> sem{3, 0, 15};
  const AcousticGrid grid(3, 3);
  const auto x = m.embed_frames(sem, grid).value();
  for (std::size_t f = 0; f < 3; ++f)
    for (std::size_t c = 0; c < 32; ++c) {
      double expect = m.semantic_embedding().value().at(static_cast<std::size_t>(sem[f]), c);
      for (std::size_t j = 0; j < 3; ++j) expect += m.acoustic_embedding(j).value().at(16, c);
      EXPECT_EQ(x.at(f, c), expect);
    }
}

TEST(EmbedFrames, IndependentResummationBitwise) {
  S2AModel<double> m(small_config(), 2);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t F = 1 + rng() % 10;
    const auto sem = random_semantic(rng, F, 16);
    AcousticGrid grid(3, F);
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t f = 0; f < F; ++f) grid.at(j, f) = rng() % 4 == 0 ? AcousticGrid::kMask : static_cast<int>(rng() % 16);
    const auto x = m.embed_frames(sem, grid).value();
    for (std::size_t f = 0; f < F; ++f)
      for (std::size_t c = 0; c < 32; ++c) {
        double acc = m.semantic_embedding().value().at(static_cast<std::size_t>(sem[f]), c);
        for (std::size_t j = 0; j < 3; ++j) {
          const int t = grid.at(j, f);
          acc += m.acoustic_embedding(j).value().at(t == AcousticGrid::kMask ? 16u : static_cast<std::size_t>(t), c);
        }
        ASSERT_EQ(x.at(f, c), acc);
      }
  }
}

TEST(EmbedFrames, EmptyAndMisaligned) {
  S2AModel<double> m(small_config(), 1);
  EXPECT_EQ(m.embed_frames(std::vector<int>{}, AcousticGrid(3, 0)).value().rows(), 0u);
  EXPECT_THROW(m.embed_frames(std::vector<int>{1, 2}, AcousticGrid(3, 3)), AlignmentError);
}

TEST(S2ATrain, SingleLayerFullMaskLossNearLogV) {
  S2AModel<double> m(small_config(1), 3);
  std::mt19937_64 gen(4);
  std::vector<S2AExample> batch;
  for (int i = 0; i < 8; ++i) {
    auto sem = random_semantic(gen, 12, 16);
    batch.push_back({sem, codec_encode(sem, 1, 16)});
  }
  Rng rng(1);
  S2ATrainOptions opts;
  opts.forced_mask_fraction = 1.0;
  opts.sample_prompt = false;
  auto l = s2a_loss(m, std::span<const S2AExample>(batch), rng, opts);
  EXPECT_NEAR(l.loss.item(), std::log(16.0), 0.3);
  EXPECT_EQ(std::count(l.mask.begin(), l.mask.end(), true), 8 * 12);
}

TEST(S2ATrain, LogitGradientZeroAtUnmaskedPositions) {
  S2AModel<double> m(small_config(), 3);
  std::mt19937_64 gen(5);
  std::vector<S2AExample> batch;
  for (int i = 0; i < 4; ++i) {
    auto sem = random_semantic(gen, 10, 16);
    batch.push_back({sem, codec_encode(sem, 3, 16)});
  }
  Rng rng(2);
  auto l = s2a_loss(m, std::span<const S2AExample>(batch), rng);
  l.loss.backward();
  std::size_t zero_rows = 0;
  for (std::size_t r = 0; r < l.mask.size(); ++r) {
    if (l.mask[r]) continue;
    ++zero_rows;
    for (double g : l.logits.grad().row(r)) ASSERT_EQ(g, 0.0);
  }
  EXPECT_GT(zero_rows, 0u);
}

TEST(S2ATrain, RejectsMaskedOrMisalignedInput) {
  S2AModel<double> m(small_config(), 3);
  Rng rng(1);
  std::vector<S2AExample> masked{{{1, 2}, AcousticGrid(3, 2)}};
  EXPECT_THROW(s2a_loss(m, std::span<const S2AExample>(masked), rng), VocabError);
  std::vector<S2AExample> misaligned{{{1, 2, 3}, AcousticGrid(3, 2, 0)}};
  EXPECT_THROW(s2a_loss(m, std::span<const S2AExample>(misaligned), rng), AlignmentError);
}

TEST(S2ATrain, MemorizesTwentyExamples) {
  auto c = small_config();
  c.d_model = 64;
  c.d_ff = 128;
  c.n_layers = 2;
  S2AModel<float> m(c, 6);
  std::mt19937_64 gen(7);
  std::vector<S2AExample> data;
  for (int i = 0; i < 20; ++i) {
    auto sem = random_semantic(gen, 6 + gen() % 6, 16);
    AcousticGrid g(3, sem.size());
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t f = 0; f < sem.size(); ++f) g.at(j, f) = static_cast<int>(gen() % 16);
    data.push_back({sem, g});
  }
  io::TrainSettings s;
  s.steps = 300;
  s.batch_size = 20;
  s.lr = 5e-3;
  s.warmup = 20;
  s.seed = 3;
  double tail = 0;
  train_s2a(m, data, s, [&](const TrainProgress& p) {
    if (p.step >= 250) tail = std::max(tail, p.loss);
  }, 10);
  EXPECT_LT(tail, 0.1);
}

TEST(S2ADecode, FullyPromptedNeverQueriesModel) {
  S2AModel<float> m(small_config(), 1);
  const std::vector<int> sem{1, 2, 3};
  const auto prompt = codec_encode(sem, 3, 16);
  S2ADecodeTrace trace;
  const auto out = s2a_decode(m, sem, prompt, S2ADecodeConfig{}, &trace);
  EXPECT_EQ(out, prompt);
  EXPECT_EQ(trace.forward_calls, 0);
}

TEST(S2ADecode, InvariantsOverRandomCases) {
  S2AModel<float> m(small_config(), 8);
  std::mt19937_64 gen(9);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t F = 1 + gen() % 12;
    const std::size_t P = gen() % (F + 1);
    const auto sem = random_semantic(gen, F, 16);
    const auto prompt = codec_encode(std::span<const int>(sem.data(), P), 3, 16);
    auto cfg = trial % 2 ? S2ADecodeConfig::uniform(1 + static_cast<int>(gen() % 4)) : S2ADecodeConfig{};
    S2ADecodeTrace trace;
    const auto out = s2a_decode(m, sem, prompt, cfg, &trace);
    EXPECT_EQ(out.count_masked(), 0u);
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t f = 0; f < P; ++f) ASSERT_EQ(out.at(j, f), prompt.at(j, f));
    EXPECT_TRUE(std::is_sorted(trace.layer_queries.begin(), trace.layer_queries.end()));
    EXPECT_EQ(out, s2a_decode(m, sem, prompt, cfg));
  }
}

TEST(S2ADecode, SingleIterationFillsEverything) {
  S2AModel<float> m(small_config(), 2);
  const std::vector<int> sem{1, 2, 3, 4, 5};
  S2ADecodeTrace trace;
  const auto out = s2a_decode(m, sem, AcousticGrid(3, 0), S2ADecodeConfig::uniform(1), &trace);
  EXPECT_EQ(out.count_masked(), 0u);
  EXPECT_EQ(trace.layer_queries, (std::vector<int>{0, 1, 2}));
}

TEST(S2ADecode, PromptLongerThanSemanticRejected) {
  S2AModel<float> m(small_config(), 2);
  const std::vector<int> sem{1, 2};
  EXPECT_THROW(s2a_decode(m, sem, codec_encode(std::vector<int>{1, 2, 3}, 3, 16), 1), AlignmentError);
}

TEST(S2ADecode, SampledDecodeReproducibleUnderSeed) {
  S2AModel<float> m(small_config(), 2);
  const std::vector<int> sem{1, 2, 3, 4, 5, 6, 7};
  S2ADecodeConfig cfg;
  cfg.greedy = false;
  cfg.seed = 4;
  EXPECT_EQ(s2a_decode(m, sem, AcousticGrid(3, 0), cfg), s2a_decode(m, sem, AcousticGrid(3, 0), cfg));
}
