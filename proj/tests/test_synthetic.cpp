#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "debatts/synthetic.hpp"
#include "debatts/token_io.hpp"

using namespace debatts;

namespace {

SemanticSequence op(std::vector<int> t) { return {std::move(t), SemanticSource::opponent}; }

// Reference mapping recomputed from first principles: find the style whose
// marker set contains the first opponent token, then index its table.
std::vector<int> reference_target(const StyleCopySpec& spec, const StyleCopyItem& it) {
  int style = -1;
  for (int k = 0; k < spec.n_styles; ++k)
    for (int m : spec.markers[static_cast<std::size_t>(k)])
      if (m == it.s_op.tokens.front()) style = k;
  std::vector<int> out;
  for (int t : it.text.tokens) out.push_back(spec.tables[static_cast<std::size_t>(style)][static_cast<std::size_t>(t)]);
  return out;
}

}  // namespace

TEST(StyleCopySpec, DefaultIsValidWithDisjointBlocks) {
  auto s = StyleCopySpec::make(4, 16, 1);
  EXPECT_NO_THROW(s.validate());
  EXPECT_EQ(s.v_sem, 64);
  for (int k = 0; k < 4; ++k) {
    std::set<int> img(s.tables[static_cast<std::size_t>(k)].begin(), s.tables[static_cast<std::size_t>(k)].end());
    EXPECT_EQ(img.size(), 16u);
    EXPECT_EQ(*img.begin(), 16 * k);
    EXPECT_EQ(*img.rbegin(), 16 * k + 15);
  }
}

TEST(StyleCopySpec, InconsistentSpecsRejected) {
  auto s = StyleCopySpec::make(3, 4, 1);
  s.markers[1].push_back(s.markers[0][0]);
  EXPECT_THROW(s.validate(), DomainError);
  s = StyleCopySpec::make(3, 4, 1);
  s.tables[2][0] = s.tables[2][1];
  EXPECT_THROW(s.validate(), DomainError);
  s = StyleCopySpec::make(3, 4, 1);
  s.n_styles = 1;
  EXPECT_THROW(s.validate(), DomainError);
}

TEST(OracleTarget, EmptyTextAndIdentityTable) {
  auto s = StyleCopySpec::make(2, 8, 3, true);
  EXPECT_TRUE(oracle_target(s, op({0, 1}), TextSequence{}).tokens.empty());
  auto out = oracle_target(s, op({2, 5}), TextSequence{{0, 3, 7}});
  EXPECT_EQ(out.tokens, (std::vector<int>{0, 3, 7}));
  out = oracle_target(s, op({9}), TextSequence{{0, 3, 7}});
  EXPECT_EQ(out.tokens, (std::vector<int>{8, 11, 15}));
}

TEST(OracleTarget, AmbiguousOrMissingStyle) {
  auto s = StyleCopySpec::make(2, 8, 3);
  EXPECT_THROW(oracle_target(s, op({0, 9}), TextSequence{{1}}), DomainError);
  EXPECT_THROW(oracle_target(s, op({}), TextSequence{{1}}), DomainError);
}

TEST(GenCorpus, ItemsMatchIndependentOracle) {
  auto s = StyleCopySpec::make(4, 16, 5);
  auto c = gen_corpus(s, 300, 50);
  for (const auto* split : {&c.train, &c.test})
    for (const auto& it : *split) {
      EXPECT_EQ(it.s_target.tokens, reference_target(s, it));
      EXPECT_EQ(it.s_target.tokens, oracle_target(s, it.s_op, it.text).tokens);
      EXPECT_EQ(identify_style(s, it.s_op), it.style);
      EXPECT_GE(it.text.tokens.size(), 4u);
      EXPECT_LE(it.text.tokens.size(), 12u);
    }
}

TEST(GenCorpus, TrainAndTestTextsDisjoint) {
  auto s = StyleCopySpec::make(4, 16, 6);
  auto c = gen_corpus(s, 2000, 200);
  std::set<std::vector<int>> train;
  for (const auto& it : c.train) train.insert(it.text.tokens);
  for (const auto& it : c.test) EXPECT_EQ(train.count(it.text.tokens), 0u);
}

TEST(GenCorpus, SameSeedByteIdenticalManifests) {
  auto s = StyleCopySpec::make(4, 16, 7);
  auto dump = [&] {
    auto c = gen_corpus(s, 100, 20);
    std::vector<io::TokenRecord> recs;
    for (const auto& it : c.train) recs.push_back(io::to_record(s, it));
    for (const auto& it : c.test) recs.push_back(io::to_record(s, it));
    std::ostringstream os;
    io::write_records(recs, os);
    return os.str();
  };
  EXPECT_EQ(dump(), dump());
}

TEST(GenCorpus, TwoStyleCountsBinomialSane) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto s = StyleCopySpec::make(2, 16, seed);
    auto c = gen_corpus(s, 100, 1);
    int zeros = 0;
    for (const auto& it : c.train) zeros += it.style == 0;
    EXPECT_GE(zeros, 30) << seed;
    EXPECT_LE(zeros, 70) << seed;
  }
}

TEST(GenCorpus, MatchedPromptsShareTargetStyle) {
  auto s = StyleCopySpec::make(4, 16, 8);
  s.prompt_style = PromptStyle::matched;
  for (const auto& it : gen_corpus(s, 200, 10).train)
    for (int t : it.s_prompt.tokens) EXPECT_EQ(t / 16, it.style);
}

TEST(GenCorpus, BadSizesRejected) {
  auto s = StyleCopySpec::make(2, 4, 1);
  EXPECT_THROW(gen_corpus(s, 0, 5), DomainError);
}

TEST(StyleIdentifiability, SwappingStyleChangesEveryNonemptyTarget) {
  auto s = StyleCopySpec::make(4, 16, 9);
  Rng rng(1);
  for (const auto& it : gen_corpus(s, 300, 10).train) {
    const auto swapped = swap_style(s, it.s_op, it.style, rng);
    EXPECT_NE(identify_style(s, swapped), it.style);
    EXPECT_NE(oracle_target(s, swapped, it.text).tokens, it.s_target.tokens);
  }
}

TEST(ToyCodec, LayerZeroIsSemanticModVac) {
  const std::vector<int> sem{0, 5, 63, 64, 100};
  const auto g = codec_encode(sem, 4, 64);
  for (std::size_t f = 0; f < sem.size(); ++f) {
    EXPECT_EQ(g.at(0, f), sem[f] % 64);
    for (std::size_t j = 1; j < 4; ++j) EXPECT_EQ(g.at(j, f), (g.at(j - 1, f) * 5 + 3 * static_cast<int>(j) + 1) % 64);
  }
}

TEST(TokenIo, RecordRoundTrip) {
  auto s = StyleCopySpec::make(4, 16, 2);
  auto c = gen_corpus(s, 5, 2);
  std::vector<io::TokenRecord> recs;
  for (const auto& it : c.train) recs.push_back(io::to_record(s, it));
  std::ostringstream os;
  io::write_records(recs, os);
  std::istringstream is(os.str());
  EXPECT_EQ(io::read_records(is), recs);
  EXPECT_EQ(io::spec_from_json(nlohmann::json::parse(io::spec_to_json(s).dump())).tables, s.tables);
}
