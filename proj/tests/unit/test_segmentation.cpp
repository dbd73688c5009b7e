#include <gtest/gtest.h>

#include <map>
#include <set>

#include "../common/fixtures.hpp"
#include "../common/oracles.hpp"
#include "bns/behavior_segmentation.hpp"

using namespace bns;
using fixtures::tokens;

namespace {

using Spans = std::vector<std::pair<std::size_t, std::size_t>>;

Spans spans_of(const std::vector<BehaviorChunk>& chunks) {
  Spans out;
  for (const auto& c : chunks) out.emplace_back(c.start, c.end);
  return out;
}

}  // namespace

TEST(FindCores, LoveIgnoredSentence) {
  EXPECT_EQ(find_cores(fixtures::love_ignored_sentence()), (std::vector<std::size_t>{1, 3, 4}));
}

TEST(FindCores, AllNouns) {
  EXPECT_TRUE(find_cores(tokens({{"a", PosTag::NOUN, 0}, {"b", PosTag::NOUN, 0}})).empty());
}

TEST(FindCores, SingleVerb) { EXPECT_EQ(find_cores(tokens({{"run", PosTag::VERB, 0}})), std::vector<std::size_t>{0}); }

TEST(SlideWindows, LoveIgnoredSentenceWidthThree) {
  const auto toks = fixtures::love_ignored_sentence();
  const auto cand = slide_windows(toks, find_cores(toks), SegmentationConfig{3});
  EXPECT_EQ(spans_of(cand), (Spans{{0, 3}, {1, 4}, {2, 5}, {3, 6}}));
}

TEST(SlideWindows, ShortSentenceIsOneChunk) {
  const auto toks = tokens({{"run", PosTag::VERB, 0}});
  EXPECT_EQ(spans_of(slide_windows(toks, find_cores(toks), SegmentationConfig{3})), (Spans{{0, 1}}));
}

TEST(SlideWindows, OnlyWindowsWithCore) {
  auto toks = tokens({{"go", PosTag::VERB, 0}, {"a", PosTag::NOUN, 0}, {"b", PosTag::NOUN, 0},
                      {"c", PosTag::NOUN, 0}, {"d", PosTag::NOUN, 0}});
  EXPECT_EQ(spans_of(slide_windows(toks, find_cores(toks), SegmentationConfig{2})), (Spans{{0, 2}}));
}

TEST(TopN, CeilingOfHalfWindow) {
  EXPECT_EQ(top_n(SegmentationConfig{3}), 2u);
  EXPECT_EQ(top_n(SegmentationConfig{4}), 2u);
  EXPECT_EQ(top_n(SegmentationConfig{5}), 3u);
  EXPECT_EQ(top_n(SegmentationConfig{1}), 1u);
}

TEST(TopN, ZeroWindowRejected) { EXPECT_THROW(top_n(SegmentationConfig{0}), ConfigError); }

TEST(SelectChunks, LoveIgnoredSentenceKeepsAllFour) {
  const auto toks = fixtures::love_ignored_sentence();
  const SegmentationConfig cfg{3};
  const auto cand = slide_windows(toks, find_cores(toks), cfg);
  ASSERT_EQ(cand.size(), 4u);
  EXPECT_DOUBLE_EQ(cand[0].intensity, 0.82);
  EXPECT_DOUBLE_EQ(cand[1].intensity, 0.82);
  EXPECT_DOUBLE_EQ(cand[2].intensity, 0.55);
  EXPECT_DOUBLE_EQ(cand[3].intensity, 0.55);
  const auto chosen = select_chunks(cand, toks, cfg);
  EXPECT_EQ(spans_of(chosen), (Spans{{0, 3}, {1, 4}, {2, 5}, {3, 6}}));
  EXPECT_EQ(chosen[0].core_index, 1u);
  EXPECT_EQ(chosen[3].core_index, 4u);
}

TEST(SelectChunks, IdenticalSpansCollapse) {
  const auto toks = tokens({{"go", PosTag::VERB, 0.3}, {"x", PosTag::NOUN, 0}});
  const auto one = slide_windows(toks, find_cores(toks), SegmentationConfig{2});
  ASSERT_EQ(one.size(), 1u);
  const std::vector<BehaviorChunk> dup = {one[0], one[0], one[0]};
  EXPECT_EQ(select_chunks(dup, toks, SegmentationConfig{2}).size(), 1u);
}

TEST(SelectChunks, FewerCandidatesThanN) {
  const auto toks = tokens({{"go", PosTag::VERB, 0.3}, {"x", PosTag::NOUN, 0}, {"y", PosTag::NOUN, 0}});
  const SegmentationConfig cfg{3};  // n = 2, one candidate
  const auto cand = slide_windows(toks, find_cores(toks), cfg);
  EXPECT_EQ(spans_of(select_chunks(cand, toks, cfg)), (Spans{{0, 3}}));
}

TEST(SelectChunks, IntensityTieGoesToSmallerStart) {
  // core at 2, w=2: candidates [1,3) and [2,4) tie; n = 1 keeps [1,3)
  const auto toks = tokens({{"a", PosTag::NOUN, 0}, {"b", PosTag::NOUN, 0.4}, {"go", PosTag::VERB, 0},
                            {"c", PosTag::NOUN, -0.4}});
  const SegmentationConfig cfg{2};
  EXPECT_EQ(spans_of(select_chunks(slide_windows(toks, find_cores(toks), cfg), toks, cfg)), (Spans{{1, 3}}));
}

TEST(SelectChunks, NegativeSentimentCountsByMagnitude) {
  const auto toks = tokens({{"a", PosTag::NOUN, 0.1}, {"go", PosTag::VERB, 0}, {"c", PosTag::NOUN, -0.9}});
  const SegmentationConfig cfg{2};
  EXPECT_EQ(spans_of(select_chunks(slide_windows(toks, find_cores(toks), cfg), toks, cfg)), (Spans{{1, 3}}));
}

TEST(Segment, VerbFreeFallback) {
  const auto toks = tokens({{"a", PosTag::NOUN, 0}, {"b", PosTag::ADJ, 0.5}});
  const auto seg = segment(toks, SegmentationConfig{3});
  EXPECT_TRUE(seg.fallback);
  ASSERT_EQ(seg.chunks.size(), 1u);
  EXPECT_EQ(seg.chunks[0].start, 0u);
  EXPECT_EQ(seg.chunks[0].end, 2u);
}

TEST(Segment, EmptySentenceHasNoChunks) { EXPECT_TRUE(segment({}, SegmentationConfig{3}).chunks.empty()); }

TEST(Segment, CarriesTokenIds) {
  const auto toks = fixtures::love_ignored_sentence();
  const std::vector<std::size_t> ids = {10, 11, 12, 13, 14, 15};
  const auto seg = segment(toks, SegmentationConfig{3}, ids);
  ASSERT_FALSE(seg.chunks.empty());
  EXPECT_EQ(seg.chunks[1].token_ids, (std::vector<std::size_t>{11, 12, 13}));
}

TEST(SegmentProperty, MatchesBruteForceOracle) {
  Rng rng(2024);
  for (int trial = 0; trial < 3000; ++trial) {
    const auto toks = fixtures::random_sentence(rng, 12);
    const std::size_t w = 2 + rng.index(4);
    const auto seg = segment(toks, SegmentationConfig{w});
    std::vector<oracle::Span> got;
    for (const auto& c : seg.chunks) got.push_back({c.start, c.end});
    ASSERT_EQ(got, oracle::chunks(toks, w)) << "trial " << trial << " w=" << w;
  }
}

TEST(SegmentProperty, ChunkInvariants) {
  Rng rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto toks = fixtures::random_sentence(rng, 12);
    const std::size_t w = 1 + rng.index(5);
    const SegmentationConfig cfg{w};
    const auto cores = find_cores(toks);
    if (!cores.empty() && toks.size() >= w) {
      const auto cand = slide_windows(toks, cores, cfg);
      ASSERT_FALSE(cand.empty());
      for (const auto& c : cand) {
        EXPECT_EQ(c.length(), w);
        bool has_core = false;
        for (std::size_t i = c.start; i < c.end; ++i) has_core |= is_core(toks[i].pos);
        EXPECT_TRUE(has_core);
      }
    }
    const auto seg = segment(toks, cfg);
    std::set<std::pair<std::size_t, std::size_t>> seen;
    std::map<std::size_t, std::size_t> per_core;
    for (const auto& c : seg.chunks) {
      EXPECT_TRUE(seen.insert({c.start, c.end}).second) << "duplicate span";
      EXPECT_GE(c.length(), 1u);
      if (!seg.fallback) {
        EXPECT_LE(c.length(), w);
      }
      EXPECT_DOUBLE_EQ(c.intensity, span_intensity(toks, c.start, c.end));
      EXPECT_GE(c.intensity, 0.0);
      ++per_core[c.core_index];
    }
    for (const auto& [core, count] : per_core) EXPECT_LE(count, top_n(cfg));
    EXPECT_EQ(spans_of(seg.chunks), spans_of(segment(toks, cfg).chunks));
  }
}

TEST(BehaviorEmbed, SingleTokenIsItsRow) {
  const Tensor table = Tensor::matrix({{0, 0}, {1, 2}, {3, 4}});
  BehaviorChunk c;
  c.token_ids = {2};
  EXPECT_EQ(behavior_embed(c, table).values(), (std::vector<double>{3, 4}));
}

TEST(BehaviorEmbed, SumOfTwo) {
  const Tensor table = Tensor::matrix({{0, 0}, {1, 0}, {0, 2}});
  BehaviorChunk c;
  c.token_ids = {1, 2};
  EXPECT_EQ(behavior_embed(c, table).values(), (std::vector<double>{1, 2}));
}

TEST(BehaviorEmbed, LoveIgnoredChunkIsSumOfThreeRows) {
  Rng rng(5);
  Tensor table({6, 4});
  for (auto& v : table.data()) v = rng.uniform(-1, 1);
  const auto seg = segment(fixtures::love_ignored_sentence(), SegmentationConfig{3}, std::vector<std::size_t>{0, 1, 2, 3, 4, 5});
  const auto e = behavior_embed(seg.chunks[0], table);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(e[j], table.at(0, j) + table.at(1, j) + table.at(2, j));
}

TEST(BehaviorEmbed, OutOfRangeId) {
  BehaviorChunk c;
  c.token_ids = {7};
  EXPECT_THROW(behavior_embed(c, Tensor({3, 2})), ShapeError);
}

TEST(BehaviorEmbed, Linear) {
  Rng rng(8);
  Tensor table({5, 3});
  for (auto& v : table.data()) v = rng.uniform(-1, 1);
  Tensor scaled = table;
  for (auto& v : scaled.data()) v *= -2.5;
  BehaviorChunk c;
  c.token_ids = {1, 3, 4};
  const auto a = behavior_embed(c, table), b = behavior_embed(c, scaled);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(b[j], -2.5 * a[j], 1e-12);
}

TEST(BehaviorEmbed, DifferentiableFormAgrees) {
  Rng rng(4);
  Tensor table({6, 3});
  for (auto& v : table.data()) v = rng.uniform(-1, 1);
  const auto seg = segment(fixtures::love_ignored_sentence(), SegmentationConfig{3}, std::vector<std::size_t>{1, 2, 3, 4, 5, 1});
  const Var out = behavior_embeddings(seg.chunks, constant(table));
  ASSERT_EQ(out.shape(), (Shape{seg.chunks.size(), 3}));
  for (std::size_t r = 0; r < seg.chunks.size(); ++r) {
    const auto e = behavior_embed(seg.chunks[r], table);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(out.value().at(r, j), e[j]);
  }
}
