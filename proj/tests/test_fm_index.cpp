#include <gtest/gtest.h>

#include <chrono>
#include <map>
#include <random>
#include <sstream>

#include "seal/fm_index.hpp"
#include "support/oracles.hpp"

namespace seal {
namespace {

using testing::cyclic_documents;
using testing::naive_count;
using testing::naive_hits;
using testing::naive_successors;

struct Cabac {
  Vocabulary vocab;
  TokenId A, B, C;
  FmIndex ix;
  Cabac() {
    A = vocab.add("A");
    B = vocab.add("B");
    C = vocab.add("C");
    std::vector<TokenSeq> seqs{{C, A, B, A, C}};
    ix = FmIndex::build_from_sequences(vocab, seqs);
  }
};

TEST(FmIndexBuild, CabacMatchesWorkedExample) {
  Cabac t;
  const auto E = reserved::kEndOfString;
  EXPECT_EQ(t.ix.bwt(), (TokenSeq{t.C, t.C, t.B, t.A, t.A, E}));
}

TEST(FmIndexBuild, SingleTokenDocument) {
  Vocabulary v;
  TokenId a = v.add("A");
  std::vector<TokenSeq> seqs{{a}};
  auto ix = FmIndex::build_from_sequences(v, seqs);
  EXPECT_EQ(ix.bwt(), (TokenSeq{a, reserved::kEndOfString}));
}

TEST(FmIndexBuild, RejectsAlphabetAboveBound) {
  std::mt19937_64 rng(1);
  auto c = testing::random_corpus(rng, 3, 5);
  BuildOptions opt;
  opt.max_alphabet = 4;
  EXPECT_THROW(FmIndex::build(c, opt), Error);
}

TEST(FmIndexBuild, InversionReproducesConcatenationOnRandomCorpora) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 300; ++trial) {
    auto corpus = testing::random_corpus(rng, 6, 1 + trial % 5);
    auto ix = FmIndex::build(corpus, {.sa_rate = 1 + static_cast<std::uint32_t>(trial % 5)});
    TokenSeq expect;
    for (const auto& d : cyclic_documents(corpus)) expect.insert(expect.end(), d.begin(), d.end());
    ASSERT_EQ(ix.reconstruct(), expect) << "trial " << trial;
  }
}

TEST(FmIndexBuild, IdenticalDocumentsStayInvertible) {
  Vocabulary v;
  TokenId a = v.add("a");
  std::vector<Document> docs{{"x", {}, {a}, ""}, {"y", {}, {a}, ""}, {"z", {}, {a}, ""}};
  Corpus c(docs, v);
  auto ix = FmIndex::build(c, {.sa_rate = 1});
  EXPECT_EQ(ix.count(TokenSeq{a}), 3u);
  auto occ = ix.locate(ix.find(TokenSeq{a}));
  std::sort(occ.begin(), occ.end());
  ASSERT_EQ(occ.size(), 3u);
  for (std::uint32_t j = 0; j < 3; ++j) {
    EXPECT_EQ(occ[j].doc, j);
    EXPECT_EQ(occ[j].offset, 1u);
  }
}

TEST(FmIndexBuild, FCountsSumToTextLength) {
  std::mt19937_64 rng(3);
  auto corpus = testing::random_corpus(rng, 8, 5);
  auto ix = FmIndex::build(corpus);
  std::size_t sum = 0;
  for (TokenId t = 0; t < ix.alphabet_size(); ++t) sum += ix.count(TokenSeq{t});
  EXPECT_EQ(sum, ix.size());
}

TEST(FmIndexBuild, SampledPositionsWalkToExpectedText) {
  std::mt19937_64 rng(11);
  auto corpus = testing::random_corpus(rng, 8, 4, 40);
  auto ix = FmIndex::build(corpus, {.sa_rate = 3});
  // The stored text is each document reversed followed by its terminator.
  TokenSeq stored;
  for (const auto& d : cyclic_documents(corpus)) {
    stored.insert(stored.end(), d.rbegin() + 1, d.rend());
    stored.push_back(reserved::kEndOfString);
  }
  auto samples = ix.sa_samples();
  ASSERT_FALSE(samples.empty());
  auto bwt = ix.bwt();
  for (auto [row, pos] : samples) {
    // L[row] is the symbol just before the sampled position; one LF step
    // moves the walk one position back in the stored text.
    ASSERT_GT(pos, 0u);
    EXPECT_EQ(bwt[row], stored[pos - 1]);
    auto prev = ix.lf(row);
    EXPECT_EQ(ix.bwt()[prev], stored[pos >= 2 ? pos - 2 : 0]) << "row " << row;
  }
}

TEST(FmIndexBuild, RankPreservationBetweenFirstAndLastColumns) {
  Cabac t;
  // i-th A in L maps to the i-th A row in F.
  auto bwt = t.ix.bwt();
  std::vector<std::size_t> a_rows;
  for (std::size_t r = 0; r < bwt.size(); ++r)
    if (bwt[r] == t.A) a_rows.push_back(r);
  auto a_range = t.ix.find(TokenSeq{t.A});
  ASSERT_EQ(a_rows.size(), a_range.width());
  for (std::size_t i = 0; i < a_rows.size(); ++i) EXPECT_EQ(t.ix.lf(a_rows[i]), a_range.lo + i);
}

TEST(FmIndexQuery, BackwardExtendCounts) {
  Cabac t;
  EXPECT_EQ(t.ix.backward_extend(t.ix.full_range(), t.C).width(), 2u);
  Vocabulary v = t.vocab;
  TokenId z = v.add("Z");
  (void)z;
  // Z is outside this index's alphabet.
  EXPECT_THROW(t.ix.backward_extend(t.ix.full_range(), z), Error);
  // Unattested in-alphabet symbol: the separator never occurs in raw sequences.
  EXPECT_TRUE(t.ix.backward_extend(t.ix.full_range(), reserved::kSeparator).empty());
  auto r = t.ix.backward_extend(t.ix.full_range(), t.C);
  r = t.ix.backward_extend(r, t.A);
  EXPECT_EQ(r.width(), 1u);
  EXPECT_EQ(r.depth, 2u);
}

TEST(FmIndexQuery, CountExamples) {
  Cabac t;
  EXPECT_EQ(t.ix.count(TokenSeq{t.A}), 2u);
  EXPECT_EQ(t.ix.count(TokenSeq{t.C, t.A, t.B, t.A, t.C}), 1u);
  EXPECT_EQ(t.ix.count(TokenSeq{t.B, t.B}), 0u);
}

TEST(FmIndexQuery, SuccessorExamples) {
  Cabac t;
  auto s = t.ix.successors(t.ix.find(TokenSeq{t.A}));
  EXPECT_EQ(s, (std::vector<Successor>{{t.B, 1}, {t.C, 1}}));
  auto full = t.ix.successors(t.ix.find(TokenSeq{t.C, t.A, t.B, t.A, t.C}));
  EXPECT_EQ(full, (std::vector<Successor>{{reserved::kEndOfString, 1}}));
  EXPECT_TRUE(t.ix.successors(RowRange{2, 2, 1}).empty());
}

TEST(FmIndexQuery, LocateExamples) {
  Cabac t;
  auto occ = t.ix.locate(t.ix.find(TokenSeq{t.A}));
  std::sort(occ.begin(), occ.end());
  ASSERT_EQ(occ.size(), 2u);
  EXPECT_EQ(occ[0].offset, 1u);
  EXPECT_EQ(occ[1].offset, 3u);
  EXPECT_TRUE(t.ix.locate(RowRange{}).empty());
}

TEST(FmIndexQuery, LocateFlagsTitleOccurrences) {
  Vocabulary v;
  TokenId a = v.add("a"), b = v.add("b");
  Corpus c({{"d", {a}, {b, a}, ""}}, v);
  auto ix = FmIndex::build(c);
  auto occ = ix.locate(ix.find(TokenSeq{a}));
  std::sort(occ.begin(), occ.end());
  ASSERT_EQ(occ.size(), 2u);
  EXPECT_TRUE(occ[0].is_title);
  EXPECT_EQ(occ[0].offset, 0u);
  EXPECT_FALSE(occ[1].is_title);
  EXPECT_EQ(occ[1].offset, 3u);
}

// Property: count / locate / successors agree with a brute-force scan of the
// cyclic documents, for attested, unattested and reserved-id patterns.
TEST(FmIndexQuery, OracleEquivalenceOnRandomCorpora) {
  std::mt19937_64 rng(2024);
  std::size_t cases = 0;
  for (int corpus_trial = 0; corpus_trial < 100; ++corpus_trial) {
    auto corpus = testing::random_corpus(rng, 8, 2 + corpus_trial % 4, 16);
    auto ix = FmIndex::build(corpus, {.sa_rate = 1 + static_cast<std::uint32_t>(rng() % 8)});
    auto docs = cyclic_documents(corpus);
    for (int q = 0; q < 15; ++q, ++cases) {
      TokenSeq pat = q % 3 == 0 ? testing::attested_pattern(rng, corpus, 6)
                                : testing::random_pattern(rng, corpus, 6, q % 3 == 2);
      auto range = ix.find(pat);
      ASSERT_EQ(range.width(), naive_count(docs, pat));

      std::vector<std::pair<std::uint32_t, std::uint32_t>> got, want;
      for (auto o : ix.locate(range)) got.emplace_back(o.doc, o.offset);
      for (auto h : naive_hits(docs, pat)) want.emplace_back(h.doc, h.offset);
      std::sort(got.begin(), got.end());
      ASSERT_EQ(got, want);

      std::map<TokenId, std::size_t> succ;
      std::size_t total = 0;
      for (auto s : ix.successors(range)) {
        succ[s.token] = s.count;
        total += s.count;
        // Consistency with count of the extended pattern.
        TokenSeq ext = pat;
        ext.push_back(s.token);
        ASSERT_EQ(ix.count(ext), s.count);
      }
      ASSERT_EQ(succ, naive_successors(docs, pat));
      ASSERT_EQ(total, range.width());
    }
  }
  EXPECT_GE(cases, 1000u);
}

TEST(FmIndexQuery, ContentNgramCountsEqualLinearConcatenation) {
  std::mt19937_64 rng(5);
  auto corpus = testing::random_corpus(rng, 8, 3, 20);
  auto ix = FmIndex::build(corpus);
  TokenSeq concat;
  for (const auto& d : cyclic_documents(corpus)) concat.insert(concat.end(), d.begin(), d.end());
  for (int i = 0; i < 200; ++i) {
    auto pat = testing::random_pattern(rng, corpus, 5, false);
    EXPECT_EQ(ix.count(pat), testing::linear_count(concat, pat));
  }
}

TEST(FmIndexQuery, DocumentTokensRoundTrip) {
  std::mt19937_64 rng(9);
  auto corpus = testing::random_corpus(rng, 8, 4);
  auto ix = FmIndex::build(corpus);
  auto back = ix.to_corpus();
  ASSERT_EQ(back.size(), corpus.size());
  for (std::size_t j = 0; j < corpus.size(); ++j) {
    EXPECT_EQ(back.documents()[j].doc_id, corpus.documents()[j].doc_id);
    EXPECT_EQ(back.documents()[j].title, corpus.documents()[j].title);
    EXPECT_EQ(back.documents()[j].body, corpus.documents()[j].body);
  }
  EXPECT_EQ(back.total_tokens(), ix.total_tokens());
}

TEST(FmIndexPersistence, RoundTripAnswersIdentically) {
  std::mt19937_64 rng(77);
  auto corpus = testing::random_corpus(rng, 8, 5, 30);
  auto ix = FmIndex::build(corpus, {.sa_rate = 4});
  std::stringstream buf;
  ix.save(buf);
  auto back = FmIndex::load(buf);
  EXPECT_EQ(back.sa_rate(), 4u);
  EXPECT_EQ(back.vocabulary(), ix.vocabulary());
  for (int i = 0; i < 100; ++i) {
    auto pat = testing::random_pattern(rng, corpus, 4, true);
    ASSERT_EQ(back.count(pat), ix.count(pat));
    ASSERT_EQ(back.locate(back.find(pat)), ix.locate(ix.find(pat)));
  }
}

class CorruptIndex : public ::testing::Test {
 protected:
  std::string bytes() {
    std::mt19937_64 rng(1);
    auto ix = FmIndex::build(testing::random_corpus(rng));
    std::stringstream buf;
    ix.save(buf);
    return buf.str();
  }
  static void expect_load_error(const std::string& data, const std::string& fragment) {
    std::stringstream in(data);
    try {
      FmIndex::load(in);
      FAIL() << "expected load error containing '" << fragment << "'";
    } catch (const Error& e) {
      EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
    }
  }
};

TEST_F(CorruptIndex, BadMagic) {
  auto d = bytes();
  d[0] = 'X';
  expect_load_error(d, "magic");
}

TEST_F(CorruptIndex, VersionMismatch) {
  auto d = bytes();
  d[8] = 9;
  expect_load_error(d, "version");
}

TEST_F(CorruptIndex, Truncated) {
  auto d = bytes();
  expect_load_error(d.substr(0, d.size() - 20), "truncated");
  expect_load_error(d.substr(0, 12), "truncated");
}

TEST_F(CorruptIndex, ChecksumFailure) {
  auto d = bytes();
  d[d.size() / 2] ^= 0x5a;
  expect_load_error(d, "checksum");
}

}  // namespace
}  // namespace seal
