#pragma once

#include <algorithm>
#include <functional>
#include <cmath>
#include <map>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "seal/decode.hpp"

namespace seal {

enum class ScoringMode { kLm, kLmFm, kIntersective };

inline std::string_view to_string(ScoringMode m) {
  switch (m) {
    case ScoringMode::kLm: return "lm";
    case ScoringMode::kLmFm: return "lm_fm";
    case ScoringMode::kIntersective: return "intersective";
  }
  return "?";
}

inline ScoringMode parse_mode(std::string_view s) {
  if (s == "lm") return ScoringMode::kLm;
  if (s == "lm_fm" || s == "lm+fm") return ScoringMode::kLmFm;
  if (s == "intersective") return ScoringMode::kIntersective;
  throw Error("unknown scoring mode '" + std::string(s) + "'");
}

struct ScoreOptions {
  double alpha = 2.0;
  double beta = 0.8;
  /// Count occurrences inside titles as matches.
  bool match_titles = true;
};

struct ScoredNgram {
  TokenSeq tokens;
  double logprob_cond = 0;
  std::size_t freq = 0;
  double prob_uncond = 0;
  double weight = 0;
  RowRange range;
};

struct Evidence {
  /// Index into the scored ngram list the ranking was computed from.
  std::size_t ngram = 0;
  double weight = 0;
  double cover = 1;
  /// Offsets of the occurrences that overlap no ngram admitted before this one.
  std::vector<std::uint32_t> offsets;
};

struct DocScore {
  std::uint32_t doc = 0;
  std::string doc_id;
  double score = 0;
  std::vector<Evidence> evidence;
};

inline constexpr double kProbClamp = 1e-9;

/// P(n) = F(n, R) / sum |d|.
inline double unconditional_prob(std::size_t freq, std::size_t total) {
  if (total == 0) throw Error("unconditional probability over an empty corpus");
  if (freq > total) throw Error("ngram frequency exceeds corpus size");
  return static_cast<double>(freq) / static_cast<double>(total);
}

/// w(n, q) = max(0, log[P(n|q) (1 - P(n)) / (P(n) (1 - P(n|q)))]), both
/// probabilities clamped to [1e-9, 1 - 1e-9].
inline double ngram_weight(double p_cond, double p_uncond) {
  double pc = std::clamp(p_cond, kProbClamp, 1 - kProbClamp);
  double pu = std::clamp(p_uncond, kProbClamp, 1 - kProbClamp);
  auto logit = [](double p) { return std::log(p) - std::log1p(-p); };
  double w = logit(pc) - logit(pu);
  return std::max(0.0, w);
}

/// 1 - beta + beta * |set(n) \ covered| / |set(n)|.
inline double coverage_weight(std::span<const TokenId> ngram, const std::unordered_set<TokenId>& covered,
                              double beta) {
  if (ngram.empty()) throw Error("coverage of an empty ngram");
  if (beta < 0 || beta > 1) throw Error("beta must lie in [0, 1]");
  std::unordered_set<TokenId> distinct(ngram.begin(), ngram.end());
  std::size_t fresh = 0;
  for (TokenId t : distinct) fresh += covered.count(t) == 0;
  return 1 - beta + beta * static_cast<double>(fresh) / static_cast<double>(distinct.size());
}

inline ScoredNgram score_ngram(TokenSeq tokens, double logprob_cond, const RowRange& range,
                               std::size_t total_tokens) {
  ScoredNgram s;
  s.tokens = std::move(tokens);
  s.logprob_cond = logprob_cond;
  s.range = range;
  s.freq = range.width();
  s.prob_uncond = unconditional_prob(s.freq, total_tokens);
  s.weight = ngram_weight(std::exp(logprob_cond), s.prob_uncond);
  return s;
}

/// One ScoredNgram per attested, non-reserved unigram with finite first-step mass.
inline std::vector<ScoredNgram> unigram_scores(const LogProbVector& first_step, const FmIndex& ix) {
  std::vector<ScoredNgram> out;
  const auto full = ix.full_range();
  for (TokenId t = reserved::kCount; t < first_step.size() && t < ix.alphabet_size(); ++t) {
    if (!std::isfinite(first_step[t])) continue;
    auto r = ix.backward_extend(full, t);
    if (r.empty()) continue;
    out.push_back(score_ngram({t}, first_step[t], r, ix.total_tokens()));
  }
  return out;
}

/// Decoded hypotheses and first-step unigrams as one deduplicated list; a
/// sequence present in both keeps the higher conditional probability.
inline std::vector<ScoredNgram> scored_candidates(const CandidateSet& cs, const FmIndex& ix,
                                                  bool with_unigrams = true) {
  std::map<TokenSeq, ScoredNgram> by_tokens;
  auto put = [&](ScoredNgram s) {
    auto [it, fresh] = by_tokens.try_emplace(s.tokens, s);
    if (!fresh && s.logprob_cond > it->second.logprob_cond) it->second = std::move(s);
  };
  for (const auto& h : cs.hypotheses)
    if (!h.range.empty()) put(score_ngram(h.tokens, h.logprob, h.range, ix.total_tokens()));
  if (with_unigrams && !cs.first_step.empty())
    for (auto& u : unigram_scores(cs.first_step, ix)) put(std::move(u));
  std::vector<ScoredNgram> out;
  out.reserve(by_tokens.size());
  for (auto& [_, s] : by_tokens) out.push_back(std::move(s));
  return out;
}

/// Occurrence offsets of one ngram inside one document.
struct NgramInDoc {
  std::size_t ngram = 0;
  double weight = 0;
  std::size_t length = 0;
  const TokenSeq* tokens = nullptr;
  std::vector<std::uint32_t> offsets;
};

struct Admitted {
  std::size_t ngram = 0;
  std::vector<std::uint32_t> offsets;
};

/// K^(d), built greedily in descending weight (ties: longer first, then
/// lexicographic): an ngram is admitted when at least one of its occurrences
/// overlaps no occurrence of an ngram admitted before it.
inline std::vector<Admitted> select_kd(std::vector<NgramInDoc> items) {
  std::sort(items.begin(), items.end(), [](const NgramInDoc& a, const NgramInDoc& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    if (a.length != b.length) return a.length > b.length;
    return *a.tokens < *b.tokens;
  });
  std::vector<std::pair<std::uint32_t, std::uint32_t>> blocked;  // [begin, end)
  std::vector<Admitted> out;
  for (const auto& it : items) {
    Admitted a{it.ngram, {}};
    for (auto off : it.offsets) {
      std::uint32_t end = off + static_cast<std::uint32_t>(it.length);
      bool overlaps =
          std::any_of(blocked.begin(), blocked.end(), [&](auto b) { return off < b.second && b.first < end; });
      if (!overlaps) a.offsets.push_back(off);
    }
    if (a.offsets.empty()) continue;
    for (auto off : it.offsets) blocked.emplace_back(off, off + static_cast<std::uint32_t>(it.length));
    out.push_back(std::move(a));
  }
  return out;
}

namespace detail {

inline void sort_ranking(std::vector<DocScore>& ranking) {
  std::sort(ranking.begin(), ranking.end(), [](const DocScore& a, const DocScore& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.doc_id < b.doc_id;
  });
}

/// doc -> (ngram index -> offsets), over the given ngram indices.
inline std::map<std::uint32_t, std::map<std::size_t, std::vector<std::uint32_t>>> occurrences_by_doc(
    const std::vector<ScoredNgram>& ngrams, const std::vector<std::size_t>& which, const FmIndex& ix,
    bool match_titles) {
  std::map<std::uint32_t, std::map<std::size_t, std::vector<std::uint32_t>>> out;
  for (std::size_t k : which) {
    for (const auto& o : ix.locate(ngrams[k].range)) {
      if (o.is_title && !match_titles) continue;
      out[o.doc][k].push_back(o.offset);
    }
  }
  for (auto& [_, m] : out)
    for (auto& [__, offs] : m) std::sort(offs.begin(), offs.end());
  return out;
}

inline std::vector<DocScore> rank_by_max(const std::vector<ScoredNgram>& ngrams,
                                         const std::vector<std::size_t>& which, const FmIndex& ix,
                                         bool match_titles, bool use_logprob) {
  std::vector<DocScore> ranking;
  for (auto& [doc, per_ngram] : occurrences_by_doc(ngrams, which, ix, match_titles)) {
    DocScore ds{doc, ix.document(doc).doc_id, -std::numeric_limits<double>::infinity(), {}};
    std::size_t best = 0;
    for (auto& [k, offs] : per_ngram) {
      double s = use_logprob ? ngrams[k].logprob_cond : ngrams[k].weight;
      if (s > ds.score || (s == ds.score && ngrams[k].tokens < ngrams[best].tokens)) {
        ds.score = s;
        best = k;
      }
    }
    ds.evidence.push_back({best, ngrams[best].weight, 1.0, per_ngram[best]});
    ranking.push_back(std::move(ds));
  }
  sort_ranking(ranking);
  return ranking;
}

}  // namespace detail

/// LM scoring: each document gets log P(n|q) of its most probable complete
/// (fixed-length or dead-ended) decoded ngram.
inline std::vector<DocScore> rank_lm(const CandidateSet& cs, const FmIndex& ix, const ScoreOptions& opt = {}) {
  std::vector<ScoredNgram> ngrams;
  for (const auto& h : cs.hypotheses)
    if (h.complete && !h.range.empty())
      ngrams.push_back(score_ngram(h.tokens, h.logprob, h.range, ix.total_tokens()));
  std::vector<std::size_t> all(ngrams.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return detail::rank_by_max(ngrams, all, ix, opt.match_titles, true);
}

/// LM+FM scoring: each document gets the largest w(n, q) among the decoded
/// ngrams, harvested partials and first-step unigrams occurring in it.
/// Documents reachable only through zero-weight ngrams are not listed.
inline std::vector<DocScore> rank_lm_fm(const CandidateSet& cs, const FmIndex& ix, const ScoreOptions& opt = {}) {
  auto ngrams = scored_candidates(cs, ix);
  std::vector<std::size_t> positive;
  for (std::size_t i = 0; i < ngrams.size(); ++i)
    if (ngrams[i].weight > 0) positive.push_back(i);
  return detail::rank_by_max(ngrams, positive, ix, opt.match_titles, false);
}

/// Score of one document from its per-ngram occurrences:
/// W(d, q) = sum over K^(d) of w^alpha * cover(n, K^(d)).
inline DocScore score_document(std::uint32_t doc, const std::string& doc_id,
                               const std::vector<ScoredNgram>& ngrams,
                               const std::map<std::size_t, std::vector<std::uint32_t>>& per_ngram,
                               const ScoreOptions& opt) {
  std::vector<NgramInDoc> items;
  items.reserve(per_ngram.size());
  for (const auto& [k, offs] : per_ngram)
    items.push_back({k, ngrams[k].weight, ngrams[k].tokens.size(), &ngrams[k].tokens, offs});
  auto admitted = select_kd(std::move(items));

  DocScore ds{doc, doc_id, 0.0, {}};
  std::unordered_set<TokenId> covered;
  std::vector<double> terms;
  for (const auto& a : admitted) {
    const auto& n = ngrams[a.ngram];
    double cover = coverage_weight(n.tokens, covered, opt.beta);
    terms.push_back(std::pow(n.weight, opt.alpha) * cover);
    ds.evidence.push_back({a.ngram, n.weight, cover, a.offsets});
    covered.insert(n.tokens.begin(), n.tokens.end());
  }
  // Summed largest first, so equal sets of terms give bit-identical scores.
  std::sort(terms.begin(), terms.end(), std::greater<>());
  for (double t : terms) ds.score += t;
  return ds;
}

/// Intersective scoring over the positively weighted candidates.
inline std::vector<DocScore> rank_intersective(const CandidateSet& cs, const FmIndex& ix,
                                               const ScoreOptions& opt = {}) {
  auto ngrams = scored_candidates(cs, ix);
  std::vector<std::size_t> positive;
  for (std::size_t i = 0; i < ngrams.size(); ++i)
    if (ngrams[i].weight > 0) positive.push_back(i);
  std::vector<DocScore> ranking;
  for (auto& [doc, per_ngram] : detail::occurrences_by_doc(ngrams, positive, ix, opt.match_titles))
    ranking.push_back(score_document(doc, ix.document(doc).doc_id, ngrams, per_ngram, opt));
  detail::sort_ranking(ranking);
  return ranking;
}

inline std::vector<DocScore> rank(ScoringMode mode, const CandidateSet& cs, const FmIndex& ix,
                                  const ScoreOptions& opt = {}) {
  switch (mode) {
    case ScoringMode::kLm: return rank_lm(cs, ix, opt);
    case ScoringMode::kLmFm: return rank_lm_fm(cs, ix, opt);
    case ScoringMode::kIntersective: return rank_intersective(cs, ix, opt);
  }
  return {};
}

}  // namespace seal
