#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "seal/fm_index.hpp"
#include "seal/lm.hpp"

namespace seal {

enum class HypothesisKind { kSpan, kTitle };

/// A decoded ngram. `range` is the unanchored index match of `tokens`, so
/// range.width() is the corpus frequency of the ngram for both kinds.
struct Hypothesis {
  TokenSeq tokens;
  double logprob = 0;
  RowRange range;
  HypothesisKind kind = HypothesisKind::kSpan;
  /// Reached the step limit or could not be extended any further.
  bool complete = false;
};

struct CandidateSet {
  std::vector<Hypothesis> hypotheses;
  /// Distribution used at the first decoding step (after masking).
  LogProbVector first_step;
  std::string warning;
};

struct DecodeOptions {
  std::size_t beam = 15;
  std::size_t steps = 10;
  bool constrained = true;
  /// Fraction of the beam decoded from title starts.
  double title_share = 1.0 / 3.0;
};

/// Every beam entry selected during one decoding pass, per step.
struct DecodeTrace {
  std::vector<std::vector<Hypothesis>> steps;
};

/// Deduplicated hypotheses from a trace. A sequence seen several times keeps
/// its best log-probability and is complete if any copy was.
inline std::vector<Hypothesis> harvest_partials(const DecodeTrace& trace) {
  std::map<TokenSeq, Hypothesis> best;
  for (const auto& step : trace.steps) {
    for (const auto& h : step) {
      auto [it, fresh] = best.try_emplace(h.tokens, h);
      if (fresh) continue;
      bool complete = it->second.complete || h.complete;
      if (h.logprob > it->second.logprob) it->second = h;
      it->second.complete = complete;
    }
  }
  std::vector<Hypothesis> out;
  out.reserve(best.size());
  for (auto& [_, h] : best) out.push_back(std::move(h));
  return out;
}

namespace detail {

struct Beam {
  Hypothesis hyp;
  RowRange anchored;  // title beams: match of [terminator] ++ tokens
  LmSession session;
};

struct Expansion {
  std::size_t beam;
  TokenId token;
  double logprob;
};

inline std::vector<TokenId> allowed_tokens(const FmIndex& ix, const RowRange& range, bool constrained,
                                           std::size_t vocab) {
  std::vector<TokenId> out;
  if (constrained) {
    for (auto s : ix.successors(range))
      if (!reserved::is_reserved(s.token)) out.push_back(s.token);
  } else {
    for (TokenId t = reserved::kCount; t < vocab; ++t) out.push_back(t);
  }
  return out;
}

/// Log-probabilities of `lp` renormalized over `allowed`. When the model puts
/// no mass on any allowed token the allowed tokens are taken as equiprobable.
inline std::vector<double> masked_logprobs(const LogProbVector& lp, const std::vector<TokenId>& allowed) {
  std::vector<double> vals;
  vals.reserve(allowed.size());
  for (TokenId t : allowed) vals.push_back(lp[t]);
  const double lse = log_sum_exp(vals);
  if (!std::isfinite(lse)) {
    std::fill(vals.begin(), vals.end(), -std::log(static_cast<double>(allowed.size())));
    return vals;
  }
  for (auto& v : vals) v -= lse;
  return vals;
}

}  // namespace detail

/// Runs the decoding pass and returns the raw trace (every beam entry
/// selected at every step) plus the first-step distribution.
inline DecodeTrace constrained_beam_trace(std::span<const TokenId> query, const FmIndex& ix,
                                          const LanguageModel& lm, const DecodeOptions& opt,
                                          LogProbVector* first_step = nullptr) {
  if (opt.beam == 0) throw Error("beam must be at least 1");
  if (opt.steps == 0) throw Error("steps must be at least 1");
  if (lm.vocab_size() != ix.alphabet_size())
    throw Error("language model vocabulary (" + std::to_string(lm.vocab_size()) +
                ") does not match the index (" + std::to_string(ix.alphabet_size()) + ")");

  const double share = std::clamp(opt.title_share, 0.0, 1.0);
  const std::size_t title_slots = std::min(opt.beam, static_cast<std::size_t>(std::llround(share * opt.beam)));
  const std::size_t span_slots = opt.beam - title_slots;

  LmSession root = lm.start(query);
  const LogProbVector root_lp = lm.next_logprobs(root);

  struct Group {
    std::size_t slots;
    HypothesisKind kind;
    std::vector<detail::Beam> beams;
  };
  std::vector<Group> groups;
  if (span_slots > 0) {
    detail::Beam b{{{}, 0.0, ix.full_range(), HypothesisKind::kSpan, false}, ix.full_range(), root};
    groups.push_back({span_slots, HypothesisKind::kSpan, {b}});
  }
  if (title_slots > 0) {
    const TokenId eos = reserved::kEndOfString;
    detail::Beam b{{{}, 0.0, ix.full_range(), HypothesisKind::kTitle, false},
                   ix.find(std::span<const TokenId>(&eos, 1)), root};
    groups.push_back({title_slots, HypothesisKind::kTitle, {b}});
  }

  if (first_step) {
    auto allowed = detail::allowed_tokens(ix, ix.full_range(), opt.constrained, lm.vocab_size());
    auto vals = detail::masked_logprobs(root_lp, allowed);
    first_step->assign(lm.vocab_size(), -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < allowed.size(); ++i) (*first_step)[allowed[i]] = vals[i];
  }

  DecodeTrace trace;
  for (std::size_t step = 1; step <= opt.steps; ++step) {
    std::vector<Hypothesis> selected;
    for (auto& g : groups) {
      std::vector<detail::Expansion> cand;
      for (std::size_t bi = 0; bi < g.beams.size(); ++bi) {
        auto& b = g.beams[bi];
        const RowRange& mask_range = g.kind == HypothesisKind::kTitle ? b.anchored : b.hyp.range;
        auto allowed = detail::allowed_tokens(ix, mask_range, opt.constrained, lm.vocab_size());
        if (allowed.empty()) continue;  // dead end; already recorded as complete below
        LogProbVector lp = step == 1 ? root_lp : lm.next_logprobs(b.session);
        const auto vals = detail::masked_logprobs(lp, allowed);
        // At most `slots` expansions of one beam can survive.
        std::vector<detail::Expansion> local;
        local.reserve(allowed.size());
        for (std::size_t i = 0; i < allowed.size(); ++i)
          local.push_back({bi, allowed[i], b.hyp.logprob + vals[i]});
        auto better = [](const detail::Expansion& x, const detail::Expansion& y) {
          return x.logprob != y.logprob ? x.logprob > y.logprob : x.token < y.token;
        };
        if (local.size() > g.slots) {
          std::nth_element(local.begin(), local.begin() + g.slots, local.end(), better);
          local.resize(g.slots);
        }
        cand.insert(cand.end(), local.begin(), local.end());
      }
      // Global ordering: score, then token sequence for determinism.
      auto seq_less = [&](const detail::Expansion& x, const detail::Expansion& y) {
        if (x.logprob != y.logprob) return x.logprob > y.logprob;
        const auto& tx = g.beams[x.beam].hyp.tokens;
        const auto& ty = g.beams[y.beam].hyp.tokens;
        if (tx != ty) return tx < ty;
        return x.token < y.token;
      };
      std::sort(cand.begin(), cand.end(), seq_less);
      if (cand.size() > g.slots) cand.resize(g.slots);

      std::vector<detail::Beam> next;
      next.reserve(cand.size());
      for (const auto& e : cand) {
        const auto& b = g.beams[e.beam];
        detail::Beam nb;
        nb.hyp.tokens = b.hyp.tokens;
        nb.hyp.tokens.push_back(e.token);
        nb.hyp.logprob = e.logprob;
        nb.hyp.kind = g.kind;
        nb.hyp.range = ix.backward_extend(b.hyp.range, e.token);
        nb.anchored = g.kind == HypothesisKind::kTitle ? ix.backward_extend(b.anchored, e.token) : nb.hyp.range;
        nb.session = lm.advance(b.session, e.token);
        next.push_back(std::move(nb));
      }
      // Entries with no attested continuation are finished now.
      for (auto& nb : next) {
        if (step == opt.steps) {
          nb.hyp.complete = true;
        } else if (opt.constrained) {
          const RowRange& r = g.kind == HypothesisKind::kTitle ? nb.anchored : nb.hyp.range;
          nb.hyp.complete = detail::allowed_tokens(ix, r, true, lm.vocab_size()).empty();
        }
        selected.push_back(nb.hyp);
      }
      std::erase_if(next, [](const detail::Beam& b) { return b.hyp.complete; });
      g.beams = std::move(next);
    }
    trace.steps.push_back(std::move(selected));
    if (std::all_of(groups.begin(), groups.end(), [](const Group& g) { return g.beams.empty(); })) break;
  }
  return trace;
}

/// Constrained beam search producing the candidate ngram set: every beam
/// entry selected at any step (full-length beams and harvested partials),
/// title-anchored entries included. Unconstrained decoding discards
/// unattested outputs afterwards.
inline CandidateSet constrained_beam_search(std::span<const TokenId> query, const FmIndex& ix,
                                            const LanguageModel& lm, const DecodeOptions& opt = {}) {
  CandidateSet out;
  auto trace = constrained_beam_trace(query, ix, lm, opt, &out.first_step);
  if (trace.steps.empty() || trace.steps.front().empty()) {
    out.warning = "no attested continuation at the first step";
    return out;
  }
  out.hypotheses = harvest_partials(trace);
  if (!opt.constrained) {
    std::erase_if(out.hypotheses, [&](const Hypothesis& h) {
      if (h.range.empty()) return true;
      if (h.kind == HypothesisKind::kTitle) {
        TokenSeq anchored{reserved::kEndOfString};
        anchored.insert(anchored.end(), h.tokens.begin(), h.tokens.end());
        return ix.count(anchored) == 0;
      }
      return false;
    });
  }
  return out;
}

}  // namespace seal
