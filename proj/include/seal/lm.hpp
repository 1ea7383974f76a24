#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "seal/corpus.hpp"

namespace seal {

/// Per-token log-probabilities over the whole vocabulary.
using LogProbVector = std::vector<double>;

/// Conditioning state of one generation: the query plus the tokens emitted so
/// far. `handle` is free for backends that keep remote state.
struct LmSession {
  TokenSeq query;
  TokenSeq history;
  std::uint64_t handle = 0;
};

/// The contract decoding consumes: start, next_logprobs, advance. Every
/// implementation must be deterministic in (query, history) and safe to call
/// from several threads on distinct sessions.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;

  virtual std::size_t vocab_size() const = 0;

  virtual LmSession start(std::span<const TokenId> query) const {
    if (query.empty()) throw Error("language model query must not be empty");
    return {TokenSeq(query.begin(), query.end()), {}, 0};
  }

  virtual LogProbVector next_logprobs(const LmSession& session) const = 0;

  virtual LmSession advance(const LmSession& session, TokenId token) const {
    if (token >= vocab_size()) throw Error("token id " + std::to_string(token) + " outside the vocabulary");
    if (reserved::is_reserved(token)) throw Error("reserved token id cannot be generated");
    LmSession next = session;
    next.history.push_back(token);
    return next;
  }
};

inline double log_sum_exp(std::span<const double> xs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : xs) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

/// log P(tokens | query), chaining next_logprobs and advance.
inline double sequence_logprob(const LanguageModel& lm, std::span<const TokenId> query,
                               std::span<const TokenId> tokens) {
  auto s = lm.start(query);
  double total = 0;
  for (TokenId t : tokens) {
    total += lm.next_logprobs(s)[t];
    s = lm.advance(s, t);
  }
  return total;
}

struct BuiltinLmOptions {
  std::size_t order = 2;
  double query_boost = 2.0;
  double smoothing = 0.1;
};

/// Additively smoothed ngram model over the corpus titles and bodies (each
/// stream read separately). Tokens occurring in the query get `query_boost`
/// added to their logit before renormalisation. Unseen contexts back off to
/// the longest seen suffix.
class BuiltinLm final : public LanguageModel {
 public:
  static BuiltinLm fit(const Corpus& corpus, const BuiltinLmOptions& opt = {}) {
    if (corpus.size() == 0) throw Error("empty corpus");
    if (opt.order == 0) throw Error("ngram order must be at least 1");
    BuiltinLm lm;
    lm.opt_ = opt;
    lm.vocab_size_ = corpus.vocabulary().size();
    auto add_stream = [&](const TokenSeq& s) {
      for (std::size_t i = 0; i < s.size(); ++i) {
        for (std::size_t ctx = 0; ctx < opt.order && ctx <= i; ++ctx) {
          auto& st = lm.contexts_[TokenSeq(s.begin() + (i - ctx), s.begin() + i)];
          ++st.total;
          ++st.next[s[i]];
        }
      }
    };
    for (const auto& d : corpus.documents()) {
      add_stream(d.title);
      add_stream(d.body);
    }
    return lm;
  }

  std::size_t vocab_size() const override { return vocab_size_; }
  const BuiltinLmOptions& options() const noexcept { return opt_; }

  LogProbVector next_logprobs(const LmSession& session) const override {
    const ContextStats* st = nullptr;
    std::size_t ctx = std::min(opt_.order - 1, session.history.size());
    for (;; --ctx) {
      TokenSeq key(session.history.end() - ctx, session.history.end());
      if (auto it = contexts_.find(key); it != contexts_.end()) {
        st = &it->second;
        break;
      }
      if (ctx == 0) break;
    }
    const double a = opt_.smoothing;
    const double denom = (st ? static_cast<double>(st->total) : 0.0) + a * static_cast<double>(vocab_size_);
    LogProbVector lp(vocab_size_, std::log(a / denom));
    if (st)
      for (auto [t, c] : st->next) lp[t] = std::log((c + a) / denom);

    if (opt_.query_boost != 0 && !session.query.empty()) {
      std::unordered_set<TokenId> q(session.query.begin(), session.query.end());
      // Normaliser after boosting the query tokens: 1 + sum_q p(t) (e^b - 1).
      double z = 1.0;
      double gain = std::expm1(opt_.query_boost);
      for (TokenId t : q)
        if (t < vocab_size_) z += std::exp(lp[t]) * gain;
      double logz = std::log(z);
      for (auto& v : lp) v -= logz;
      for (TokenId t : q)
        if (t < vocab_size_) lp[t] += opt_.query_boost;
    }
    return lp;
  }

 private:
  struct SeqHash {
    std::size_t operator()(const TokenSeq& s) const noexcept {
      std::uint64_t h = 0x9e3779b97f4a7c15ULL ^ s.size();
      for (TokenId t : s) h = (h ^ t) * 0x100000001b3ULL;
      return static_cast<std::size_t>(h);
    }
  };
  struct ContextStats {
    std::uint64_t total = 0;
    std::unordered_map<TokenId, std::uint32_t> next;
  };

  BuiltinLmOptions opt_;
  std::size_t vocab_size_ = 0;
  std::unordered_map<TokenSeq, ContextStats, SeqHash> contexts_;
};

}  // namespace seal
