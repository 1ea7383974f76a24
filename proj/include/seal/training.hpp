#pragma once

#include <cmath>
#include <ostream>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "seal/corpus.hpp"

namespace seal {

enum class PairKind { kSupervisedSpan, kSupervisedTitle, kUnsupervisedSpan, kUnsupervisedTitle };

inline std::string_view to_string(PairKind k) {
  switch (k) {
    case PairKind::kSupervisedSpan: return "supervised-span";
    case PairKind::kSupervisedTitle: return "supervised-title";
    case PairKind::kUnsupervisedSpan: return "unsupervised-span";
    case PairKind::kUnsupervisedTitle: return "unsupervised-title";
  }
  return "?";
}

/// The two control ids prepended to every source: origin, then target kind.
inline std::array<TokenId, 2> control_prefix(PairKind k) {
  bool sup = k == PairKind::kSupervisedSpan || k == PairKind::kSupervisedTitle;
  bool title = k == PairKind::kSupervisedTitle || k == PairKind::kUnsupervisedTitle;
  return {sup ? reserved::kSupervised : reserved::kUnsupervised,
          title ? reserved::kTitle : reserved::kSpan};
}

struct TrainingPair {
  TokenSeq source;
  TokenSeq target;
  PairKind kind;

  friend bool operator==(const TrainingPair&, const TrainingPair&) = default;
};

struct QueryExample {
  std::string text;
  std::string gold_doc_id;
};

struct SupervisedExportOptions {
  std::size_t n_samples = 10;
  std::size_t ngram_len = 10;
  /// Softmax temperature over character overlap; lower sharpens the bias.
  double temperature = 0.1;
  std::uint64_t seed = 0;
};

struct UnsupervisedExportOptions {
  std::size_t pairs_per_doc = 1;
  std::size_t ngram_len = 10;
  std::uint64_t seed = 0;
};

namespace detail {

// Uniform double in [0,1) from the top 53 bits; independent of the
// standard library's distribution implementations.
inline double unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>(unit(rng) * static_cast<double>(n));
}

inline std::unordered_map<std::string, int> char_trigrams(const std::string& s) {
  std::unordered_map<std::string, int> g;
  if (s.size() < 3) {
    if (!s.empty()) ++g[s];
    return g;
  }
  for (std::size_t i = 0; i + 3 <= s.size(); ++i) ++g[s.substr(i, 3)];
  return g;
}

}  // namespace detail

/// F1 over the multisets of character trigrams of `a` and `b`.
inline double char_trigram_f1(const std::string& a, const std::string& b) {
  auto ga = detail::char_trigrams(a);
  auto gb = detail::char_trigrams(b);
  std::size_t na = 0, nb = 0, common = 0;
  for (auto& [g, c] : ga) {
    na += c;
    if (auto it = gb.find(g); it != gb.end()) common += std::min(c, it->second);
  }
  for (auto& [g, c] : gb) nb += c;
  if (common == 0) return 0.0;
  double p = static_cast<double>(common) / na;
  double r = static_cast<double>(common) / nb;
  return 2 * p * r / (p + r);
}

/// Windows of `len` tokens over `body`; a shorter body is its own single window.
inline std::vector<TokenSeq> body_windows(const TokenSeq& body, std::size_t len) {
  std::vector<TokenSeq> out;
  if (body.size() <= len) {
    out.push_back(body);
    return out;
  }
  for (std::size_t i = 0; i + len <= body.size(); ++i)
    out.emplace_back(body.begin() + i, body.begin() + i + len);
  return out;
}

/// Supervised pairs: per query, `n_samples` gold-document ngrams drawn with
/// replacement, biased towards character overlap with the query, plus one
/// title pair.
inline std::vector<TrainingPair> export_training_pairs(const Corpus& corpus,
                                                       std::span<const QueryExample> queries,
                                                       const Tokenizer& tok,
                                                       const SupervisedExportOptions& opt = {}) {
  std::unordered_map<std::string, const Document*> by_id;
  for (const auto& d : corpus.documents()) by_id.emplace(d.doc_id, &d);
  const auto& vocab = corpus.vocabulary();

  std::mt19937_64 rng(opt.seed);
  std::vector<TrainingPair> out;
  for (const auto& q : queries) {
    auto it = by_id.find(q.gold_doc_id);
    if (it == by_id.end()) throw Error("unknown gold doc_id '" + q.gold_doc_id + "'");
    const Document& doc = *it->second;
    TokenSeq query_ids = encode_text(q.text, tok, vocab);
    std::string query_norm = tok.join(tok.split(q.text));

    auto windows = body_windows(doc.body, opt.ngram_len);
    std::vector<double> cumulative;
    cumulative.reserve(windows.size());
    std::vector<double> overlap;
    overlap.reserve(windows.size());
    double max_overlap = 0;
    for (const auto& w : windows) {
      overlap.push_back(char_trigram_f1(decode_text(w, tok, vocab), query_norm));
      max_overlap = std::max(max_overlap, overlap.back());
    }
    double acc = 0;
    for (double o : overlap) {
      acc += std::exp((o - max_overlap) / opt.temperature);
      cumulative.push_back(acc);
    }

    auto source_for = [&](PairKind k) {
      auto pre = control_prefix(k);
      TokenSeq s(pre.begin(), pre.end());
      s.insert(s.end(), query_ids.begin(), query_ids.end());
      return s;
    };
    for (std::size_t i = 0; i < opt.n_samples; ++i) {
      double u = detail::unit(rng) * acc;
      auto pick = std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin();
      pick = std::min<std::ptrdiff_t>(pick, static_cast<std::ptrdiff_t>(windows.size()) - 1);
      out.push_back({source_for(PairKind::kSupervisedSpan), windows[pick], PairKind::kSupervisedSpan});
    }
    out.push_back({source_for(PairKind::kSupervisedTitle), doc.title, PairKind::kSupervisedTitle});
  }
  return out;
}

/// Unsupervised pairs: a uniform span predicts either another uniform span
/// or the title, with equal probability.
inline std::vector<TrainingPair> export_unsupervised_pairs(const Corpus& corpus,
                                                           const UnsupervisedExportOptions& opt = {}) {
  std::mt19937_64 rng(opt.seed);
  std::vector<TrainingPair> out;
  auto sample_span = [&](const TokenSeq& body) {
    if (body.size() <= opt.ngram_len) return body;
    std::size_t start = detail::uniform_index(rng, body.size() - opt.ngram_len + 1);
    return TokenSeq(body.begin() + start, body.begin() + start + opt.ngram_len);
  };
  for (const auto& doc : corpus.documents()) {
    for (std::size_t i = 0; i < opt.pairs_per_doc; ++i) {
      TokenSeq span = sample_span(doc.body);
      bool want_title = detail::unit(rng) < 0.5 && !doc.title.empty();
      PairKind kind = want_title ? PairKind::kUnsupervisedTitle : PairKind::kUnsupervisedSpan;
      auto pre = control_prefix(kind);
      TokenSeq source(pre.begin(), pre.end());
      source.insert(source.end(), span.begin(), span.end());
      out.push_back({std::move(source), want_title ? doc.title : sample_span(doc.body), kind});
    }
  }
  return out;
}

/// One JSON object per line: {"source_ids": [...], "target_ids": [...], "kind": "..."}.
inline void write_training_pairs(std::ostream& out, std::span<const TrainingPair> pairs) {
  for (const auto& p : pairs) {
    nlohmann::json j = {{"source_ids", p.source}, {"target_ids", p.target}, {"kind", to_string(p.kind)}};
    out << j.dump() << '\n';
  }
}

}  // namespace seal
