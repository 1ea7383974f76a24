#pragma once

#include <initializer_list>
#include <string>
#include <vector>

#include "seal/corpus.hpp"
#include "seal/lm.hpp"

namespace seal::testing {

struct TextDoc {
  std::string id;
  std::string title;
  std::string text;
};

/// Corpus from whitespace-tokenized strings.
inline Corpus text_corpus(std::initializer_list<TextDoc> docs) {
  SimpleTokenizer tok;
  Vocabulary v;
  std::vector<Document> out;
  for (const auto& d : docs) {
    Document doc;
    doc.doc_id = d.id;
    for (const auto& w : tok.split(d.title)) doc.title.push_back(v.add(w));
    for (const auto& w : tok.split(d.text)) doc.body.push_back(v.add(w));
    out.push_back(std::move(doc));
  }
  return Corpus(std::move(out), std::move(v));
}

inline TokenSeq ids(const Vocabulary& v, std::string_view text) {
  return encode_text(text, SimpleTokenizer{}, v);
}

/// Deterministic LM that prefers tokens by a fixed table of logits, independent
/// of history unless a scripted continuation is given.
class ScriptedLm final : public LanguageModel {
 public:
  explicit ScriptedLm(std::size_t vocab) : logits_(vocab, 0.0) {}

  ScriptedLm& prefer(TokenId t, double logit) {
    logits_.at(t) = logit;
    return *this;
  }
  /// After `history`, use `logits` instead.
  ScriptedLm& after(TokenSeq history, std::vector<std::pair<TokenId, double>> logits) {
    script_.emplace_back(std::move(history), std::move(logits));
    return *this;
  }

  std::size_t vocab_size() const override { return logits_.size(); }

  LogProbVector next_logprobs(const LmSession& s) const override {
    auto l = logits_;
    for (const auto& [h, over] : script_)
      if (h == s.history)
        for (auto [t, v] : over) l.at(t) = v;
    double z = log_sum_exp(l);
    for (auto& x : l) x -= z;
    return l;
  }

 private:
  std::vector<double> logits_;
  std::vector<std::pair<TokenSeq, std::vector<std::pair<TokenId, double>>>> script_;
};

}  // namespace seal::testing
