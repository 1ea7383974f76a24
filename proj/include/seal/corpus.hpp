#pragma once

#include <algorithm>
#include <fstream>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "json.hpp"
#include "seal/common.hpp"
#include "seal/vocabulary.hpp"

namespace seal {

struct Document {
  std::string doc_id;
  TokenSeq title;
  TokenSeq body;
  /// Page the passage belongs to; defaults to doc_id.
  std::string page_id;

  std::size_t length() const noexcept { return title.size() + body.size(); }
};

/// Ordered documents plus the vocabulary their ids refer to. Immutable once
/// constructed.
class Corpus {
 public:
  Corpus() = default;

  Corpus(std::vector<Document> docs, Vocabulary vocab)
      : docs_(std::move(docs)), vocab_(std::move(vocab)) {
    if (docs_.empty()) throw Error("empty corpus");
    std::unordered_set<std::string> seen;
    for (auto& d : docs_) {
      if (!seen.insert(d.doc_id).second) throw Error("duplicate doc_id '" + d.doc_id + "'");
      if (d.body.empty()) throw Error("document '" + d.doc_id + "' has an empty body");
      if (d.page_id.empty()) d.page_id = d.doc_id;
      auto bad = [&](TokenId t) { return reserved::is_reserved(t) || t >= vocab_.size(); };
      if (std::any_of(d.title.begin(), d.title.end(), bad) ||
          std::any_of(d.body.begin(), d.body.end(), bad))
        throw Error("document '" + d.doc_id + "' contains a reserved or unknown token id");
      total_tokens_ += d.length();
    }
  }

  const std::vector<Document>& documents() const noexcept { return docs_; }
  const Vocabulary& vocabulary() const noexcept { return vocab_; }
  std::size_t size() const noexcept { return docs_.size(); }

  /// Sum of document lengths (title + body), the normaliser of P(n).
  std::size_t total_tokens() const noexcept { return total_tokens_; }

 private:
  std::vector<Document> docs_;
  Vocabulary vocab_;
  std::size_t total_tokens_ = 0;
};

/// title ++ [separator] ++ body
inline TokenSeq encode_document(const Document& doc) {
  TokenSeq out;
  out.reserve(doc.length() + 1);
  out.insert(out.end(), doc.title.begin(), doc.title.end());
  out.push_back(reserved::kSeparator);
  out.insert(out.end(), doc.body.begin(), doc.body.end());
  return out;
}

/// Inverse of encode_document. Splits on the first separator.
inline std::pair<TokenSeq, TokenSeq> decode_document(std::span<const TokenId> encoded) {
  auto sep = std::find(encoded.begin(), encoded.end(), reserved::kSeparator);
  if (sep == encoded.end()) throw Error("encoded document has no separator");
  return {TokenSeq(encoded.begin(), sep), TokenSeq(sep + 1, encoded.end())};
}

/// Reads line-delimited records {"id", "title", "text", "page_id"?}. When
/// `vocab` is given it is extended in place; otherwise a fresh one is built.
inline Corpus ingest_jsonl(std::istream& in, const Tokenizer& tok, Vocabulary vocab = {}) {
  std::vector<Document> docs;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("malformed record: ") + e.what(), lineno);
    }
    if (!rec.is_object() || !rec.contains("id") || !rec.contains("text") ||
        !rec["id"].is_string() || !rec["text"].is_string())
      throw ParseError("record needs string fields id and text", lineno);
    Document d;
    d.doc_id = rec["id"].get<std::string>();
    if (!seen.insert(d.doc_id).second) throw ParseError("duplicate doc_id '" + d.doc_id + "'", lineno);
    if (rec.contains("page_id") && rec["page_id"].is_string()) d.page_id = rec["page_id"].get<std::string>();
    std::string title = rec.value("title", std::string());
    for (const auto& t : tok.split(title)) d.title.push_back(vocab.add(t));
    for (const auto& t : tok.split(rec["text"].get<std::string>())) d.body.push_back(vocab.add(t));
    if (d.body.empty()) throw ParseError("empty text for '" + d.doc_id + "'", lineno);
    docs.push_back(std::move(d));
  }
  if (docs.empty()) throw Error("empty corpus");
  return Corpus(std::move(docs), std::move(vocab));
}

inline Corpus ingest_jsonl(const std::string& path, const Tokenizer& tok, Vocabulary vocab = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open corpus file " + path);
  return ingest_jsonl(in, tok, std::move(vocab));
}

}  // namespace seal
