#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "seal/engine.hpp"

namespace seal {

/// Lowercase ASCII, whitespace runs collapsed to one space, trimmed.
inline std::string normalize_answer_text(std::string_view s) {
  std::string out;
  bool space = false;
  for (unsigned char c : s) {
    if (std::isspace(c)) {
      space = !out.empty();
      continue;
    }
    if (space) out += ' ';
    space = false;
    out += static_cast<char>(std::tolower(c));
  }
  return out;
}

/// Passage text and page id per doc_id, as needed by evaluation.
class PassageTable {
 public:
  PassageTable() = default;

  /// Passage text is the detokenized body; answers are tokenized the same way.
  PassageTable(const Corpus& corpus, const Tokenizer& tok) : tok_(&tok) {
    for (const auto& d : corpus.documents()) {
      text_[d.doc_id] = normalize_answer_text(decode_text(d.body, tok, corpus.vocabulary()));
      page_[d.doc_id] = d.page_id.empty() ? d.doc_id : d.page_id;
    }
  }

  bool contains_answer(const std::string& doc_id, const std::string& answer) const {
    auto it = text_.find(doc_id);
    if (it == text_.end()) throw Error("run names unknown document '" + doc_id + "'");
    std::string a = normalize_answer_text(tok_ ? tok_->join(tok_->split(answer)) : answer);
    return !a.empty() && it->second.find(a) != std::string::npos;
  }

  const std::string& page_of(const std::string& doc_id) const {
    auto it = page_.find(doc_id);
    if (it == page_.end()) throw Error("run names unknown document '" + doc_id + "'");
    return it->second;
  }

 private:
  const Tokenizer* tok_ = nullptr;
  std::unordered_map<std::string, std::string> text_;
  std::unordered_map<std::string, std::string> page_;
};

namespace detail {

/// Ranked doc ids per query; every run query must have a qrels entry.
inline std::map<std::string, std::vector<std::string>> ranked_lists(const Run& run, const Qrels& qrels) {
  check_run(run);
  std::map<std::string, std::vector<std::string>> lists;
  for (const auto& r : run) {
    if (!qrels.count(r.query_id)) throw Error("missing qrels entry for query '" + r.query_id + "'");
    lists[r.query_id].push_back(r.doc_id);
  }
  return lists;
}

}  // namespace detail

/// Fraction of qrels queries with an answer string inside one of the top-k
/// passages.
inline double accuracy_at_k(const Run& run, const Qrels& qrels, std::size_t k, const PassageTable& passages) {
  auto lists = detail::ranked_lists(run, qrels);
  if (qrels.empty()) throw Error("no qrels to evaluate");
  std::size_t hits = 0;
  for (const auto& [qid, e] : qrels) {
    if (e.answers.empty()) throw Error("qrels entry '" + qid + "' has no answers");
    const auto& docs = lists[qid];
    bool hit = false;
    for (std::size_t i = 0; i < std::min(k, docs.size()) && !hit; ++i)
      for (const auto& a : e.answers) hit = hit || passages.contains_answer(docs[i], a);
    hits += hit;
  }
  return static_cast<double>(hits) / static_cast<double>(qrels.size());
}

/// Fraction of qrels queries with a gold doc_id among the top k.
inline double hits_at_k(const Run& run, const Qrels& qrels, std::size_t k) {
  auto lists = detail::ranked_lists(run, qrels);
  if (qrels.empty()) throw Error("no qrels to evaluate");
  std::size_t hits = 0;
  for (const auto& [qid, e] : qrels) {
    if (e.gold_doc_ids.empty()) throw Error("qrels entry '" + qid + "' has no gold_doc_ids");
    std::set<std::string> gold(e.gold_doc_ids.begin(), e.gold_doc_ids.end());
    const auto& docs = lists[qid];
    bool hit = false;
    for (std::size_t i = 0; i < std::min(k, docs.size()); ++i) hit = hit || gold.count(docs[i]);
    hits += hit;
  }
  return static_cast<double>(hits) / static_cast<double>(qrels.size());
}

enum class Granularity { kPassage, kPage };

/// Macro-averaged R-precision. At page level, retrieved passages are mapped
/// to pages and repeated pages are counted once, at their first rank.
inline double r_precision(const Run& run, const Qrels& qrels, Granularity level,
                          const PassageTable* passages = nullptr) {
  auto lists = detail::ranked_lists(run, qrels);
  if (qrels.empty()) throw Error("no qrels to evaluate");
  if (level == Granularity::kPage && !passages) throw Error("page-level R-precision needs a passage table");
  double total = 0;
  for (const auto& [qid, e] : qrels) {
    std::set<std::string> gold;
    if (level == Granularity::kPassage) {
      gold.insert(e.gold_doc_ids.begin(), e.gold_doc_ids.end());
    } else if (!e.gold_page_ids.empty()) {
      gold.insert(e.gold_page_ids.begin(), e.gold_page_ids.end());
    } else {
      for (const auto& d : e.gold_doc_ids) gold.insert(passages->page_of(d));
    }
    if (gold.empty()) throw Error("qrels entry '" + qid + "' has R = 0");
    std::vector<std::string> ranked;
    std::set<std::string> seen;
    for (const auto& d : lists[qid]) {
      std::string item = level == Granularity::kPassage ? d : passages->page_of(d);
      if (seen.insert(item).second) ranked.push_back(std::move(item));
    }
    std::size_t found = 0;
    for (std::size_t i = 0; i < std::min(gold.size(), ranked.size()); ++i) found += gold.count(ranked[i]);
    total += static_cast<double>(found) / static_cast<double>(gold.size());
  }
  return total / static_cast<double>(qrels.size());
}

/// Every applicable metric, by name ("accuracy@5", "hits@10", ...).
inline std::map<std::string, double> evaluate(const Run& run, const Qrels& qrels, const std::vector<std::size_t>& ks,
                                              const PassageTable& passages) {
  std::map<std::string, double> report;
  bool answers = std::all_of(qrels.begin(), qrels.end(), [](const auto& e) { return !e.second.answers.empty(); });
  bool golds = std::all_of(qrels.begin(), qrels.end(), [](const auto& e) { return !e.second.gold_doc_ids.empty(); });
  for (std::size_t k : ks) {
    if (answers) report["accuracy@" + std::to_string(k)] = accuracy_at_k(run, qrels, k, passages);
    if (golds) report["hits@" + std::to_string(k)] = hits_at_k(run, qrels, k);
  }
  if (golds) report["r_precision_passage"] = r_precision(run, qrels, Granularity::kPassage);
  bool pages = std::all_of(qrels.begin(), qrels.end(), [](const auto& e) {
    return !e.second.gold_page_ids.empty() || !e.second.gold_doc_ids.empty();
  });
  if (pages) report["r_precision_page"] = r_precision(run, qrels, Granularity::kPage, &passages);
  return report;
}

}  // namespace seal
