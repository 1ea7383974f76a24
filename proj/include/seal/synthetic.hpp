#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "seal/common.hpp"

namespace seal::synthetic {

/// Topic-structured pseudo-language: Zipfian function words, per-topic content
/// words and stock phrases, and a few page-specific names per passage.
struct ToyOptions {
  std::size_t passages = 1000;
  std::size_t queries = 100;
  std::size_t topics = 40;
  std::size_t common_words = 300;
  std::size_t topic_words = 30;
  std::size_t min_body = 40;
  std::size_t max_body = 70;
  /// Length of the verbatim passage window each query contains.
  std::size_t query_window = 3;
  std::uint64_t seed = 42;
};

struct ToyPassage {
  std::string id;
  std::string page_id;
  std::string title;
  std::string text;
};

struct ToyQuery {
  std::string id;
  std::string text;
  std::string gold_doc_id;
  std::string gold_page_id;
  std::string answer;
};

struct ToyData {
  std::vector<ToyPassage> passages;
  std::vector<ToyQuery> queries;
  std::size_t tokens = 0;
};

namespace detail {

class Words {
 public:
  explicit Words(std::mt19937_64& rng) : rng_(rng) {}

  std::string fresh() {
    static constexpr const char* kOnset[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z",
                                             "br", "tr", "st", "sk", "pl", "gr", "ch", "sh"};
    static constexpr const char* kNucleus[] = {"a", "e", "i", "o", "u", "ai", "ou", "ei"};
    static constexpr const char* kCoda[] = {"", "", "", "n", "r", "s", "l", "m", "th"};
    for (;;) {
      std::string w;
      std::size_t syll = 1 + rng_() % 3;
      for (std::size_t i = 0; i < syll; ++i) {
        w += kOnset[rng_() % std::size(kOnset)];
        w += kNucleus[rng_() % std::size(kNucleus)];
      }
      w += kCoda[rng_() % std::size(kCoda)];
      if (used_.insert(w).second) return w;
    }
  }

 private:
  std::mt19937_64& rng_;
  std::set<std::string> used_;
};

/// Sampler for ranks 0..n-1 with P(r) proportional to 1/(r+1)^s.
class Zipf {
 public:
  Zipf(std::size_t n, double s) : cdf_(n) {
    double acc = 0;
    for (std::size_t r = 0; r < n; ++r) cdf_[r] = acc += 1.0 / std::pow(static_cast<double>(r + 1), s);
    for (auto& c : cdf_) c /= acc;
  }
  std::size_t operator()(std::mt19937_64& rng) const {
    double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return std::min<std::size_t>(std::upper_bound(cdf_.begin(), cdf_.end(), u) - cdf_.begin(), cdf_.size() - 1);
  }

 private:
  std::vector<double> cdf_;
};

inline std::string join(const std::vector<std::string>& ws) {
  std::string out;
  for (const auto& w : ws) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

}  // namespace detail

inline ToyData make_toy(const ToyOptions& opt = {}) {
  if (opt.passages == 0 || opt.topics == 0) throw Error("toy corpus needs passages and topics");
  if (opt.min_body < 8 || opt.max_body < opt.min_body) throw Error("toy body length range is invalid");
  std::mt19937_64 rng(opt.seed);
  detail::Words words(rng);
  auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };

  std::vector<std::string> common(opt.common_words);
  for (auto& w : common) w = words.fresh();
  struct Topic {
    std::vector<std::string> words;
    std::vector<std::vector<std::string>> phrases;
  };
  std::vector<Topic> topics(opt.topics);
  for (auto& t : topics) {
    t.words.resize(opt.topic_words);
    for (auto& w : t.words) w = words.fresh();
    for (int p = 0; p < 6; ++p) t.phrases.push_back({t.words[pick(t.words.size())], common[pick(20)],
                                                      t.words[pick(t.words.size())]});
  }
  detail::Zipf common_rank(common.size(), 1.1);
  detail::Zipf topic_rank(opt.topic_words, 0.8);

  ToyData data;
  struct Meta {
    std::vector<std::string> body;
    std::vector<std::string> names;  // [page name, passage name, answer]
    std::size_t topic;
  };
  std::vector<Meta> meta;
  std::size_t page = 0;
  while (data.passages.size() < opt.passages) {
    std::size_t topic = pick(topics.size());
    const auto& tp = topics[topic];
    std::string page_name = words.fresh();
    std::string title = tp.words[pick(4)] + " " + page_name;
    std::size_t n_pass = std::min<std::size_t>(1 + pick(3), opt.passages - data.passages.size());
    for (std::size_t k = 0; k < n_pass; ++k) {
      std::vector<std::string> names{page_name, words.fresh(), words.fresh()};
      std::size_t len = opt.min_body + pick(opt.max_body - opt.min_body + 1);
      std::vector<std::string> body;
      while (body.size() < len) {
        double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        if (u < 0.08) {
          const auto& ph = tp.phrases[pick(tp.phrases.size())];
          body.insert(body.end(), ph.begin(), ph.end());
        } else if (u < 0.50) {
          body.push_back(common[common_rank(rng)]);
        } else if (u < 0.88) {
          body.push_back(tp.words[topic_rank(rng)]);
        } else {
          body.push_back(names[pick(names.size())]);
        }
      }
      // Every name occurs at least once.
      for (std::size_t i = 0; i < names.size(); ++i)
        if (std::find(body.begin(), body.end(), names[i]) == body.end())
          body[(i * 7 + 3) % body.size()] = names[i];
      ToyPassage p;
      p.id = "doc" + std::to_string(data.passages.size());
      p.page_id = "page" + std::to_string(page);
      p.title = title;
      p.text = detail::join(body);
      data.tokens += body.size() + 2;
      data.passages.push_back(std::move(p));
      meta.push_back({std::move(body), std::move(names), topic});
    }
    ++page;
  }

  std::vector<std::size_t> order(data.passages.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t qi = 0; qi < std::min(opt.queries, order.size()); ++qi) {
    const auto& m = meta[order[qi]];
    const auto& p = data.passages[order[qi]];
    // A short verbatim window, the page and passage names, and one topic word.
    const std::size_t win = std::min(opt.query_window, m.body.size());
    std::size_t start = pick(m.body.size() - win + 1);
    std::vector<std::string> q{common[pick(5)]};
    q.insert(q.end(), m.body.begin() + start, m.body.begin() + start + win);
    q.push_back(m.names[0]);
    q.push_back(m.names[1]);
    q.push_back(topics[m.topic].words[topic_rank(rng)]);
    std::erase(q, m.names[2]);
    data.queries.push_back({"q" + std::to_string(qi), detail::join(q), p.id, p.page_id, m.names[2]});
  }
  return data;
}

inline void write_toy(const ToyData& data, const std::string& dir) {
  auto open = [&](const std::string& name) {
    std::ofstream out(dir + "/" + name, std::ios::binary);
    if (!out) throw Error("cannot write " + dir + "/" + name);
    return out;
  };
  auto corpus = open("corpus.jsonl");
  for (const auto& p : data.passages)
    corpus << nlohmann::json{{"id", p.id}, {"title", p.title}, {"text", p.text}, {"page_id", p.page_id}}.dump()
           << '\n';
  auto queries = open("queries.jsonl");
  auto qrels = open("qrels.jsonl");
  for (const auto& q : data.queries) {
    queries << nlohmann::json{{"id", q.id}, {"text", q.text}}.dump() << '\n';
    qrels << nlohmann::json{{"query_id", q.id},
                            {"gold_doc_ids", {q.gold_doc_id}},
                            {"gold_page_ids", {q.gold_page_id}},
                            {"answers", {q.answer}}}
                 .dump()
          << '\n';
  }
}

}  // namespace seal::synthetic
