#pragma once

#include <atomic>
#include <condition_variable>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "seal/score.hpp"

namespace seal {

struct RetrieveConfig {
  DecodeOptions decode;
  ScoreOptions score;
  ScoringMode mode = ScoringMode::kIntersective;
  std::size_t k = 100;
};

struct Retrieval {
  std::vector<DocScore> docs;
  CandidateSet candidates;
};

/// decode -> score -> rank, truncated to the top k.
inline Retrieval retrieve(std::span<const TokenId> query, const FmIndex& ix, const LanguageModel& lm,
                          const RetrieveConfig& cfg) {
  Retrieval r;
  if (query.empty()) {
    r.candidates.warning = "query has no known tokens";
    return r;
  }
  r.candidates = constrained_beam_search(query, ix, lm, cfg.decode);
  r.docs = rank(cfg.mode, r.candidates, ix, cfg.score);
  if (r.docs.size() > cfg.k) r.docs.resize(cfg.k);
  return r;
}

struct QueryRecord {
  std::string id;
  std::string text;
};

/// Reads line-delimited {"id", "text"} records ("query_id" and "query" are
/// accepted as aliases).
inline std::vector<QueryRecord> read_queries(std::istream& in) {
  std::vector<QueryRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("malformed query record: ") + e.what(), lineno);
    }
    auto field = [&](const char* a, const char* b) -> std::string {
      if (j.contains(a) && j[a].is_string()) return j[a];
      if (j.contains(b) && j[b].is_string()) return j[b];
      throw ParseError(std::string("query record needs string field ") + a, lineno);
    };
    out.push_back({field("id", "query_id"), field("text", "query")});
  }
  return out;
}

inline std::vector<QueryRecord> read_queries(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open queries file " + path);
  return read_queries(in);
}

/// One line of a run file.
struct RunRecord {
  std::string query_id;
  std::string doc_id;
  std::size_t rank = 0;
  double score = 0;
  std::string mode;
};

using Run = std::vector<RunRecord>;

inline void check_run(const Run& run) {
  std::map<std::string, std::pair<std::size_t, double>> last;
  for (const auto& r : run) {
    auto it = last.find(r.query_id);
    std::size_t want = it == last.end() ? 1 : it->second.first + 1;
    if (r.rank != want)
      throw Error("run ranks for query '" + r.query_id + "' are not contiguous from 1 (got " +
                  std::to_string(r.rank) + ", expected " + std::to_string(want) + ")");
    if (it != last.end() && r.score > it->second.second)
      throw Error("run scores for query '" + r.query_id + "' increase with rank");
    last[r.query_id] = {r.rank, r.score};
  }
}

inline std::string format_score(double s) {
  std::ostringstream o;
  o << std::setprecision(17) << s;
  return o.str();
}

/// Tab-separated: query_id, doc_id, rank, score, mode.
inline void write_run_record(std::ostream& out, const RunRecord& r) {
  out << r.query_id << '\t' << r.doc_id << '\t' << r.rank << '\t' << format_score(r.score) << '\t' << r.mode
      << '\n';
}

inline void write_run(std::ostream& out, const Run& run) {
  for (const auto& r : run) write_run_record(out, r);
}

inline Run read_run(std::istream& in) {
  Run run;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    for (;;) {
      auto tab = line.find('\t', start);
      f.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (f.size() != 5) throw ParseError("run record needs 5 tab-separated fields", lineno);
    RunRecord r{f[0], f[1], 0, 0, f[4]};
    try {
      std::size_t used = 0;
      auto rank = std::stoll(f[2], &used);
      if (used != f[2].size() || rank < 1) throw std::invalid_argument("rank");
      r.rank = static_cast<std::size_t>(rank);
      r.score = std::stod(f[3], &used);
      if (used != f[3].size()) throw std::invalid_argument("score");
    } catch (const std::exception&) {
      throw ParseError("bad rank or score in run record", lineno);
    }
    run.push_back(std::move(r));
  }
  check_run(run);
  return run;
}

inline Run read_run(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open run file " + path);
  return read_run(in);
}

inline Run to_run(const std::string& query_id, const std::vector<DocScore>& docs, ScoringMode mode) {
  Run run;
  for (std::size_t i = 0; i < docs.size(); ++i)
    run.push_back({query_id, docs[i].doc_id, i + 1, docs[i].score, std::string(to_string(mode))});
  return run;
}

/// Retrieves every query with `threads` workers; `emit` receives each
/// query's records in input order, one call at a time.
inline void batch_retrieve(const std::vector<QueryRecord>& queries, const Tokenizer& tok, const FmIndex& ix,
                           const LanguageModel& lm, const RetrieveConfig& cfg, std::size_t threads,
                           const std::function<void(std::size_t, const Run&, const Retrieval&)>& emit) {
  const std::size_t n = queries.size();
  std::vector<std::optional<std::pair<Run, Retrieval>>> done(n);
  std::vector<std::exception_ptr> errors(n);
  std::mutex mu;
  std::condition_variable cv;
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next++) < n;) {
      std::pair<Run, Retrieval> res;
      try {
        auto q = encode_text(queries[i].text, tok, ix.vocabulary());
        res.second = retrieve(q, ix, lm, cfg);
        res.first = to_run(queries[i].id, res.second.docs, cfg.mode);
      } catch (...) {
        errors[i] = std::current_exception();
      }
      {
        std::lock_guard lock(mu);
        done[i] = std::move(res);
      }
      cv.notify_all();
    }
  };
  threads = std::max<std::size_t>(1, std::min(threads, n));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(work);
  // Results are emitted in order while workers keep going.
  std::exception_ptr first_error;
  std::thread writer([&] {
    for (std::size_t i = 0; i < n; ++i) {
      std::unique_lock lock(mu);
      cv.wait(lock, [&] { return done[i].has_value(); });
      auto item = std::move(*done[i]);
      done[i].reset();
      lock.unlock();
      if (errors[i]) {
        if (!first_error) first_error = errors[i];
        continue;
      }
      if (!first_error) emit(i, item.first, item.second);
    }
  });
  work();
  for (auto& t : pool) t.join();
  writer.join();
  if (first_error) std::rethrow_exception(first_error);
}

/// Ground truth for one query.
struct QrelEntry {
  std::vector<std::string> gold_doc_ids;
  std::vector<std::string> gold_page_ids;
  std::vector<std::string> answers;
};

using Qrels = std::map<std::string, QrelEntry>;

inline Qrels read_qrels(std::istream& in) {
  Qrels out;
  std::string line;
  std::size_t lineno = 0;
  auto strings = [&](const nlohmann::json& j, const char* key) {
    std::vector<std::string> v;
    if (!j.contains(key)) return v;
    if (!j[key].is_array()) throw ParseError(std::string(key) + " must be a list", lineno);
    for (const auto& x : j[key]) {
      if (!x.is_string()) throw ParseError(std::string(key) + " must hold strings", lineno);
      v.push_back(x);
    }
    return v;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("malformed qrels record: ") + e.what(), lineno);
    }
    if (!j.contains("query_id") || !j["query_id"].is_string()) throw ParseError("qrels record needs query_id", lineno);
    QrelEntry e{strings(j, "gold_doc_ids"), strings(j, "gold_page_ids"), strings(j, "answers")};
    if (!out.emplace(j["query_id"].get<std::string>(), std::move(e)).second)
      throw ParseError("duplicate qrels entry for '" + j["query_id"].get<std::string>() + "'", lineno);
  }
  return out;
}

inline Qrels read_qrels(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open qrels file " + path);
  return read_qrels(in);
}

}  // namespace seal
