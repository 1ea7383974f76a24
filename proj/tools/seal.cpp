// seal: build an index, retrieve, evaluate run files, export training pairs.
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "seal/bridge.hpp"
#include "seal/metrics.hpp"
#include "seal/training.hpp"

namespace {

using nlohmann::json;

struct Settings {
  bool json_output = false;

  std::string corpus_path;
  std::string index_path;
  std::string out_path;
  std::size_t sa_rate = 32;
  std::string vocab_out;

  std::string text;
  std::string queries_path;
  std::string mode = "intersective";
  std::string lm = "builtin";
  std::size_t lm_order = 2;
  double query_boost = 2.0;
  std::size_t threads = 1;
  int bridge_timeout_ms = 30000;
  seal::RetrieveConfig cfg;

  std::string run_path;
  std::string qrels_path;
  std::vector<std::size_t> ks{1, 5, 10, 20, 100};

  std::size_t unsupervised = 1;
  seal::SupervisedExportOptions sup;
};

class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_.open(path, std::ios::binary);
      if (!file_) throw seal::Error("cannot write " + path);
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

std::string resolve_index(const Settings& s) {
  if (!s.index_path.empty()) return s.index_path;
  if (const char* env = std::getenv("SEAL_INDEX"); env && *env) return env;
  throw seal::Error("no index given: pass --index or set SEAL_INDEX");
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int cmd_build(const Settings& s) {
  auto t0 = std::chrono::steady_clock::now();
  seal::SimpleTokenizer tok;
  auto corpus = seal::ingest_jsonl(s.corpus_path, tok);
  auto ix = seal::FmIndex::build(corpus, {.sa_rate = static_cast<std::uint32_t>(s.sa_rate)});
  ix.save(s.out_path);
  if (!s.vocab_out.empty()) corpus.vocabulary().save(s.vocab_out);
  auto bytes = std::filesystem::file_size(s.out_path);
  if (s.json_output) {
    std::cout << json{{"documents", corpus.size()},    {"tokens", corpus.total_tokens()},
                      {"vocabulary", ix.alphabet_size()}, {"index_bytes", bytes},
                      {"seconds", seconds_since(t0)}}
                     .dump()
              << '\n';
  } else {
    std::cerr << "indexed " << corpus.size() << " documents, " << corpus.total_tokens() << " tokens, vocabulary "
              << ix.alphabet_size() << " -> " << s.out_path << " (" << bytes << " bytes, " << seconds_since(t0)
              << " s)\n";
  }
  return 0;
}

std::unique_ptr<seal::LanguageModel> open_lm(const Settings& s, const seal::FmIndex& ix) {
  if (s.lm == "builtin")
    return std::make_unique<seal::BuiltinLm>(
        seal::BuiltinLm::fit(ix.to_corpus(), {.order = s.lm_order, .query_boost = s.query_boost}));
  if (s.lm.starts_with("bridge:"))
    return std::make_unique<seal::BridgeLm>(
        seal::BridgeLm::connect(s.lm.substr(7), ix.vocabulary(), s.bridge_timeout_ms));
  throw seal::Error("--lm must be 'builtin' or 'bridge:<address>'");
}

json retrieval_json(const std::string& qid, const seal::Retrieval& r, const seal::FmIndex& ix,
                    const seal::Tokenizer& tok) {
  json docs = json::array();
  auto ngrams = seal::scored_candidates(r.candidates, ix);
  for (std::size_t i = 0; i < r.docs.size(); ++i) {
    const auto& d = r.docs[i];
    json ev = json::array();
    for (const auto& e : d.evidence) {
      if (e.ngram >= ngrams.size()) continue;
      ev.push_back({{"ngram", seal::decode_text(ngrams[e.ngram].tokens, tok, ix.vocabulary())},
                    {"weight", e.weight},
                    {"cover", e.cover}});
    }
    docs.push_back({{"rank", i + 1}, {"doc_id", d.doc_id}, {"score", d.score}, {"evidence", ev}});
  }
  json out{{"query_id", qid}, {"candidates", r.candidates.hypotheses.size()}, {"results", docs}};
  if (!r.candidates.warning.empty()) out["warning"] = r.candidates.warning;
  return out;
}

int cmd_query(Settings s) {
  if (s.text.empty() == s.queries_path.empty()) throw seal::Error("pass exactly one of --text or --queries");
  s.cfg.mode = seal::parse_mode(s.mode);
  auto ix = seal::FmIndex::load(resolve_index(s));
  auto lm = open_lm(s, ix);
  seal::SimpleTokenizer tok;
  std::vector<seal::QueryRecord> queries;
  if (!s.text.empty())
    queries.push_back({"q", s.text});
  else
    queries = seal::read_queries(s.queries_path);
  // The bridge serializes calls; extra threads would only wait on it.
  std::size_t threads = s.lm == "builtin" ? s.threads : 1;
  Output out(s.out_path);
  auto t0 = std::chrono::steady_clock::now();
  seal::batch_retrieve(queries, tok, ix, *lm, s.cfg, threads,
                       [&](std::size_t i, const seal::Run& run, const seal::Retrieval& r) {
                         if (s.json_output)
                           out.stream() << retrieval_json(queries[i].id, r, ix, tok).dump() << '\n';
                         else
                           seal::write_run(out.stream(), run);
                         if (!r.candidates.warning.empty())
                           std::cerr << "warning: " << queries[i].id << ": " << r.candidates.warning << '\n';
                       });
  out.stream().flush();
  if (!s.json_output)
    std::cerr << "retrieved " << queries.size() << " queries in " << seconds_since(t0) << " s\n";
  return 0;
}

int cmd_eval(const Settings& s) {
  auto run = seal::read_run(s.run_path);
  auto qrels = seal::read_qrels(s.qrels_path);
  seal::SimpleTokenizer tok;
  seal::Corpus corpus = !s.corpus_path.empty() ? seal::ingest_jsonl(s.corpus_path, tok)
                                               : seal::FmIndex::load(resolve_index(s)).to_corpus();
  seal::PassageTable table(corpus, tok);
  auto report = seal::evaluate(run, qrels, s.ks, table);
  if (s.json_output) {
    json j = report;
    j["queries"] = qrels.size();
    std::cout << j.dump() << '\n';
  } else {
    std::cout << "queries\t" << qrels.size() << '\n';
    for (const auto& [name, value] : report) std::cout << name << '\t' << value << '\n';
  }
  return 0;
}

int cmd_export(const Settings& s) {
  seal::SimpleTokenizer tok;
  auto corpus = seal::ingest_jsonl(s.corpus_path, tok);
  std::vector<seal::TrainingPair> pairs;
  if (!s.queries_path.empty()) {
    if (s.qrels_path.empty()) throw seal::Error("--queries needs --qrels for the gold documents");
    auto qrels = seal::read_qrels(s.qrels_path);
    std::vector<seal::QueryExample> examples;
    for (const auto& q : seal::read_queries(s.queries_path)) {
      auto it = qrels.find(q.id);
      if (it == qrels.end() || it->second.gold_doc_ids.empty())
        throw seal::Error("query '" + q.id + "' has no gold document in qrels");
      examples.push_back({q.text, it->second.gold_doc_ids.front()});
    }
    pairs = seal::export_training_pairs(corpus, examples, tok, s.sup);
  }
  if (s.unsupervised > 0) {
    auto un = seal::export_unsupervised_pairs(
        corpus, {.pairs_per_doc = s.unsupervised, .ngram_len = s.sup.ngram_len, .seed = s.sup.seed + 1});
    pairs.insert(pairs.end(), un.begin(), un.end());
  }
  Output out(s.out_path);
  seal::write_training_pairs(out.stream(), pairs);
  if (!s.vocab_out.empty()) corpus.vocabulary().save(s.vocab_out);
  if (s.json_output)
    std::cout << json{{"pairs", pairs.size()}}.dump() << '\n';
  else
    std::cerr << "wrote " << pairs.size() << " training pairs\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  Settings s;
  CLI::App app{"Generative retrieval over a compressed full-text index"};
  app.set_config("--config", "", "Read options from a TOML/INI file");
  app.add_flag("--json", s.json_output, "Machine-readable output and errors");
  app.require_subcommand(1);
  app.fallthrough();

  auto* build = app.add_subcommand("build", "Index a JSONL corpus");
  build->add_option("--corpus", s.corpus_path, "Corpus records {id, title, text, page_id?}")->required();
  build->add_option("-o,--out", s.out_path, "Index file to write")->required();
  build->add_option("--sa-rate", s.sa_rate, "Suffix-array sampling rate")->check(CLI::PositiveNumber);
  build->add_option("--vocab-out", s.vocab_out, "Also write the vocabulary file");

  auto* query = app.add_subcommand("query", "Retrieve documents for one or many queries");
  query->add_option("--index", s.index_path, "Index file (default: $SEAL_INDEX)");
  query->add_option("--text", s.text, "A single query");
  query->add_option("--queries", s.queries_path, "Query records {id, text}");
  query->add_option("-o,--out", s.out_path, "Run file to write (default: stdout)");
  query->add_option("-k,--k", s.cfg.k, "Documents per query")->check(CLI::PositiveNumber);
  query->add_option("--mode", s.mode, "lm, lm_fm or intersective")
      ->check(CLI::IsMember({"lm", "lm_fm", "intersective"}));
  query->add_option("--beam", s.cfg.decode.beam, "Beam size")->check(CLI::PositiveNumber);
  query->add_option("--steps", s.cfg.decode.steps, "Decoding steps")->check(CLI::PositiveNumber);
  query->add_option("--alpha", s.cfg.score.alpha, "Exponent on ngram weights");
  query->add_option("--beta", s.cfg.score.beta, "Coverage discount")->check(CLI::Range(0.0, 1.0));
  query->add_option("--constrained", s.cfg.decode.constrained, "Mask unattested continuations (true/false)");
  query->add_option("--title-share", s.cfg.decode.title_share, "Fraction of the beam decoding titles")
      ->check(CLI::Range(0.0, 1.0));
  query->add_option("--match-titles", s.cfg.score.match_titles, "Count title occurrences as matches");
  query->add_option("--lm", s.lm, "builtin or bridge:<exec:CMD|tcp:HOST:PORT|unix:PATH>");
  query->add_option("--lm-order", s.lm_order, "Order of the builtin ngram model")->check(CLI::PositiveNumber);
  query->add_option("--query-boost", s.query_boost, "Builtin model logit boost for query tokens");
  query->add_option("--bridge-timeout", s.bridge_timeout_ms, "Bridge reply timeout in ms");
  query->add_option("--threads", s.threads, "Concurrent queries")->check(CLI::PositiveNumber);

  auto* eval = app.add_subcommand("eval", "Score a run file against qrels");
  eval->add_option("--run", s.run_path, "Run file")->required();
  eval->add_option("--qrels", s.qrels_path, "Qrels records")->required();
  eval->add_option("--index", s.index_path, "Index for passage text and pages (default: $SEAL_INDEX)");
  eval->add_option("--corpus", s.corpus_path, "Corpus instead of an index");
  eval->add_option("--k", s.ks, "Cutoffs")->delimiter(',');

  auto* exp = app.add_subcommand("export-train", "Write training pairs for an external model");
  exp->add_option("--corpus", s.corpus_path, "Corpus records")->required();
  exp->add_option("--queries", s.queries_path, "Query records for supervised pairs");
  exp->add_option("--qrels", s.qrels_path, "Gold documents of the queries");
  exp->add_option("-o,--out", s.out_path, "Pairs file (default: stdout)");
  exp->add_option("--unsupervised", s.unsupervised, "Unsupervised pairs per document");
  exp->add_option("--n-samples", s.sup.n_samples, "Sampled ngrams per query");
  exp->add_option("--ngram-len", s.sup.ngram_len, "Target ngram length")->check(CLI::PositiveNumber);
  exp->add_option("--temperature", s.sup.temperature, "Overlap softmax temperature")->check(CLI::PositiveNumber);
  exp->add_option("--seed", s.sup.seed, "Random seed");
  exp->add_option("--vocab-out", s.vocab_out, "Also write the vocabulary file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    if (s.json_output) {
      std::cout << json{{"error", e.what()}, {"kind", "usage"}}.dump() << '\n';
    } else {
      std::cerr << "error: " << e.what() << "\n\n" << app.help();
    }
    return 2;
  }

  try {
    if (*build) return cmd_build(s);
    if (*query) return cmd_query(s);
    if (*eval) return cmd_eval(s);
    if (*exp) return cmd_export(s);
  } catch (const std::exception& e) {
    if (s.json_output)
      std::cout << json{{"error", e.what()}, {"kind", "runtime"}}.dump() << '\n';
    else
      std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
