#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "seal/corpus.hpp"

#ifndef SEAL_TOY_DIR
#error "SEAL_TOY_DIR must point at the bundled toy data"
#endif

namespace seal::testing {

inline std::string toy_path(const std::string& name) { return std::string(SEAL_TOY_DIR) + "/" + name; }

inline const Corpus& toy_corpus() {
  static const Corpus c = ingest_jsonl(toy_path("corpus.jsonl"), SimpleTokenizer{});
  return c;
}

struct ToyQueryRecord {
  std::string id;
  std::string text;
};

inline std::vector<ToyQueryRecord> toy_queries() {
  std::ifstream in(toy_path("queries.jsonl"));
  std::vector<ToyQueryRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    auto j = nlohmann::json::parse(line);
    out.push_back({j["id"], j["text"]});
  }
  return out;
}

}  // namespace seal::testing
