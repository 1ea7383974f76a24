// Writes the bundled toy benchmark: corpus.jsonl, queries.jsonl, qrels.jsonl.
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "seal/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate the synthetic toy corpus"};
  std::string out = "data/toy";
  seal::synthetic::ToyOptions opt;
  app.add_option("-o,--out", out, "Output directory");
  app.add_option("--passages", opt.passages, "Number of passages");
  app.add_option("--queries", opt.queries, "Number of queries");
  app.add_option("--seed", opt.seed, "Random seed");
  app.add_option("--query-window", opt.query_window, "Verbatim passage tokens per query");
  CLI11_PARSE(app, argc, argv);
  try {
    std::filesystem::create_directories(out);
    auto data = seal::synthetic::make_toy(opt);
    seal::synthetic::write_toy(data, out);
    std::cout << data.passages.size() << " passages, " << data.queries.size() << " queries, " << data.tokens
              << " tokens -> " << out << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
