#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "seal/engine.hpp"
#include "support/toy.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

// Runs the CLI through the shell; stderr is folded into the output when asked.
Result run(const std::string& args, bool with_stderr = false, const std::string& env = "") {
  std::string cmd = env + (env.empty() ? "" : " ") + "\"" SEAL_CLI "\" " + args + (with_stderr ? " 2>&1" : " 2>/dev/null");
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  while (std::size_t n = fread(buf, 1, sizeof buf, p)) r.out.append(buf, n);
  int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / ("seal_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir_);
    auto r = run("build --corpus " + seal::testing::toy_path("corpus.jsonl") + " -o " + path("toy.idx"));
    ASSERT_EQ(r.code, 0);
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }
  static std::string path(const std::string& name) { return (dir_ / name).string(); }

  static fs::path dir_;
};

fs::path Cli::dir_;

}  // namespace

TEST_F(Cli, UnknownFlagIsUsageError) {
  auto r = run("query --index " + path("toy.idx") + " --text x --no-such-flag", true);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("no-such-flag"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("Usage"), std::string::npos) << r.out;
  EXPECT_EQ(run("", true).code, 2);
  EXPECT_EQ(run("query --index " + path("toy.idx") + " --text x --mode bogus").code, 2);
  EXPECT_EQ(run("query --index " + path("toy.idx") + " --text x --beta 1.5").code, 2);
}

TEST_F(Cli, JsonErrors) {
  auto r = run("--json query --index " + path("toy.idx") + " --text x --bogus");
  EXPECT_EQ(r.code, 2);
  auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["kind"], "usage");
  r = run("--json query --index " + path("missing.idx") + " --text x");
  EXPECT_EQ(r.code, 1);
  j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["kind"], "runtime");
  EXPECT_NE(j["error"].get<std::string>().find("missing.idx"), std::string::npos);
}

TEST_F(Cli, BuildQueryEvalSmoke) {
  auto q = run("query --index " + path("toy.idx") + " --queries " + seal::testing::toy_path("queries.jsonl") +
               " -o " + path("run.tsv") + " --mode intersective --beam 15 --steps 10 --alpha 2.0 --beta 0.8");
  ASSERT_EQ(q.code, 0);
  auto runfile = seal::read_run(path("run.tsv"));
  EXPECT_FALSE(runfile.empty());
  std::set<std::string> ids;
  for (const auto& rec : runfile) {
    ids.insert(rec.query_id);
    EXPECT_EQ(rec.mode, "intersective");
    EXPECT_LE(rec.rank, 100u);
  }
  EXPECT_EQ(ids.size(), seal::testing::toy_queries().size());

  auto e = run("--json eval --run " + path("run.tsv") + " --qrels " + seal::testing::toy_path("qrels.jsonl") +
               " --index " + path("toy.idx") + " --k 1,10");
  ASSERT_EQ(e.code, 0) << e.out;
  auto j = nlohmann::json::parse(e.out);
  for (const char* key : {"hits@1", "hits@10", "accuracy@10", "r_precision_passage", "r_precision_page"}) {
    ASSERT_TRUE(j.contains(key)) << key;
    EXPECT_GE(j[key].get<double>(), 0.0);
    EXPECT_LE(j[key].get<double>(), 1.0);
  }
  EXPECT_GE(j["hits@10"].get<double>(), j["hits@1"].get<double>());
  EXPECT_EQ(j["queries"], 100);
}

TEST_F(Cli, IndexFromEnvironment) {
  auto r = run("query --text \"" + seal::testing::toy_queries()[0].text + "\" -k 3", false,
               "SEAL_INDEX=" + path("toy.idx"));
  ASSERT_EQ(r.code, 0);
  std::istringstream in(r.out);
  auto runfile = seal::read_run(in);
  EXPECT_EQ(runfile.size(), 3u);
  auto missing = run("query --text x", true, "SEAL_INDEX=");
  EXPECT_EQ(missing.code, 1);
  EXPECT_NE(missing.out.find("SEAL_INDEX"), std::string::npos);
}

TEST_F(Cli, ConfigFile) {
  {
    std::ofstream cfg(path("seal.toml"));
    cfg << "[query]\nindex = \"" << path("toy.idx") << "\"\nmode = \"lm_fm\"\nk = 4\nbeam = 5\n";
  }
  auto r = run("--config " + path("seal.toml") + " query --text \"" + seal::testing::toy_queries()[1].text + "\"");
  ASSERT_EQ(r.code, 0);
  std::istringstream in(r.out);
  auto runfile = seal::read_run(in);
  ASSERT_FALSE(runfile.empty());
  EXPECT_LE(runfile.size(), 4u);
  EXPECT_EQ(runfile[0].mode, "lm_fm");
  // Command-line flags take precedence over the file.
  r = run("--config " + path("seal.toml") + " query -k 2 --text \"" + seal::testing::toy_queries()[1].text + "\"");
  std::istringstream in2(r.out);
  EXPECT_EQ(seal::read_run(in2).size(), 2u);
}

TEST_F(Cli, AblationSwitches) {
  const std::string text = seal::testing::toy_queries()[2].text;
  for (const char* flags : {"--constrained false", "--beam 3", "--title-share 0", "--mode lm", "--threads 2"}) {
    auto r = run("--json query --index " + path("toy.idx") + " --text \"" + text + "\" " + flags);
    ASSERT_EQ(r.code, 0) << flags;
    auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j["query_id"], "q") << flags;
    EXPECT_TRUE(j["results"].is_array()) << flags;
  }
}

TEST_F(Cli, ExportTrain) {
  auto r = run("export-train --corpus " + seal::testing::toy_path("corpus.jsonl") + " --queries " +
               seal::testing::toy_path("queries.jsonl") + " --qrels " + seal::testing::toy_path("qrels.jsonl") +
               " --unsupervised 1 --seed 3 -o " + path("pairs.jsonl") + " --vocab-out " + path("vocab.txt"));
  ASSERT_EQ(r.code, 0);
  std::ifstream in(path("pairs.jsonl"));
  std::string line;
  std::size_t n = 0;
  std::map<std::string, std::size_t> kinds;
  while (std::getline(in, line)) {
    ++n;
    kinds[nlohmann::json::parse(line)["kind"]]++;
  }
  EXPECT_EQ(kinds["supervised-span"], 100u * 10u);
  EXPECT_EQ(kinds["supervised-title"], 100u);
  EXPECT_EQ(kinds["unsupervised-span"] + kinds["unsupervised-title"], 1000u);
  EXPECT_EQ(n, 2100u);
  EXPECT_TRUE(fs::exists(path("vocab.txt")));
}
