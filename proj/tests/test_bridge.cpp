#include <gtest/gtest.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <thread>

#include "seal/bridge.hpp"
#include "seal/decode.hpp"
#include "support/toy.hpp"

using namespace seal;
using namespace seal::testing;

namespace {

const Corpus& corpus() { return toy_corpus(); }

std::string vocab_file() {
  static const std::string path = [] {
    auto p = (std::filesystem::temp_directory_path() / ("seal_bridge_vocab_" + std::to_string(::getpid()))).string();
    corpus().vocabulary().save(p);
    return p;
  }();
  return path;
}

std::string stub(const std::string& flags = "") {
  return std::string("exec:") + SEAL_STUB_BRIDGE + " --vocab " + vocab_file() + " " + flags;
}

double exp_sum(const LogProbVector& lp) {
  double s = 0;
  for (double x : lp) s += std::exp(x);
  return s;
}

/// Stub listening on a socket, killed on scope exit.
class ListeningStub {
 public:
  explicit ListeningStub(const std::string& listen) {
    int out[2];
    if (::pipe(out) != 0) throw Error("pipe");
    pid_ = ::fork();
    if (pid_ == 0) {
      ::dup2(out[1], STDOUT_FILENO);
      ::close(out[0]);
      ::execl(SEAL_STUB_BRIDGE, SEAL_STUB_BRIDGE, "--vocab", vocab_file().c_str(), "--listen", listen.c_str(),
              static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(out[1]);
    detail::FdReader r(out[0], 10000);
    ready_ = r.line() == "ready";
    ::close(out[0]);
  }
  ~ListeningStub() {
    ::kill(pid_, SIGTERM);
    ::waitpid(pid_, nullptr, 0);
  }
  bool ready() const { return ready_; }

 private:
  pid_t pid_ = -1;
  bool ready_ = false;
};

TokenSeq query() { return encode_text(toy_queries()[0].text, SimpleTokenizer{}, corpus().vocabulary()); }

}  // namespace

TEST(Densify, DenseAndSparse) {
  nlohmann::json dense{{"logprobs", {std::log(0.5), std::log(0.25), std::log(0.25)}}};
  auto lp = densify(dense, 3);
  EXPECT_NEAR(exp_sum(lp), 1.0, 1e-12);
  nlohmann::json sparse{{"top", {{2, std::log(0.5)}}}, {"remainder", 0.5}};
  lp = densify(sparse, 3);
  EXPECT_NEAR(lp[2], std::log(0.5), 1e-12);
  EXPECT_NEAR(lp[0], std::log(0.25), 1e-12);
  EXPECT_NEAR(lp[1], std::log(0.25), 1e-12);
  nlohmann::json with_null{{"logprobs", {0.0, nullptr, nullptr}}};
  lp = densify(with_null, 3);
  EXPECT_EQ(lp[0], 0.0);
  EXPECT_EQ(lp[1], -INFINITY);
}

TEST(Densify, Rejections) {
  EXPECT_THROW(densify({{"logprobs", {0.0, 0.0}}}, 2), Error);                    // mass 2
  EXPECT_THROW(densify({{"logprobs", {0.0}}}, 2), Error);                         // wrong size
  EXPECT_THROW(densify({{"top", {{5, 0.0}}}, {"remainder", 0.0}}, 3), Error);     // id out of range
  EXPECT_THROW(densify({{"top", {{1, -1.0}, {1, -1.0}}}, {"remainder", 0.2}}, 3), Error);  // duplicate
  EXPECT_THROW(densify({{"top", {{0, 0.0}}}, {"remainder", -0.1}}, 3), Error);
  EXPECT_THROW(densify({{"nothing", 1}}, 3), Error);
  // Within tolerance: accepted and renormalized.
  auto lp = densify({{"logprobs", {std::log(0.50003), std::log(0.5)}}}, 2);
  EXPECT_NEAR(exp_sum(lp), 1.0, 1e-12);
}

TEST(Bridge, HandshakeAndDenseRoundTrip) {
  auto lm = BridgeLm::connect(stub("--model test-model"), corpus().vocabulary());
  EXPECT_EQ(lm.model(), "test-model");
  EXPECT_EQ(lm.vocab_size(), corpus().vocabulary().size());
  auto s = lm.start(query());
  auto lp = lm.next_logprobs(s);
  ASSERT_EQ(lp.size(), lm.vocab_size());
  EXPECT_NEAR(exp_sum(lp), 1.0, 1e-6);
  s = lm.advance(s, query()[0]);
  EXPECT_NEAR(exp_sum(lm.next_logprobs(s)), 1.0, 1e-6);
}

TEST(Bridge, SparseResponsesAreDensified) {
  auto lm = BridgeLm::connect(stub("--top 256"), corpus().vocabulary());
  auto lp = lm.next_logprobs(lm.start(query()));
  EXPECT_NEAR(exp_sum(lp), 1.0, 1e-6);
  EXPECT_NEAR(lp[0], lp[lm.vocab_size() - 1], 1e-9);
}

TEST(Bridge, VocabularyMismatchRefused) {
  try {
    BridgeLm::connect(stub("--wrong-hash"), corpus().vocabulary());
    FAIL() << "handshake should fail";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("vocabulary"), std::string::npos) << e.what();
  }
  Vocabulary other = corpus().vocabulary();
  other.add("zzz-extra");
  EXPECT_THROW(BridgeLm::connect(stub(), other), Error);
}

TEST(Bridge, UnnormalizedResponseRejected) {
  auto lm = BridgeLm::connect(stub("--skew 1.01"), corpus().vocabulary());
  EXPECT_THROW(lm.next_logprobs(lm.start(query())), Error);
  // The channel stays usable after an error.
  EXPECT_THROW(lm.next_logprobs(lm.start(query())), Error);
  auto ok = BridgeLm::connect(stub("--skew 1.00005"), corpus().vocabulary());
  EXPECT_NEAR(exp_sum(ok.next_logprobs(ok.start(query()))), 1.0, 1e-12);
}

TEST(Bridge, BadAddresses) {
  EXPECT_THROW(BridgeLm::connect("carrier-pigeon:x", corpus().vocabulary()), Error);
  EXPECT_THROW(BridgeLm::connect("tcp:nohostport", corpus().vocabulary()), Error);
  EXPECT_THROW(BridgeLm::connect("unix:/nonexistent/seal.sock", corpus().vocabulary()), Error);
  EXPECT_THROW(BridgeLm::connect("exec:/bin/false", corpus().vocabulary(), 2000), Error);
}

TEST(Bridge, UnixAndTcpChannels) {
  auto sock = (std::filesystem::temp_directory_path() / ("seal_stub_" + std::to_string(::getpid()) + ".sock")).string();
  {
    ListeningStub server("unix:" + sock);
    ASSERT_TRUE(server.ready());
    auto lm = BridgeLm::connect("unix:" + sock, corpus().vocabulary());
    EXPECT_NEAR(exp_sum(lm.next_logprobs(lm.start(query()))), 1.0, 1e-6);
  }
  std::filesystem::remove(sock);
  int port = 20000 + ::getpid() % 20000;
  ListeningStub server("tcp:" + std::to_string(port));
  ASSERT_TRUE(server.ready());
  auto lm = BridgeLm::connect("tcp:127.0.0.1:" + std::to_string(port), corpus().vocabulary());
  EXPECT_NEAR(exp_sum(lm.next_logprobs(lm.start(query()))), 1.0, 1e-6);
}

TEST(Bridge, ConcurrentSessions) {
  auto lm = BridgeLm::connect(stub("--top 64"), corpus().vocabulary());
  auto q = query();
  auto expected = lm.next_logprobs(lm.advance(lm.start(q), q[0]));
  std::vector<std::thread> pool;
  std::atomic<int> bad{0};
  for (int t = 0; t < 4; ++t)
    pool.emplace_back([&] {
      for (int i = 0; i < 20; ++i)
        if (lm.next_logprobs(lm.advance(lm.start(q), q[0])) != expected) ++bad;
    });
  for (auto& th : pool) th.join();
  EXPECT_EQ(bad.load(), 0);
}

TEST(Bridge, DecodingStaysAttestedAndNormalized) {
  const auto& c = corpus();
  auto ix = FmIndex::build(c);
  auto bridge = BridgeLm::connect(stub("--top 256"), c.vocabulary());
  auto builtin = BuiltinLm::fit(c);
  auto qs = toy_queries();
  for (std::size_t qi = 0; qi < 5; ++qi) {
    auto q = encode_text(qs[qi].text, SimpleTokenizer{}, c.vocabulary());
    for (const LanguageModel* lm : {static_cast<const LanguageModel*>(&bridge), static_cast<const LanguageModel*>(&builtin)}) {
      auto cs = constrained_beam_search(q, ix, *lm, {.beam = 5, .steps = 4});
      ASSERT_FALSE(cs.hypotheses.empty());
      for (const auto& h : cs.hypotheses) {
        EXPECT_GE(ix.count(h.tokens), 1u);
        EXPECT_EQ(h.range.width(), ix.count(h.tokens));
      }
      double mass = 0;
      for (double x : cs.first_step) mass += std::exp(x);
      EXPECT_NEAR(mass, 1.0, 1e-6);
    }
  }
}
