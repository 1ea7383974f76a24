#pragma once

#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>
#include <mutex>
#include <string>

#include "json.hpp"
#include "seal/lm.hpp"

namespace seal {

/// Wire protocol version spoken by BridgeLm.
inline constexpr int kBridgeProtocol = 1;
/// Largest tolerated deviation of exp-sum from 1 in a bridge response.
inline constexpr double kBridgeNormTolerance = 1e-4;

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// A bidirectional line channel.
class LineChannel {
 public:
  virtual ~LineChannel() = default;
  virtual void send(const std::string& line) = 0;
  virtual std::string receive() = 0;
};

namespace detail {

inline void write_all(int fd, const std::string& data) {
  std::size_t done = 0;
  while (done < data.size()) {
    ssize_t n = ::write(fd, data.data() + done, data.size() - done);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw Error(std::string("bridge write failed: ") + std::strerror(errno));
    done += static_cast<std::size_t>(n);
  }
}

/// Buffered line reader over a file descriptor with a per-line timeout.
class FdReader {
 public:
  FdReader(int fd, int timeout_ms) : fd_(fd), timeout_ms_(timeout_ms) {}

  std::string line() {
    for (;;) {
      if (auto nl = buf_.find('\n'); nl != std::string::npos) {
        std::string out = buf_.substr(0, nl);
        buf_.erase(0, nl + 1);
        return out;
      }
      pollfd p{fd_, POLLIN, 0};
      int r = ::poll(&p, 1, timeout_ms_);
      if (r < 0 && errno == EINTR) continue;
      if (r == 0) throw Error("bridge timed out");
      if (r < 0) throw Error(std::string("bridge poll failed: ") + std::strerror(errno));
      char chunk[65536];
      ssize_t n = ::read(fd_, chunk, sizeof chunk);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) throw Error("bridge closed the connection");
      buf_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 private:
  int fd_;
  int timeout_ms_;
  std::string buf_;
};

}  // namespace detail

/// Child process speaking the protocol on stdin/stdout.
class ExecChannel final : public LineChannel {
 public:
  ExecChannel(const std::string& command, int timeout_ms) {
    int to_child[2], from_child[2];
    if (::pipe(to_child) != 0 || ::pipe(from_child) != 0) throw Error("cannot create bridge pipes");
    pid_ = ::fork();
    if (pid_ < 0) throw Error("cannot fork bridge process");
    if (pid_ == 0) {
      ::dup2(to_child[0], STDIN_FILENO);
      ::dup2(from_child[1], STDOUT_FILENO);
      ::close(to_child[0]);
      ::close(to_child[1]);
      ::close(from_child[0]);
      ::close(from_child[1]);
      ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    in_ = to_child[1];
    out_ = from_child[0];
    reader_ = std::make_unique<detail::FdReader>(out_, timeout_ms);
    ::signal(SIGPIPE, SIG_IGN);
  }
  ~ExecChannel() override {
    ::close(in_);
    ::close(out_);
    int status = 0;
    ::waitpid(pid_, &status, 0);
  }
  void send(const std::string& line) override { detail::write_all(in_, line + "\n"); }
  std::string receive() override { return reader_->line(); }

 private:
  pid_t pid_ = -1;
  int in_ = -1;
  int out_ = -1;
  std::unique_ptr<detail::FdReader> reader_;
};

/// Stream socket (TCP or Unix domain).
class SocketChannel final : public LineChannel {
 public:
  static std::unique_ptr<SocketChannel> tcp(const std::string& host, const std::string& port, int timeout_ms) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res); rc != 0)
      throw Error("cannot resolve bridge host " + host + ": " + ::gai_strerror(rc));
    int fd = -1;
    for (auto* a = res; a; a = a->ai_next) {
      fd = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
      if (fd < 0) continue;
      if (::connect(fd, a->ai_addr, a->ai_addrlen) == 0) break;
      ::close(fd);
      fd = -1;
    }
    ::freeaddrinfo(res);
    if (fd < 0) throw Error("cannot connect to bridge at " + host + ":" + port);
    return std::unique_ptr<SocketChannel>(new SocketChannel(fd, timeout_ms));
  }

  static std::unique_ptr<SocketChannel> unix_socket(const std::string& path, int timeout_ms) {
    sockaddr_un addr{};
    addr.sun_family = AF_UNIX;
    if (path.size() >= sizeof addr.sun_path) throw Error("bridge socket path too long");
    std::memcpy(addr.sun_path, path.c_str(), path.size() + 1);
    int fd = ::socket(AF_UNIX, SOCK_STREAM, 0);
    if (fd < 0) throw Error("cannot create socket");
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
      ::close(fd);
      throw Error("cannot connect to bridge at " + path);
    }
    return std::unique_ptr<SocketChannel>(new SocketChannel(fd, timeout_ms));
  }

  ~SocketChannel() override { ::close(fd_); }
  void send(const std::string& line) override { detail::write_all(fd_, line + "\n"); }
  std::string receive() override { return reader_.line(); }

 private:
  SocketChannel(int fd, int timeout_ms) : fd_(fd), reader_(fd, timeout_ms) { ::signal(SIGPIPE, SIG_IGN); }
  int fd_;
  detail::FdReader reader_;
};

/// Opens `exec:CMD`, `tcp:HOST:PORT` or `unix:PATH`.
inline std::unique_ptr<LineChannel> open_channel(const std::string& address, int timeout_ms = 30000) {
  auto rest = [&](std::string_view prefix) { return address.substr(prefix.size()); };
  if (address.starts_with("exec:")) return std::make_unique<ExecChannel>(rest("exec:"), timeout_ms);
  if (address.starts_with("unix:")) return SocketChannel::unix_socket(rest("unix:"), timeout_ms);
  if (address.starts_with("tcp:")) {
    auto hp = rest("tcp:");
    auto colon = hp.rfind(':');
    if (colon == std::string::npos) throw Error("bridge address needs tcp:HOST:PORT");
    return SocketChannel::tcp(hp.substr(0, colon), hp.substr(colon + 1), timeout_ms);
  }
  throw Error("unknown bridge address '" + address + "' (expected exec:, tcp: or unix:)");
}

/// Dense log-probabilities from a `next` response: either `logprobs` over
/// the whole vocabulary, or `top` pairs plus `remainder` probability spread
/// evenly over the ids not sent. Checked to sum to 1 within 1e-4, then
/// renormalized exactly.
inline LogProbVector densify(const nlohmann::json& resp, std::size_t vocab) {
  LogProbVector lp;
  if (resp.contains("logprobs")) {
    // JSON has no infinities; null stands for a zero-probability token.
    for (const auto& x : resp["logprobs"])
      lp.push_back(x.is_null() ? -std::numeric_limits<double>::infinity() : x.get<double>());
    if (lp.size() != vocab)
      throw Error("bridge sent " + std::to_string(lp.size()) + " log-probabilities for a vocabulary of " +
                  std::to_string(vocab));
  } else if (resp.contains("top")) {
    lp.assign(vocab, std::nan(""));
    std::size_t sent = 0;
    for (const auto& pair : resp["top"]) {
      auto id = pair.at(0).get<std::size_t>();
      if (id >= vocab) throw Error("bridge sent token id " + std::to_string(id) + " outside the vocabulary");
      if (!std::isnan(lp[id])) throw Error("bridge sent token id " + std::to_string(id) + " twice");
      lp[id] = pair.at(1).is_null() ? -std::numeric_limits<double>::infinity() : pair.at(1).get<double>();
      ++sent;
    }
    double rem = resp.value("remainder", 0.0);
    if (rem < 0 || rem > 1) throw Error("bridge remainder mass outside [0, 1]");
    double fill = sent < vocab && rem > 0 ? std::log(rem / static_cast<double>(vocab - sent))
                                          : -std::numeric_limits<double>::infinity();
    for (auto& x : lp)
      if (std::isnan(x)) x = fill;
  } else {
    throw Error("bridge response has neither logprobs nor top");
  }
  double mass = 0;
  for (double x : lp) {
    if (std::isnan(x) || x > 1e-9) throw Error("bridge sent an invalid log-probability");
    mass += std::exp(x);
  }
  if (std::abs(mass - 1.0) > kBridgeNormTolerance)
    throw Error("bridge distribution sums to " + std::to_string(mass));
  double z = std::log(mass);
  for (auto& x : lp) x -= z;
  return lp;
}

/// LanguageModel served by an external process over line-delimited JSON.
///
/// Handshake: {"op":"hello","version":1,"vocab_hash":H,"vocab_size":N} is
/// answered with {"ok":true,"model":M,"vocab_hash":H}. Afterwards each
/// next_logprobs call replays the session: start, one advance per history
/// token, next, end.
class BridgeLm final : public LanguageModel {
 public:
  BridgeLm(std::unique_ptr<LineChannel> channel, const Vocabulary& vocab)
      : channel_(std::move(channel)), vocab_size_(vocab.size()) {
    auto hash = hex64(vocab.hash());
    auto resp = call({{"op", "hello"}, {"version", kBridgeProtocol}, {"vocab_hash", hash}, {"vocab_size", vocab_size_}});
    if (resp.contains("error")) throw Error("bridge refused handshake: " + resp["error"].get<std::string>());
    if (resp.value("vocab_hash", std::string()) != hash)
      throw Error("bridge vocabulary hash " + resp.value("vocab_hash", std::string("?")) +
                  " does not match index vocabulary " + hash);
    model_ = resp.value("model", std::string("unknown"));
  }

  static BridgeLm connect(const std::string& address, const Vocabulary& vocab, int timeout_ms = 30000) {
    return BridgeLm(open_channel(address, timeout_ms), vocab);
  }

  ~BridgeLm() override {
    if (!channel_) return;
    try {
      channel_->send(nlohmann::json{{"op", "bye"}}.dump());
    } catch (...) {
    }
  }
  BridgeLm(BridgeLm&&) noexcept = default;

  std::size_t vocab_size() const override { return vocab_size_; }
  const std::string& model() const noexcept { return model_; }

  LogProbVector next_logprobs(const LmSession& session) const override {
    std::lock_guard lock(*mu_);
    const std::uint64_t sid = ++next_session_;
    std::string batch = nlohmann::json{{"session_id", sid}, {"op", "start"}, {"query_ids", session.query}}.dump();
    batch += '\n';
    for (TokenId t : session.history)
      batch += nlohmann::json{{"session_id", sid}, {"op", "advance"}, {"token", t}}.dump() + '\n';
    batch += nlohmann::json{{"session_id", sid}, {"op", "next"}}.dump() + '\n';
    batch += nlohmann::json{{"session_id", sid}, {"op", "end"}}.dump();
    channel_->send(batch);
    const std::size_t replies = session.history.size() + 3;
    LogProbVector out;
    std::string failure;
    for (std::size_t i = 0; i < replies; ++i) {
      auto resp = parse(channel_->receive());
      if (resp.value("session_id", std::uint64_t{0}) != sid && failure.empty())
        failure = "bridge answered for the wrong session";
      if (resp.contains("error") && failure.empty()) failure = "bridge error: " + resp["error"].get<std::string>();
      if (i == session.history.size() + 1 && failure.empty()) {
        try {
          out = densify(resp, vocab_size_);
        } catch (const Error& e) {
          failure = e.what();
        }
      }
    }
    if (!failure.empty()) throw Error(failure);
    return out;
  }

 private:
  static nlohmann::json parse(const std::string& line) {
    try {
      return nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      throw Error("bridge sent a malformed message");
    }
  }

  nlohmann::json call(const nlohmann::json& req) {
    channel_->send(req.dump());
    return parse(channel_->receive());
  }

  std::unique_ptr<LineChannel> channel_;
  std::size_t vocab_size_ = 0;
  std::string model_;
  std::unique_ptr<std::mutex> mu_ = std::make_unique<std::mutex>();
  mutable std::uint64_t next_session_ = 0;
};

}  // namespace seal
