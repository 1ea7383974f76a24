#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace seal {

using TokenId = std::uint32_t;
using TokenSeq = std::vector<TokenId>;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by input parsers; carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Reserved ids. The terminator must be the globally smallest symbol.
namespace reserved {
inline constexpr TokenId kEndOfString = 0;
inline constexpr TokenId kSeparator = 1;
inline constexpr TokenId kSupervised = 2;
inline constexpr TokenId kUnsupervised = 3;
inline constexpr TokenId kSpan = 4;
inline constexpr TokenId kTitle = 5;
inline constexpr TokenId kCount = 6;

inline constexpr bool is_reserved(TokenId t) noexcept { return t < kCount; }
}  // namespace reserved

/// 64-bit FNV-1a, used for file checksums and vocabulary hashes.
class Fnv1a {
 public:
  void update(const void* data, std::size_t n) noexcept {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      state_ ^= p[i];
      state_ *= 0x100000001b3ULL;
    }
  }
  void update(std::string_view s) noexcept { update(s.data(), s.size()); }
  std::uint64_t digest() const noexcept { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

}  // namespace seal
