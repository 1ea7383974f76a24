#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <vector>

#include "seal/common.hpp"

namespace seal {

namespace io {

template <class T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw Error("truncated index file");
  return v;
}

template <class T>
void write_vec(std::ostream& out, const std::vector<T>& v) {
  write_pod<std::uint64_t>(out, v.size());
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <class T>
std::vector<T> read_vec(std::istream& in, std::uint64_t max_elems = 1ULL << 40) {
  auto n = read_pod<std::uint64_t>(in);
  if (n > max_elems) throw Error("corrupt index file: implausible array length");
  std::vector<T> v(n);
  if (!in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T))))
    throw Error("truncated index file");
  return v;
}

inline void write_string(std::ostream& out, const std::string& s) {
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in) {
  auto n = read_pod<std::uint32_t>(in);
  std::string s(n, '\0');
  if (!in.read(s.data(), n)) throw Error("truncated index file");
  return s;
}

}  // namespace io

/// Plain bitvector with constant-time rank. One absolute count is stored per
/// 512-bit superblock (12.5% overhead).
class RankBitVector {
 public:
  RankBitVector() = default;
  explicit RankBitVector(std::size_t n) : size_(n), words_((n + 63) / 64, 0) {}

  void set(std::size_t i) { words_[i / 64] |= 1ULL << (i % 64); }
  bool operator[](std::size_t i) const { return (words_[i / 64] >> (i % 64)) & 1ULL; }
  std::size_t size() const noexcept { return size_; }

  /// Must be called after the last set() and before any rank().
  void build_rank() {
    supers_.assign(words_.size() / kWordsPerSuper + 1, 0);
    std::uint64_t acc = 0;
    for (std::size_t w = 0; w < words_.size(); ++w) {
      if (w % kWordsPerSuper == 0) supers_[w / kWordsPerSuper] = acc;
      acc += std::popcount(words_[w]);
    }
    if (words_.size() % kWordsPerSuper == 0) supers_[words_.size() / kWordsPerSuper] = acc;
  }

  /// Number of ones in [0, i).
  std::size_t rank1(std::size_t i) const {
    std::size_t w = i / 64;
    std::size_t s = w / kWordsPerSuper;
    std::uint64_t r = supers_[s];
    for (std::size_t k = s * kWordsPerSuper; k < w; ++k) r += std::popcount(words_[k]);
    if (i % 64) r += std::popcount(words_[w] & ((1ULL << (i % 64)) - 1));
    return r;
  }
  std::size_t rank0(std::size_t i) const { return i - rank1(i); }

  std::size_t bytes() const noexcept { return (words_.size() + supers_.size()) * 8; }

  void save(std::ostream& out) const {
    io::write_pod<std::uint64_t>(out, size_);
    io::write_vec(out, words_);
  }

  static RankBitVector load(std::istream& in) {
    RankBitVector bv;
    bv.size_ = io::read_pod<std::uint64_t>(in);
    bv.words_ = io::read_vec<std::uint64_t>(in);
    if (bv.words_.size() != (bv.size_ + 63) / 64) throw Error("corrupt bitvector");
    bv.build_rank();
    return bv;
  }

 private:
  static constexpr std::size_t kWordsPerSuper = 8;
  std::size_t size_ = 0;
  std::vector<std::uint64_t> words_;
  std::vector<std::uint64_t> supers_;
};

}  // namespace seal
