#pragma once

#include <bit>
#include <span>
#include <utility>
#include <vector>

#include "seal/bitvector.hpp"

namespace seal {

/// Wavelet matrix over a sequence of symbols in [0, 2^levels). Levelwise
/// layout of a balanced wavelet tree: one bitvector per bit of the symbol
/// width, most significant bit first. access/rank are O(levels).
class WaveletMatrix {
 public:
  WaveletMatrix() = default;

  WaveletMatrix(std::span<const TokenId> seq, TokenId alphabet_size) : size_(seq.size()) {
    levels_ = alphabet_size <= 1 ? 1 : static_cast<unsigned>(std::bit_width(alphabet_size - 1));
    bits_.reserve(levels_);
    zeros_.reserve(levels_);
    std::vector<TokenId> cur(seq.begin(), seq.end());
    std::vector<TokenId> next(cur.size());
    for (unsigned l = 0; l < levels_; ++l) {
      unsigned shift = levels_ - 1 - l;
      RankBitVector bv(cur.size());
      std::size_t nz = 0;
      for (std::size_t i = 0; i < cur.size(); ++i) {
        if ((cur[i] >> shift) & 1U) bv.set(i);
        else ++nz;
      }
      bv.build_rank();
      // Stable partition: zeros first.
      std::size_t z = 0, o = nz;
      for (TokenId v : cur) next[((v >> shift) & 1U) ? o++ : z++] = v;
      std::swap(cur, next);
      bits_.push_back(std::move(bv));
      zeros_.push_back(nz);
    }
    alphabet_ = alphabet_size;
    compute_block_starts();
  }

  std::size_t size() const noexcept { return size_; }
  unsigned levels() const noexcept { return levels_; }

  TokenId access(std::size_t i) const {
    TokenId sym = 0;
    for (unsigned l = 0; l < levels_; ++l) {
      const auto& bv = bits_[l];
      if (bv[i]) {
        sym = (sym << 1) | 1U;
        i = zeros_[l] + bv.rank1(i);
      } else {
        sym <<= 1;
        i = bv.rank0(i);
      }
    }
    return sym;
  }

  /// Symbol at i together with its rank in [0, i); one descent.
  std::pair<TokenId, std::size_t> access_rank(std::size_t i) const {
    TokenId sym = 0;
    for (unsigned l = 0; l < levels_; ++l) {
      const auto& bv = bits_[l];
      if (bv[i]) {
        sym = (sym << 1) | 1U;
        i = zeros_[l] + bv.rank1(i);
      } else {
        sym <<= 1;
        i = bv.rank0(i);
      }
    }
    return {sym, i - block_start_[sym]};
  }

  /// Occurrences of `c` in [0, i).
  std::size_t rank(TokenId c, std::size_t i) const { return rank_pair(c, 0, i).second; }

  /// Occurrences of `c` in [0, lo) and [0, hi), sharing one descent.
  std::pair<std::size_t, std::size_t> rank_pair(TokenId c, std::size_t lo, std::size_t hi) const {
    if (levels_ < 32 && (c >> levels_) != 0) return {0, 0};
    std::size_t p = 0;
    for (unsigned l = 0; l < levels_; ++l) {
      const auto& bv = bits_[l];
      if ((c >> (levels_ - 1 - l)) & 1U) {
        p = zeros_[l] + bv.rank1(p);
        lo = zeros_[l] + bv.rank1(lo);
        hi = zeros_[l] + bv.rank1(hi);
      } else {
        p = bv.rank0(p);
        lo = bv.rank0(lo);
        hi = bv.rank0(hi);
      }
    }
    return {lo - p, hi - p};
  }

  /// Calls fn(symbol, count) for every distinct symbol in [lo, hi), in
  /// increasing symbol order. O(d log sigma) for d distinct symbols.
  template <class Fn>
  void for_each_distinct(std::size_t lo, std::size_t hi, Fn&& fn) const {
    if (lo < hi) distinct_rec(0, lo, hi, 0, fn);
  }

  std::size_t bytes() const noexcept {
    std::size_t b = zeros_.size() * 8;
    for (const auto& bv : bits_) b += bv.bytes();
    return b;
  }

  void save(std::ostream& out) const {
    io::write_pod<std::uint64_t>(out, size_);
    io::write_pod<std::uint32_t>(out, levels_);
    io::write_pod<std::uint32_t>(out, alphabet_);
    io::write_vec(out, zeros_);
    for (const auto& bv : bits_) bv.save(out);
  }

  static WaveletMatrix load(std::istream& in) {
    WaveletMatrix wm;
    wm.size_ = io::read_pod<std::uint64_t>(in);
    wm.levels_ = io::read_pod<std::uint32_t>(in);
    wm.alphabet_ = io::read_pod<std::uint32_t>(in);
    if (wm.levels_ == 0 || wm.levels_ > 32) throw Error("corrupt wavelet matrix");
    wm.zeros_ = io::read_vec<std::size_t>(in, 64);
    if (wm.zeros_.size() != wm.levels_) throw Error("corrupt wavelet matrix");
    for (unsigned l = 0; l < wm.levels_; ++l) {
      wm.bits_.push_back(RankBitVector::load(in));
      if (wm.bits_.back().size() != wm.size_) throw Error("corrupt wavelet matrix");
    }
    if (wm.alphabet_ == 0 || (wm.levels_ < 32 && (std::uint64_t{wm.alphabet_ - 1} >> wm.levels_) != 0))
      throw Error("corrupt wavelet matrix");
    wm.compute_block_starts();
    return wm;
  }

 private:
  // Start of each symbol's block in the bottom-level arrangement.
  void compute_block_starts() {
    block_start_.assign(alphabet_, 0);
    for (TokenId c = 0; c < alphabet_; ++c) {
      std::size_t p = 0;
      for (unsigned l = 0; l < levels_; ++l)
        p = ((c >> (levels_ - 1 - l)) & 1U) ? zeros_[l] + bits_[l].rank1(p) : bits_[l].rank0(p);
      block_start_[c] = p;
    }
  }

  template <class Fn>
  void distinct_rec(unsigned l, std::size_t lo, std::size_t hi, TokenId prefix, Fn& fn) const {
    if (l == levels_) {
      fn(prefix, hi - lo);
      return;
    }
    const auto& bv = bits_[l];
    std::size_t r1lo = bv.rank1(lo), r1hi = bv.rank1(hi);
    std::size_t zlo = lo - r1lo, zhi = hi - r1hi;
    if (zlo < zhi) distinct_rec(l + 1, zlo, zhi, prefix << 1, fn);
    if (r1lo < r1hi) distinct_rec(l + 1, zeros_[l] + r1lo, zeros_[l] + r1hi, (prefix << 1) | 1U, fn);
  }

  std::size_t size_ = 0;
  unsigned levels_ = 0;
  TokenId alphabet_ = 0;
  std::vector<RankBitVector> bits_;
  std::vector<std::size_t> block_start_;
  std::vector<std::size_t> zeros_;
};

}  // namespace seal
