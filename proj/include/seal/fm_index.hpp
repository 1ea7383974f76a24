#pragma once

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "seal/bitvector.hpp"
#include "seal/corpus.hpp"
#include "seal/wavelet.hpp"

namespace seal {

/// Contiguous block of rows [lo, hi) of the rotation matrix, all prefixed by
/// the same pattern of `depth` tokens.
struct RowRange {
  std::size_t lo = 0;
  std::size_t hi = 0;
  std::size_t depth = 0;

  std::size_t width() const noexcept { return hi - lo; }
  bool empty() const noexcept { return lo >= hi; }
  friend bool operator==(const RowRange&, const RowRange&) = default;
};

struct Occurrence {
  std::uint32_t doc = 0;
  /// Token offset within the encoded document (title, separator, body).
  std::uint32_t offset = 0;
  bool is_title = false;

  friend auto operator<=>(const Occurrence&, const Occurrence&) = default;
};

struct Successor {
  TokenId token;
  std::size_t count;
  friend bool operator==(const Successor&, const Successor&) = default;
};

struct BuildOptions {
  std::uint32_t sa_rate = 32;
  /// Largest vocabulary the wavelet matrix accepts.
  std::size_t max_alphabet = std::size_t{1} << 24;
};

struct DocumentInfo {
  std::string doc_id;
  std::string page_id;
  std::uint32_t title_len = 0;
  /// Encoded length: title + separator + body, terminator excluded.
  std::uint32_t encoded_len = 0;
};

/// Compressed self-index over a corpus.
///
/// Every encoded document closed by its terminator is treated as a cyclic
/// string; the rotations of all documents are sorted together and the last
/// column is kept in a wavelet matrix. Documents are stored reversed, so a
/// backward-search step in the index appends a token on the right of the
/// pattern in reading order. Patterns without reserved ids therefore count
/// exactly their occurrences in the corpus; patterns containing the
/// terminator wrap around to the start of the same document.
class FmIndex {
 public:
  static constexpr char kMagic[8] = {'S', 'E', 'A', 'L', 'F', 'M', 'I', 'X'};
  static constexpr std::uint32_t kVersion = 1;

  FmIndex() = default;

  static FmIndex build(const Corpus& corpus, const BuildOptions& opt = {}) {
    if (corpus.size() == 0) throw Error("empty corpus");
    std::vector<TokenSeq> encoded;
    std::vector<DocumentInfo> infos;
    encoded.reserve(corpus.size());
    for (const auto& d : corpus.documents()) {
      encoded.push_back(encode_document(d));
      infos.push_back({d.doc_id, d.page_id, static_cast<std::uint32_t>(d.title.size()),
                       static_cast<std::uint32_t>(encoded.back().size())});
    }
    return build_impl(corpus.vocabulary(), encoded, std::move(infos), corpus.total_tokens(), opt);
  }

  /// Index over raw token sequences (no title/separator structure). Document
  /// ids are the sequence positions. Sequences must not contain the terminator.
  static FmIndex build_from_sequences(const Vocabulary& vocab, std::span<const TokenSeq> seqs,
                                      const BuildOptions& opt = {}) {
    if (seqs.empty()) throw Error("empty corpus");
    std::vector<DocumentInfo> infos;
    std::size_t total = 0;
    for (std::size_t j = 0; j < seqs.size(); ++j) {
      for (TokenId t : seqs[j])
        if (t == reserved::kEndOfString || t >= vocab.size()) throw Error("invalid token in sequence");
      infos.push_back({std::to_string(j), std::to_string(j), 0, static_cast<std::uint32_t>(seqs[j].size())});
      total += seqs[j].size();
    }
    return build_impl(vocab, seqs, std::move(infos), total, opt);
  }

 private:
  static FmIndex build_impl(const Vocabulary& vocab, std::span<const TokenSeq> encoded,
                            std::vector<DocumentInfo> infos, std::size_t total_tokens,
                            const BuildOptions& opt) {
    if (opt.sa_rate == 0) throw Error("sa_rate must be positive");
    const auto sigma = vocab.size();
    if (sigma > opt.max_alphabet)
      throw Error("alphabet of " + std::to_string(sigma) + " tokens exceeds the wavelet bound " +
                  std::to_string(opt.max_alphabet));

    FmIndex ix;
    ix.vocab_ = vocab;
    ix.sa_rate_ = opt.sa_rate;
    ix.total_tokens_ = total_tokens;
    ix.docs_ = std::move(infos);

    // Reversed documents, each followed by its terminator.
    std::vector<TokenId> text;
    std::vector<std::uint32_t> doc_of;
    ix.starts_.push_back(0);
    for (std::uint32_t j = 0; j < encoded.size(); ++j) {
      text.insert(text.end(), encoded[j].rbegin(), encoded[j].rend());
      text.push_back(reserved::kEndOfString);
      doc_of.resize(text.size(), j);
      ix.starts_.push_back(text.size());
    }
    if (text.size() >= (std::uint64_t{1} << 32)) throw Error("corpus too large for 32-bit positions");
    const std::size_t n = text.size();

    auto rows = sort_rotations(text, doc_of, ix.starts_);

    std::vector<TokenId> last(n);
    ix.sampled_ = RankBitVector(n);
    std::vector<std::uint32_t> sample_pos;
    for (std::size_t r = 0; r < n; ++r) {
      std::size_t p = rows[r];
      std::size_t s = ix.starts_[doc_of[p]], len = ix.starts_[doc_of[p] + 1] - s;
      std::size_t x = p - s;
      last[r] = text[s + (x + len - 1) % len];
      if (text[p] == reserved::kEndOfString) ix.dollar_doc_.push_back(doc_of[p]);
      if (x != 0 && x % opt.sa_rate == 0) {
        ix.sampled_.set(r);
        sample_pos.push_back(static_cast<std::uint32_t>(p));
      }
    }
    ix.sampled_.build_rank();
    ix.samples_ = std::move(sample_pos);

    ix.c_.assign(sigma + 1, 0);
    for (TokenId t : text) ++ix.c_[t + 1];
    for (std::size_t c = 1; c <= sigma; ++c) ix.c_[c] += ix.c_[c - 1];

    ix.bwt_ = WaveletMatrix(last, static_cast<TokenId>(sigma));
    ix.index_dollar_rows();
    return ix;
  }

 public:
  // -- queries -------------------------------------------------------------

  std::size_t size() const noexcept { return bwt_.size(); }
  std::size_t alphabet_size() const noexcept { return vocab_.size(); }
  std::size_t num_documents() const noexcept { return docs_.size(); }
  std::size_t total_tokens() const noexcept { return total_tokens_; }
  std::uint32_t sa_rate() const noexcept { return sa_rate_; }
  const Vocabulary& vocabulary() const noexcept { return vocab_; }
  const DocumentInfo& document(std::size_t j) const { return docs_.at(j); }

  RowRange full_range() const noexcept { return {0, size(), 0}; }

  /// Rows matching `pattern ++ token` (reading order). Empty if unattested.
  RowRange backward_extend(const RowRange& range, TokenId token) const {
    if (token >= alphabet_size()) throw Error("token id " + std::to_string(token) + " out of alphabet");
    if (range.empty()) return {0, 0, range.depth + 1};
    auto [rlo, rhi] = bwt_.rank_pair(token, range.lo, range.hi);
    return {c_[token] + rlo, c_[token] + rhi, range.depth + 1};
  }

  RowRange find(std::span<const TokenId> ngram) const {
    RowRange r = full_range();
    for (TokenId t : ngram) {
      r = backward_extend(r, t);
      if (r.empty()) return {0, 0, ngram.size()};
    }
    return r;
  }

  std::size_t count(std::span<const TokenId> ngram) const {
    return ngram.empty() ? 0 : find(ngram).width();
  }

  /// Tokens that follow the matched pattern, with their counts, ascending by id.
  std::vector<Successor> successors(const RowRange& range) const {
    std::vector<Successor> out;
    if (range.empty()) return out;
    bwt_.for_each_distinct(range.lo, range.hi,
                           [&](TokenId t, std::size_t c) { out.push_back({t, c}); });
    return out;
  }

  /// Every occurrence of the matched pattern, in row order.
  std::vector<Occurrence> locate(const RowRange& range) const {
    std::vector<Occurrence> out;
    if (range.empty()) return out;
    out.reserve(range.width());
    for (std::size_t r = range.lo; r < range.hi; ++r) out.push_back(locate_row(r, range.depth));
    return out;
  }

  /// Row of the rotation one position earlier in the stored (reversed) text.
  std::size_t lf(std::size_t row) const {
    auto [sym, rk] = bwt_.access_rank(row);
    return c_[sym] + rk;
  }

  TokenSeq bwt() const {
    TokenSeq out(size());
    for (std::size_t r = 0; r < size(); ++r) out[r] = bwt_.access(r);
    return out;
  }

  /// Encoded tokens of document j (terminator excluded), recovered from the BWT.
  TokenSeq document_tokens(std::size_t j) const {
    TokenSeq out;
    out.reserve(docs_.at(j).encoded_len);
    std::size_t r = dollar_row(j);
    for (;;) {
      auto [sym, rk] = bwt_.access_rank(r);
      if (sym == reserved::kEndOfString) break;
      out.push_back(sym);
      r = c_[sym] + rk;
    }
    return out;
  }

  /// Concatenation of every encoded document followed by its terminator.
  TokenSeq reconstruct() const {
    TokenSeq out;
    out.reserve(size());
    for (std::size_t j = 0; j < num_documents(); ++j) {
      auto d = document_tokens(j);
      out.insert(out.end(), d.begin(), d.end());
      out.push_back(reserved::kEndOfString);
    }
    return out;
  }

  /// Rebuilds a Corpus (ids, pages, token streams) from the index alone.
  Corpus to_corpus() const {
    std::vector<Document> docs;
    docs.reserve(num_documents());
    for (std::size_t j = 0; j < num_documents(); ++j) {
      auto enc = document_tokens(j);
      auto [title, body] = decode_document(enc);
      docs.push_back({docs_[j].doc_id, std::move(title), std::move(body), docs_[j].page_id});
    }
    return Corpus(std::move(docs), vocab_);
  }

  /// (row, global position in the stored text) for every suffix-array sample.
  std::vector<std::pair<std::size_t, std::size_t>> sa_samples() const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t r = 0; r < size(); ++r)
      if (sampled_[r]) out.emplace_back(r, samples_[sampled_.rank1(r)]);
    return out;
  }

  std::size_t stored_doc_start(std::size_t j) const { return starts_.at(j); }

  // -- persistence ---------------------------------------------------------

  void save(std::ostream& out) const {
    std::ostringstream payload(std::ios::binary);
    io::write_pod<std::uint64_t>(payload, vocab_.size());
    for (const auto& t : vocab_.tokens()) io::write_string(payload, t);
    io::write_pod<std::uint64_t>(payload, docs_.size());
    for (const auto& d : docs_) {
      io::write_string(payload, d.doc_id);
      io::write_string(payload, d.page_id);
      io::write_pod(payload, d.title_len);
      io::write_pod(payload, d.encoded_len);
    }
    io::write_pod<std::uint64_t>(payload, total_tokens_);
    io::write_vec(payload, c_);
    bwt_.save(payload);
    sampled_.save(payload);
    io::write_vec(payload, samples_);
    io::write_vec(payload, dollar_doc_);
    io::write_vec(payload, starts_);
    std::string body = std::move(payload).str();

    std::ostringstream header(std::ios::binary);
    header.write(kMagic, sizeof kMagic);
    io::write_pod(header, kVersion);
    io::write_pod(header, sa_rate_);
    io::write_pod<std::uint64_t>(header, vocab_.size());
    io::write_pod<std::uint64_t>(header, body.size());
    std::string head = std::move(header).str();

    Fnv1a h;
    h.update(head);
    h.update(body);
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    io::write_pod<std::uint64_t>(out, h.digest());
    if (!out) throw Error("failed writing index");
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write index file " + path);
    save(out);
  }

  static FmIndex load(std::istream& in) {
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    constexpr std::size_t kHeader = sizeof kMagic + 4 + 4 + 8 + 8;
    if (data.size() < sizeof kMagic || std::memcmp(data.data(), kMagic, sizeof kMagic) != 0)
      throw Error("not an index file (bad magic)");
    if (data.size() < kHeader) throw Error("truncated index file");
    std::istringstream head(data.substr(sizeof kMagic, kHeader - sizeof kMagic), std::ios::binary);
    auto version = io::read_pod<std::uint32_t>(head);
    if (version != kVersion)
      throw Error("index format version " + std::to_string(version) + " unsupported (expected " +
                  std::to_string(kVersion) + ")");
    auto sa_rate = io::read_pod<std::uint32_t>(head);
    auto sigma = io::read_pod<std::uint64_t>(head);
    auto body_len = io::read_pod<std::uint64_t>(head);
    if (data.size() < kHeader + body_len + 8) throw Error("truncated index file");
    if (data.size() > kHeader + body_len + 8) throw Error("trailing bytes after index payload");
    Fnv1a h;
    h.update(data.data(), kHeader + body_len);
    std::uint64_t stored;
    std::memcpy(&stored, data.data() + kHeader + body_len, 8);
    if (stored != h.digest()) throw Error("index checksum mismatch");

    std::istringstream body(data.substr(kHeader, body_len), std::ios::binary);
    FmIndex ix;
    ix.sa_rate_ = sa_rate;
    auto nv = io::read_pod<std::uint64_t>(body);
    if (nv != sigma) throw Error("corrupt index: alphabet size mismatch");
    {
      Vocabulary v;
      std::vector<std::string> toks;
      for (std::uint64_t i = 0; i < nv; ++i) toks.push_back(io::read_string(body));
      for (std::size_t i = 0; i < reserved::kCount; ++i)
        if (i >= toks.size() || toks[i] != Vocabulary::kReservedNames[i])
          throw Error("corrupt index: reserved vocabulary block");
      for (std::size_t i = reserved::kCount; i < toks.size(); ++i) v.add(toks[i]);
      ix.vocab_ = std::move(v);
    }
    auto nd = io::read_pod<std::uint64_t>(body);
    for (std::uint64_t j = 0; j < nd; ++j) {
      DocumentInfo d;
      d.doc_id = io::read_string(body);
      d.page_id = io::read_string(body);
      d.title_len = io::read_pod<std::uint32_t>(body);
      d.encoded_len = io::read_pod<std::uint32_t>(body);
      ix.docs_.push_back(std::move(d));
    }
    ix.total_tokens_ = io::read_pod<std::uint64_t>(body);
    ix.c_ = io::read_vec<std::uint64_t>(body);
    ix.bwt_ = WaveletMatrix::load(body);
    ix.sampled_ = RankBitVector::load(body);
    ix.samples_ = io::read_vec<std::uint32_t>(body);
    ix.dollar_doc_ = io::read_vec<std::uint32_t>(body);
    ix.starts_ = io::read_vec<std::uint64_t>(body);
    if (ix.c_.size() != sigma + 1 || ix.dollar_doc_.size() != nd || ix.starts_.size() != nd + 1 ||
        ix.sampled_.size() != ix.bwt_.size() || ix.starts_.back() != ix.bwt_.size())
      throw Error("corrupt index: inconsistent structure sizes");
    ix.index_dollar_rows();
    return ix;
  }

  static FmIndex load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open index file " + path);
    return load(in);
  }

  /// In-memory footprint of the query structures, in bytes.
  std::size_t structure_bytes() const {
    return bwt_.bytes() + sampled_.bytes() + samples_.size() * 4 + dollar_doc_.size() * 4 +
           starts_.size() * 8 + c_.size() * 8;
  }

 private:
  // Rotation order of the per-document cyclic strings in `text` by prefix
  // doubling. Rotations that stay equal (identical documents) are ordered by
  // position, which keeps LF consistent.
  static std::vector<std::uint32_t> sort_rotations(const std::vector<TokenId>& text,
                                                   const std::vector<std::uint32_t>& doc_of,
                                                   const std::vector<std::uint64_t>& starts) {
    const std::size_t n = text.size();
    std::size_t max_len = 0;
    for (std::size_t j = 0; j + 1 < starts.size(); ++j) max_len = std::max<std::size_t>(max_len, starts[j + 1] - starts[j]);

    std::vector<std::uint32_t> rank(text.begin(), text.end());
    std::vector<std::pair<std::uint64_t, std::uint32_t>> keyed(n);
    std::vector<std::uint32_t> order(n);
    for (std::size_t k = 1;; k *= 2) {
      for (std::size_t p = 0; p < n; ++p) {
        std::size_t s = starts[doc_of[p]], len = starts[doc_of[p] + 1] - s;
        std::size_t q = s + (p - s + k) % len;
        keyed[p] = {(std::uint64_t{rank[p]} << 32) | rank[q], static_cast<std::uint32_t>(p)};
      }
      std::sort(keyed.begin(), keyed.end());
      std::uint32_t next = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (i > 0 && keyed[i].first != keyed[i - 1].first) ++next;
        order[i] = keyed[i].second;
        rank[keyed[i].second] = next;
      }
      // Distinct, or compared past twice the longest period: remaining ties
      // are identical rotations.
      if (next + 1 == n || k >= max_len) break;
    }
    return order;
  }

  // Terminator rows are [0, num_documents()), one per document.
  std::size_t dollar_row(std::size_t j) const { return dollar_row_of_doc_.at(j); }

  void index_dollar_rows() {
    dollar_row_of_doc_.assign(dollar_doc_.size(), 0);
    for (std::size_t r = 0; r < dollar_doc_.size(); ++r) {
      if (dollar_doc_[r] >= dollar_doc_.size()) throw Error("corrupt index: terminator row map");
      dollar_row_of_doc_[dollar_doc_[r]] = static_cast<std::uint32_t>(r);
    }
  }

  Occurrence locate_row(std::size_t r, std::size_t depth) const {
    std::size_t steps = 0;
    std::uint32_t doc;
    std::size_t x;
    for (;;) {
      if (sampled_[r]) {
        std::size_t p = samples_[sampled_.rank1(r)];
        doc = static_cast<std::uint32_t>(std::upper_bound(starts_.begin(), starts_.end(), p) - starts_.begin() - 1);
        x = p - starts_[doc] + steps;
        break;
      }
      auto [sym, rk] = bwt_.access_rank(r);
      if (sym == reserved::kEndOfString) {
        doc = dollar_doc_[rk];
        x = steps;
        break;
      }
      r = c_[sym] + rk;
      ++steps;
    }
    // x is the offset of the reversed match in the stored document; map back
    // to the reading-order start of the pattern.
    const std::size_t len = docs_[doc].encoded_len + 1;
    const std::size_t enc = docs_[doc].encoded_len;
    std::size_t off = ((enc + 2 * len) - x - (depth % len)) % len;
    return {doc, static_cast<std::uint32_t>(off), off < docs_[doc].title_len};
  }

  Vocabulary vocab_;
  std::vector<DocumentInfo> docs_;
  std::uint32_t sa_rate_ = 32;
  std::uint64_t total_tokens_ = 0;
  std::vector<std::uint64_t> c_;
  WaveletMatrix bwt_;
  RankBitVector sampled_;
  std::vector<std::uint32_t> samples_;
  std::vector<std::uint32_t> dollar_doc_;
  std::vector<std::uint32_t> dollar_row_of_doc_;
  std::vector<std::uint64_t> starts_;
};

}  // namespace seal
