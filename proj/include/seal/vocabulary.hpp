#pragma once

#include <array>
#include <optional>
#include <span>
#include <cctype>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "seal/common.hpp"

namespace seal {

/// Bijection between surface tokens and dense ids. Ids below
/// reserved::kCount are control symbols and never appear in content.
class Vocabulary {
 public:
  static constexpr std::array<std::string_view, reserved::kCount> kReservedNames = {
      "<eos>", "<sep>", "<supervised>", "<unsupervised>", "<span>", "<title>"};

  Vocabulary() {
    for (auto name : kReservedNames) push(std::string(name));
  }

  std::size_t size() const noexcept { return id_to_token_.size(); }

  /// Returns the id of `token`, adding it if unseen.
  TokenId add(std::string_view token) {
    if (auto it = token_to_id_.find(std::string(token)); it != token_to_id_.end()) {
      if (reserved::is_reserved(it->second))
        throw Error("token '" + std::string(token) + "' collides with a reserved name");
      return it->second;
    }
    return push(std::string(token));
  }

  /// Id of `token`, or nothing for unknown and reserved names.
  std::optional<TokenId> find(std::string_view token) const {
    auto it = token_to_id_.find(std::string(token));
    if (it == token_to_id_.end() || reserved::is_reserved(it->second)) return std::nullopt;
    return it->second;
  }

  const std::string& token(TokenId id) const {
    if (id >= id_to_token_.size()) throw Error("token id " + std::to_string(id) + " out of range");
    return id_to_token_[id];
  }

  const std::vector<std::string>& tokens() const noexcept { return id_to_token_; }

  std::uint64_t hash() const {
    Fnv1a h;
    for (const auto& t : id_to_token_) {
      h.update(t);
      h.update("\n", 1);
    }
    return h.digest();
  }

  // File layout: a '#'-prefixed header block declaring the reserved ids,
  // terminated by "#end", then one token per line where line i is id i.
  void write(std::ostream& out) const {
    out << "#seal-vocab 1\n#reserved";
    constexpr std::array<std::string_view, reserved::kCount> keys = {
        "end_of_string", "separator", "supervised", "unsupervised", "span", "title"};
    for (TokenId i = 0; i < reserved::kCount; ++i) out << ' ' << keys[i] << '=' << i;
    out << "\n#size " << size() << "\n#end\n";
    for (const auto& t : id_to_token_) out << t << '\n';
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write vocabulary file " + path);
    write(out);
  }

  static Vocabulary read(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    std::size_t declared = 0;
    bool header_done = false;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.rfind("#end", 0) == 0) {
        header_done = true;
        break;
      }
      if (line.rfind("#size ", 0) == 0) declared = std::stoull(line.substr(6));
      if (line.empty() || line[0] != '#') throw ParseError("expected vocabulary header", lineno);
    }
    if (!header_done) throw ParseError("missing #end in vocabulary header", lineno);
    Vocabulary v;
    v.id_to_token_.clear();
    v.token_to_id_.clear();
    while (std::getline(in, line)) {
      ++lineno;
      if (v.token_to_id_.count(line)) throw ParseError("duplicate token '" + line + "'", lineno);
      v.push(line);
    }
    if (v.size() < reserved::kCount) throw Error("vocabulary shorter than reserved block");
    for (TokenId i = 0; i < reserved::kCount; ++i)
      if (v.id_to_token_[i] != kReservedNames[i]) throw Error("reserved id mismatch at " + std::to_string(i));
    if (declared && declared != v.size())
      throw Error("vocabulary declares " + std::to_string(declared) + " tokens, found " +
                  std::to_string(v.size()));
    return v;
  }

  static Vocabulary load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open vocabulary file " + path);
    return read(in);
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.id_to_token_ == b.id_to_token_;
  }

 private:
  TokenId push(std::string token) {
    auto id = static_cast<TokenId>(id_to_token_.size());
    token_to_id_.emplace(token, id);
    id_to_token_.push_back(std::move(token));
    return id;
  }

  std::unordered_map<std::string, TokenId> token_to_id_;
  std::vector<std::string> id_to_token_;
};

/// Splits text into surface tokens. Implementations must be deterministic.
class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::vector<std::string> split(std::string_view text) const = 0;
  virtual std::string join(const std::vector<std::string>& tokens) const = 0;
};

/// Lowercases ASCII, splits on whitespace and isolates ASCII punctuation.
/// Bytes >= 0x80 are treated as word characters so UTF-8 passes through.
class SimpleTokenizer final : public Tokenizer {
 public:
  std::vector<std::string> split(std::string_view text) const override {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    };
    for (char ch : text) {
      auto c = static_cast<unsigned char>(ch);
      if (std::isspace(c)) {
        flush();
      } else if (c < 0x80 && std::ispunct(c)) {
        flush();
        out.emplace_back(1, ch);
      } else {
        cur.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
      }
    }
    flush();
    return out;
  }

  std::string join(const std::vector<std::string>& tokens) const override {
    std::string s;
    for (const auto& t : tokens) {
      if (!s.empty()) s.push_back(' ');
      s += t;
    }
    return s;
  }
};

/// Maps text to ids with a fixed vocabulary; unknown tokens are dropped.
inline TokenSeq encode_text(std::string_view text, const Tokenizer& tok, const Vocabulary& vocab) {
  TokenSeq ids;
  for (const auto& t : tok.split(text))
    if (auto id = vocab.find(t)) ids.push_back(*id);
  return ids;
}

inline std::string decode_text(std::span<const TokenId> ids, const Tokenizer& tok,
                               const Vocabulary& vocab) {
  std::vector<std::string> words;
  words.reserve(ids.size());
  for (auto id : ids) words.push_back(vocab.token(id));
  return tok.join(words);
}

}  // namespace seal
