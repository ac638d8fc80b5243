#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace goal {

/// Half-open character range [begin, end) into a source string.
struct CharSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  bool operator==(const CharSpan&) const = default;
};

inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr int kStartId = 2;
inline constexpr int kEndId = 3;

/// Word vocabulary. Ids 0–3 are <pad>, <unk>, <start>, <end>; corpus words
/// follow in sorted order.
class Vocabulary {
 public:
  Vocabulary();
  explicit Vocabulary(std::vector<std::string> words);

  /// Builds from every lowercased word and punctuation mark in `texts`.
  static Vocabulary from_corpus(const std::vector<std::string>& texts);

  int id(std::string_view token) const;
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

struct TokenizedText {
  std::vector<int> ids;
  /// One per id. Specials get empty spans: <start> at 0, <end>/<pad> at the
  /// end of the text.
  std::vector<CharSpan> spans;

  std::size_t end_position() const;
};

bool is_special(int id);

/// Raw lexer: lowercased words (alnum runs) and single punctuation marks,
/// with their spans.
std::vector<std::pair<std::string, CharSpan>> lex(std::string_view text);

/// <start> words… <end>, truncated to `max_len`; padded with <pad> to
/// `max_len` when `pad` is set.
TokenizedText tokenize(std::string_view text, const Vocabulary& vocab, std::size_t max_len,
                       bool pad = true);

}  // namespace goal
