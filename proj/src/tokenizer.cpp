#include "goal/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "goal/error.hpp"

namespace goal {

namespace {

const char* const kSpecials[] = {"<pad>", "<unk>", "<start>", "<end>"};

bool word_char(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

}  // namespace

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(std::vector<std::string> words) {
  for (const char* s : kSpecials) tokens_.emplace_back(s);
  for (auto& w : words) {
    if (std::find(std::begin(kSpecials), std::end(kSpecials), w) != std::end(kSpecials))
      continue;
    tokens_.push_back(std::move(w));
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<int>(i)).second)
      throw ValidationError("duplicate vocabulary entry '" + tokens_[i] + "'");
  }
}

Vocabulary Vocabulary::from_corpus(const std::vector<std::string>& texts) {
  std::set<std::string> words;
  for (const auto& t : texts)
    for (auto& [word, span] : lex(t)) words.insert(word);
  return Vocabulary(std::vector<std::string>(words.begin(), words.end()));
}

int Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnkId : it->second;
}

bool is_special(int id) { return id >= 0 && id <= kEndId && id != kUnkId; }

std::size_t TokenizedText::end_position() const {
  auto it = std::find(ids.begin(), ids.end(), kEndId);
  if (it == ids.end()) throw ContractError("token sequence has no <end>");
  return static_cast<std::size_t>(it - ids.begin());
}

std::vector<std::pair<std::string, CharSpan>> lex(std::string_view text) {
  std::vector<std::pair<std::string, CharSpan>> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      ++i;
    } else if (word_char(c)) {
      const std::size_t start = i;
      std::string word;
      while (i < text.size() && word_char(static_cast<unsigned char>(text[i]))) {
        word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(text[i]))));
        ++i;
      }
      out.push_back({std::move(word), {start, i}});
    } else {
      out.push_back({std::string(1, text[i]), {i, i + 1}});
      ++i;
    }
  }
  return out;
}

TokenizedText tokenize(std::string_view text, const Vocabulary& vocab, std::size_t max_len,
                       bool pad) {
  if (max_len < 2) throw ContractError("max_len must leave room for <start> and <end>");
  TokenizedText out;
  out.ids.push_back(kStartId);
  out.spans.push_back({0, 0});
  for (auto& [word, span] : lex(text)) {
    if (out.ids.size() + 1 >= max_len) break;
    out.ids.push_back(vocab.id(word));
    out.spans.push_back(span);
  }
  out.ids.push_back(kEndId);
  out.spans.push_back({text.size(), text.size()});
  if (pad) {
    while (out.ids.size() < max_len) {
      out.ids.push_back(kPadId);
      out.spans.push_back({text.size(), text.size()});
    }
  }
  return out;
}

}  // namespace goal
