#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "dgn/stopwords.hpp"

namespace dgn {

using TokenSequence = std::vector<std::string>;

// Lowercase tokens split at whitespace and punctuation. ASCII letters are
// lowercased; digits kept; bytes >= 0x80 (multibyte UTF-8) pass through
// unchanged so non-ASCII words survive as single tokens.
inline TokenSequence tokenize_keep_stopwords(std::string_view text) {
  TokenSequence out;
  std::string cur;
  for (char ch : text) {
    unsigned char c = static_cast<unsigned char>(ch);
    if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c >= 0x80) {
      cur.push_back(ch);
    } else if (c >= 'A' && c <= 'Z') {
      cur.push_back(static_cast<char>(c - 'A' + 'a'));
    } else {
      if (!cur.empty()) {
        out.push_back(std::move(cur));
        cur.clear();
      }
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

inline TokenSequence tokenize(std::string_view text, const StopWords& stop = StopWords::english()) {
  TokenSequence out;
  for (auto& tok : tokenize_keep_stopwords(text))
    if (!stop.contains(tok)) out.push_back(std::move(tok));
  return out;
}

inline std::string join_tokens(const TokenSequence& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

}  // namespace dgn
