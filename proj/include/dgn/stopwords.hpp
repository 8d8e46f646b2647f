#pragma once

#include <array>
#include <istream>
#include <string>
#include <string_view>
#include <unordered_set>

namespace dgn {

// Standard English stop-word list. Entries containing apostrophes are shipped
// as their punctuation-stripped pieces, matching what the tokenizer produces.
inline constexpr std::array<std::string_view, 153> kEnglishStopWords = {
    "i",       "me",      "my",      "myself",  "we",       "our",     "ours",
    "ourselves", "you",   "your",    "yours",   "yourself", "yourselves", "he",
    "him",     "his",     "himself", "she",     "her",      "hers",    "herself",
    "it",      "its",     "itself",  "they",    "them",     "their",   "theirs",
    "themselves", "what", "which",   "who",     "whom",     "this",    "that",
    "these",   "those",   "am",      "is",      "are",      "was",     "were",
    "be",      "been",    "being",   "have",    "has",      "had",     "having",
    "do",      "does",    "did",     "doing",   "a",        "an",      "the",
    "and",     "but",     "if",      "or",      "because",  "as",      "until",
    "while",   "of",      "at",      "by",      "for",      "with",    "about",
    "against", "between", "into",    "through", "during",   "before",  "after",
    "above",   "below",   "to",      "from",    "up",       "down",    "in",
    "out",     "on",      "off",     "over",    "under",    "again",   "further",
    "then",    "once",    "here",    "there",   "when",     "where",   "why",
    "how",     "all",     "any",     "both",    "each",     "few",     "more",
    "most",    "other",   "some",    "such",    "no",       "nor",     "not",
    "only",    "own",     "same",    "so",      "than",     "too",     "very",
    "s",       "t",       "can",     "will",    "just",     "don",     "should",
    "now",     "d",       "ll",      "m",       "o",        "re",      "ve",
    "y",       "ain",     "aren",    "couldn",  "didn",     "doesn",   "hadn",
    "hasn",    "haven",   "isn",     "ma",      "mightn",   "mustn",   "needn",
    "shan",    "shouldn", "wasn",    "weren",   "won",      "wouldn"};

class StopWords {
 public:
  // The shipped default list.
  static const StopWords& english() {
    static const StopWords instance{[] {
      StopWords sw;
      for (std::string_view w : kEnglishStopWords) sw.words_.emplace(w);
      return sw;
    }()};
    return instance;
  }

  static StopWords none() { return StopWords{}; }

  // One token per line, UTF-8; blank lines ignored.
  static StopWords load(std::istream& in) {
    StopWords sw;
    std::string line;
    while (std::getline(in, line)) {
      while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
      if (!line.empty()) sw.words_.insert(line);
    }
    return sw;
  }

  bool contains(const std::string& token) const { return words_.count(token) != 0; }
  std::size_t size() const { return words_.size(); }

 private:
  std::unordered_set<std::string> words_;
};

}  // namespace dgn
