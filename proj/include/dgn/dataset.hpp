#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dgn/error.hpp"

namespace dgn {

using SentenceKey = std::pair<std::string, std::uint32_t>;  // (title, sentence index)

struct Paragraph {
  std::string title;
  std::vector<std::string> sentences;
};

// One question with its context paragraphs and gold supporting-fact labels.
// In the distractor setting the paragraph count is typically 10, but any
// count is accepted.
struct SpExample {
  std::string id;
  std::string question;
  std::vector<Paragraph> paragraphs;
  std::set<SentenceKey> gold_facts;
  std::map<std::string, std::string> meta;  // answer/type/level, kept opaque

  std::size_t sentence_count() const {
    std::size_t n = 0;
    for (const auto& p : paragraphs) n += p.sentences.size();
    return n;
  }
};

struct DatasetWarnings {
  std::size_t dropped_gold_facts = 0;  // gold labels pointing nowhere
};

struct Dataset {
  std::vector<SpExample> examples;
  DatasetWarnings warnings;
};

namespace detail {

inline const nlohmann::json& require_field(const nlohmann::json& elem, const char* name,
                                           std::size_t index) {
  auto it = elem.find(name);
  if (it == elem.end())
    throw ParseError("dataset element " + std::to_string(index) + ": missing field `" + name +
                     "`");
  return *it;
}

}  // namespace detail

// Top-level JSON array; each element carries `_id`, `question`,
// `supporting_facts` ([title, sentence_index] pairs) and `context`
// ([title, [sentence, ...]] pairs). Gold facts that reference a missing
// paragraph or an out-of-range sentence are dropped and counted.
inline Dataset parse_dataset(std::istream& in) {
  nlohmann::json root;
  try {
    in >> root;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("dataset: invalid JSON: ") + e.what());
  }
  if (!root.is_array()) throw ParseError("dataset: top-level JSON array expected");

  Dataset out;
  out.examples.reserve(root.size());
  for (std::size_t i = 0; i < root.size(); ++i) {
    const auto& elem = root[i];
    if (!elem.is_object())
      throw ParseError("dataset element " + std::to_string(i) + ": object expected");
    SpExample ex;
    try {
      ex.id = detail::require_field(elem, "_id", i).get<std::string>();
      ex.question = detail::require_field(elem, "question", i).get<std::string>();

      const auto& context = detail::require_field(elem, "context", i);
      for (const auto& para : context) {
        if (!para.is_array() || para.size() != 2)
          throw ParseError("dataset element " + std::to_string(i) +
                           ": context entry must be [title, sentences]");
        Paragraph p;
        p.title = para[0].get<std::string>();
        for (const auto& s : para[1]) p.sentences.push_back(s.get<std::string>());
        ex.paragraphs.push_back(std::move(p));
      }

      const auto& sf = detail::require_field(elem, "supporting_facts", i);
      for (const auto& fact : sf) {
        if (!fact.is_array() || fact.size() != 2)
          throw ParseError("dataset element " + std::to_string(i) +
                           ": supporting fact must be [title, sentence_index]");
        if (!fact[1].is_number_integer() && !fact[1].is_number_unsigned())
          throw ParseError("dataset element " + std::to_string(i) +
                           ": non-integer sentence index in supporting fact");
        std::string title = fact[0].get<std::string>();
        std::int64_t idx = fact[1].get<std::int64_t>();

        bool valid = false;
        if (idx >= 0) {
          for (const auto& p : ex.paragraphs) {
            if (p.title == title && static_cast<std::size_t>(idx) < p.sentences.size()) {
              valid = true;
              break;
            }
          }
        }
        if (valid) {
          ex.gold_facts.emplace(std::move(title), static_cast<std::uint32_t>(idx));
        } else {
          ++out.warnings.dropped_gold_facts;
        }
      }

      for (const char* key : {"answer", "type", "level"}) {
        auto it = elem.find(key);
        if (it != elem.end() && it->is_string()) ex.meta[key] = it->get<std::string>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("dataset element " + std::to_string(i) + ": " + e.what());
    }
    out.examples.push_back(std::move(ex));
  }
  return out;
}

// Inverse of parse_dataset on the retained fields.
inline nlohmann::json dataset_to_json(const std::vector<SpExample>& examples) {
  nlohmann::json root = nlohmann::json::array();
  for (const auto& ex : examples) {
    nlohmann::json elem;
    elem["_id"] = ex.id;
    elem["question"] = ex.question;
    nlohmann::json context = nlohmann::json::array();
    for (const auto& p : ex.paragraphs) context.push_back({p.title, p.sentences});
    elem["context"] = std::move(context);
    nlohmann::json sf = nlohmann::json::array();
    for (const auto& [title, idx] : ex.gold_facts) sf.push_back({title, idx});
    elem["supporting_facts"] = std::move(sf);
    for (const auto& [k, v] : ex.meta) elem[k] = v;
    root.push_back(std::move(elem));
  }
  return root;
}

inline void serialize_dataset(std::ostream& out, const std::vector<SpExample>& examples) {
  out << dataset_to_json(examples) << '\n';
}

}  // namespace dgn
