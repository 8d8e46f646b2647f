#pragma once

#include <charconv>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dgn/error.hpp"
#include "dgn/tensor.hpp"
#include "dgn/tokenize.hpp"

namespace dgn {

template <typename T>
struct Embedded {
  Tensor<T> matrix;  // one row per kept token
  TokenSequence kept_tokens;

  bool empty_representation() const { return kept_tokens.empty(); }
};

// token -> dense vector of a fixed dimension D, loaded from a text file with
// one `token v1 ... vD` line per entry. Immutable after load; concurrent
// reads are safe.
template <typename T>
class EmbeddingTable {
 public:
  // D is inferred from the first line; later lines with a different dimension
  // or unparseable numbers are rejected with their line number. Duplicate
  // tokens keep the first occurrence.
  static EmbeddingTable load(std::istream& in) {
    EmbeddingTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;

      std::size_t sp = line.find(' ');
      if (sp == std::string::npos || sp == 0)
        throw ParseError("embeddings line " + std::to_string(line_no) +
                         ": expected `token v1 ... vD`");
      std::string token = line.substr(0, sp);

      std::vector<T> values;
      values.reserve(table.dim_ ? table.dim_ : 64);
      const char* p = line.data() + sp;
      const char* end = line.data() + line.size();
      while (p < end) {
        while (p < end && *p == ' ') ++p;
        if (p == end) break;
        double v;
        auto [next, ec] = std::from_chars(p, end, v);
        if (ec != std::errc() || (next < end && *next != ' '))
          throw ParseError("embeddings line " + std::to_string(line_no) +
                           ": malformed number near `" + std::string(p, std::min<std::size_t>(end - p, 12)) + "`");
        values.push_back(static_cast<T>(v));
        p = next;
      }
      if (values.empty())
        throw ParseError("embeddings line " + std::to_string(line_no) + ": no vector values");
      if (table.dim_ == 0) {
        table.dim_ = values.size();
      } else if (values.size() != table.dim_) {
        throw ParseError("embeddings line " + std::to_string(line_no) + ": dimension " +
                         std::to_string(values.size()) + " differs from established " +
                         std::to_string(table.dim_));
      }
      if (table.index_.count(token)) continue;  // first occurrence wins
      table.index_.emplace(token, table.tokens_.size());
      table.tokens_.push_back(std::move(token));
      table.data_.insert(table.data_.end(), values.begin(), values.end());
    }
    return table;
  }

  std::size_t dimension() const { return dim_; }
  std::size_t vocab_size() const { return tokens_.size(); }

  bool contains(const std::string& token) const { return index_.count(token) != 0; }

  // Absence is reported, never papered over with a default vector.
  std::span<const T> lookup(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) return {};
    return std::span<const T>(data_.data() + it->second * dim_, dim_);
  }

  // Rows are the vectors of in-vocabulary tokens in input order;
  // out-of-vocabulary tokens are dropped and absent from kept_tokens.
  Embedded<T> embed(const TokenSequence& tokens) const {
    Embedded<T> out;
    std::vector<T> rows;
    for (const auto& tok : tokens) {
      auto v = lookup(tok);
      if (v.empty()) continue;
      rows.insert(rows.end(), v.begin(), v.end());
      out.kept_tokens.push_back(tok);
    }
    out.matrix = Tensor<T>::from_data(out.kept_tokens.size(), dim_, std::move(rows));
    return out;
  }

  // Textual re-serialization; preserves token order and exact values.
  void save(std::ostream& out) const {
    out.precision(std::numeric_limits<T>::max_digits10);
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      out << tokens_[i];
      for (std::size_t j = 0; j < dim_; ++j) out << ' ' << data_[i * dim_ + j];
      out << '\n';
    }
  }

  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<T> data_;
};

}  // namespace dgn
