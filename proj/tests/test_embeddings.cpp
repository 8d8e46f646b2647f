#include <sstream>
#include <string>

#include "dgn/embeddings.hpp"
#include "dgn/rng.hpp"
#include "dgn/stopwords.hpp"
#include "dgn/tokenize.hpp"
#include "doctest.h"

using dgn::EmbeddingTable;
using dgn::ParseError;
using dgn::StopWords;
using dgn::Tensor;
using dgn::TokenSequence;
using dgn::tokenize;
using dgn::tokenize_keep_stopwords;

TEST_CASE("tokenize strips punctuation and stop words") {
  CHECK(tokenize("When was Erik Watts' father born?") ==
        TokenSequence{"erik", "watts", "father", "born"});
  CHECK(tokenize("") == TokenSequence{});
  CHECK(tokenize("The the THE") == TokenSequence{});
  CHECK(tokenize_keep_stopwords("The the THE") == TokenSequence{"the", "the", "the"});
  CHECK(tokenize("WWE Hall of Famer (2009)!") == TokenSequence{"wwe", "hall", "famer", "2009"});
}

TEST_CASE("tokenize is idempotent on its own output") {
  const char* samples[] = {
      "When was Erik Watts' father born?",
      "William F. Watts Jr. (born May 5, 1939) is an American former professional wrestler.",
      "a,b;c -- d!  e?",
      "   leading and trailing   ",
  };
  for (const char* s : samples) {
    auto once = tokenize(s);
    auto twice = tokenize(dgn::join_tokens(once));
    CHECK(once == twice);
  }
}

TEST_CASE("custom stop list from a stream") {
  std::istringstream in("foo\nbar\n\n");
  auto sw = StopWords::load(in);
  CHECK(sw.size() == 2);
  CHECK(tokenize("foo baz bar", sw) == TokenSequence{"baz"});
}

TEST_CASE("load_embeddings parses and looks up") {
  std::istringstream in("a 1.0 0.0\nb 0.0 1.0\n");
  auto table = EmbeddingTable<double>::load(in);
  CHECK(table.dimension() == 2);
  CHECK(table.vocab_size() == 2);
  auto va = table.lookup("a");
  REQUIRE(va.size() == 2);
  CHECK(va[0] == 1.0);
  CHECK(va[1] == 0.0);
  CHECK(table.lookup("zzz").empty());
  CHECK_FALSE(table.contains("zzz"));
}

TEST_CASE("load_embeddings rejects inconsistent dimension with the line number") {
  std::istringstream in("a 1.0 0.0\nb 0.5\n");
  CHECK_THROWS_WITH_AS(EmbeddingTable<double>::load(in), doctest::Contains("line 2"),
                       ParseError);
}

TEST_CASE("load_embeddings rejects malformed numbers with the line number") {
  std::istringstream in("a 1.0 0.0\nb 0.0 oops\n");
  CHECK_THROWS_WITH_AS(EmbeddingTable<double>::load(in), doctest::Contains("line 2"),
                       ParseError);
}

TEST_CASE("duplicate tokens keep the first occurrence") {
  std::istringstream in("a 1.0 2.0\na 9.0 9.0\n");
  auto table = EmbeddingTable<double>::load(in);
  CHECK(table.vocab_size() == 1);
  CHECK(table.lookup("a")[0] == 1.0);
}

TEST_CASE("embed keeps in-vocabulary tokens in order and drops the rest") {
  std::istringstream in("a 1.0 0.0\nb 0.0 1.0\n");
  auto table = EmbeddingTable<double>::load(in);

  auto basic = table.embed({"a", "b"});
  CHECK(basic.matrix == Tensor<double>::of({{1.0, 0.0}, {0.0, 1.0}}));
  CHECK(basic.kept_tokens == TokenSequence{"a", "b"});

  auto with_oov = table.embed({"a", "zzz", "b"});
  CHECK(with_oov.matrix == basic.matrix);
  CHECK(with_oov.kept_tokens == TokenSequence{"a", "b"});

  auto all_oov = table.embed({"x", "y"});
  CHECK(all_oov.empty_representation());
  CHECK(all_oov.matrix.rows() == 0);
}

TEST_CASE("embed rows equal table lookups exactly") {
  dgn::Rng rng(17);
  std::ostringstream src;
  src.precision(17);
  for (int i = 0; i < 30; ++i) {
    src << "tok" << i;
    for (int j = 0; j < 5; ++j) src << ' ' << rng.uniform(-1.0, 1.0);
    src << '\n';
  }
  std::istringstream in(src.str());
  auto table = EmbeddingTable<float>::load(in);

  TokenSequence query;
  for (int round = 0; round < 40; ++round)
    query.push_back("tok" + std::to_string(rng.below(40)));  // some OOV
  auto emb = table.embed(query);
  REQUIRE(emb.matrix.rows() == emb.kept_tokens.size());
  for (std::size_t i = 0; i < emb.kept_tokens.size(); ++i) {
    auto row = table.lookup(emb.kept_tokens[i]);
    for (std::size_t j = 0; j < table.dimension(); ++j) CHECK(emb.matrix.at(i, j) == row[j]);
  }
}

TEST_CASE("re-serialization round-trips token and vector content") {
  std::istringstream in("a 1.25 -0.5 3.0\nb 0.125 1e-3 -2.5\nqq 0.1 0.2 0.3\n");
  auto table = EmbeddingTable<double>::load(in);
  std::ostringstream saved;
  table.save(saved);
  std::istringstream again(saved.str());
  auto reloaded = EmbeddingTable<double>::load(again);
  REQUIRE(reloaded.vocab_size() == table.vocab_size());
  REQUIRE(reloaded.dimension() == table.dimension());
  CHECK(reloaded.tokens() == table.tokens());
  for (const auto& tok : table.tokens()) {
    auto lhs = table.lookup(tok);
    auto rhs = reloaded.lookup(tok);
    for (std::size_t j = 0; j < table.dimension(); ++j) CHECK(lhs[j] == rhs[j]);
  }
}
