#include <sstream>
#include <string>

#include "dgn/dataset.hpp"
#include "dgn/graph.hpp"
#include "dgn/rng.hpp"
#include "dgn/serialize.hpp"
#include "doctest.h"
#include "support/synthetic.hpp"

using dgn::ConfigError;
using dgn::Dataset;
using dgn::FormatError;
using dgn::ParamStore;
using dgn::ParseError;
using dgn::parse_dataset;
using dgn::SentenceKey;
using dgn::Tensor;

namespace {

const char* kTwoDocExample = R"([{
  "_id": "q1",
  "question": "When was Erik Watts' father born?",
  "answer": "May 5, 1939",
  "type": "bridge",
  "level": "medium",
  "supporting_facts": [["Erik Watts", 0], ["Bill Watts", 0]],
  "context": [
    ["Erik Watts", ["Erik Watts is the son of WWE Hall of Famer Bill Watts.",
                    "He attended Louisville."]],
    ["Bill Watts", ["William F. Watts Jr. (born May 5, 1939) is an American former professional wrestler, promoter, and WWE Hall of Fame Inductee (2009)."]]
  ]
}])";

Dataset parse_str(const std::string& s) {
  std::istringstream in(s);
  return parse_dataset(in);
}

}  // namespace

TEST_CASE("parse_dataset reads a two-document example") {
  auto ds = parse_str(kTwoDocExample);
  REQUIRE(ds.examples.size() == 1);
  const auto& ex = ds.examples[0];
  CHECK(ex.id == "q1");
  CHECK(ex.paragraphs.size() == 2);
  CHECK(ex.paragraphs[0].title == "Erik Watts");
  CHECK(ex.paragraphs[0].sentences.size() == 2);
  CHECK(ex.gold_facts.size() == 2);
  CHECK(ex.gold_facts.count({"Erik Watts", 0}) == 1);
  CHECK(ex.gold_facts.count({"Bill Watts", 0}) == 1);
  CHECK(ex.meta.at("answer") == "May 5, 1939");
  CHECK(ds.warnings.dropped_gold_facts == 0);
}

TEST_CASE("parse_dataset on an empty array") {
  auto ds = parse_str("[]");
  CHECK(ds.examples.empty());
}

TEST_CASE("gold facts referencing absent titles or bad indices are dropped with a warning") {
  const char* json = R"([{
    "_id": "q2", "question": "x?",
    "supporting_facts": [["Nope", 0], ["A", 5], ["A", 0]],
    "context": [["A", ["s1.", "s2."]]]
  }])";
  auto ds = parse_str(json);
  REQUIRE(ds.examples.size() == 1);
  CHECK(ds.examples[0].gold_facts.size() == 1);
  CHECK(ds.examples[0].gold_facts.count({"A", 0}) == 1);
  CHECK(ds.warnings.dropped_gold_facts == 2);
}

TEST_CASE("parse_dataset reports missing fields with the element index") {
  const char* json = R"([{"_id": "a", "question": "q", "supporting_facts": [],
                          "context": []},
                         {"_id": "b", "question": "q", "supporting_facts": []}])";
  CHECK_THROWS_WITH_AS(parse_str(json), doctest::Contains("element 1"), ParseError);
}

TEST_CASE("parse_dataset rejects non-integer sentence indices") {
  const char* json = R"([{"_id": "a", "question": "q",
                          "supporting_facts": [["A", "zero"]],
                          "context": [["A", ["s."]]]}])";
  CHECK_THROWS_WITH_AS(parse_str(json), doctest::Contains("non-integer"), ParseError);
}

TEST_CASE("parse -> serialize -> parse is a fixed point on retained fields") {
  auto corpus = synth::make_corpus({.examples = 6, .vocab = 40, .dim = 4, .seed = 77});
  auto first = parse_str(corpus.dataset_json());
  std::ostringstream buf;
  dgn::serialize_dataset(buf, first.examples);
  auto second = parse_str(buf.str());
  REQUIRE(second.examples.size() == first.examples.size());
  for (std::size_t i = 0; i < first.examples.size(); ++i) {
    const auto& a = first.examples[i];
    const auto& b = second.examples[i];
    CHECK(a.id == b.id);
    CHECK(a.question == b.question);
    CHECK(a.gold_facts == b.gold_facts);
    CHECK(a.meta == b.meta);
    REQUIRE(a.paragraphs.size() == b.paragraphs.size());
    for (std::size_t p = 0; p < a.paragraphs.size(); ++p) {
      CHECK(a.paragraphs[p].title == b.paragraphs[p].title);
      CHECK(a.paragraphs[p].sentences == b.paragraphs[p].sentences);
    }
  }
}

TEST_CASE("checkpoint save/load round-trips bit-exactly") {
  dgn::Rng rng(404);
  ParamStore<float> params;
  params.add("alpha", dgn::glorot_uniform<float>(4, 7, rng));
  params.add("beta", dgn::glorot_uniform_vec<float>(9, rng));
  params.add("gamma", Tensor<float>::scalar(-0.25f));

  std::ostringstream out;
  dgn::save_checkpoint<float>(out, params, R"({"epochs":3})", 99);
  std::istringstream in(out.str());
  auto loaded = dgn::load_checkpoint<float>(in);

  CHECK(loaded.seed == 99);
  CHECK(loaded.config_json == R"({"epochs":3})");
  REQUIRE(loaded.params.size() == params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    CHECK(loaded.params.at(i).name == params.at(i).name);
    CHECK(loaded.params.at(i).value == params.at(i).value);
  }

  // byte-stable: a second save of the same content is identical
  std::ostringstream out2;
  dgn::save_checkpoint<float>(out2, params, R"({"epochs":3})", 99);
  CHECK(out.str() == out2.str());
}

TEST_CASE("checkpoint rejects wrong magic and truncation") {
  dgn::Rng rng(1);
  ParamStore<double> params;
  params.add("w", dgn::glorot_uniform<double>(2, 2, rng));
  std::ostringstream out;
  dgn::save_checkpoint<double>(out, params, "{}", 1);
  std::string bytes = out.str();

  {
    std::string bad = bytes;
    bad[0] = 'X';
    std::istringstream in(bad);
    CHECK_THROWS_AS(dgn::load_checkpoint<double>(in), FormatError);
  }
  {
    std::istringstream in(bytes.substr(0, bytes.size() / 2));
    CHECK_THROWS_AS(dgn::load_checkpoint<double>(in), FormatError);
  }
}

TEST_CASE("checkpoint preserves the precision flag") {
  dgn::Rng rng(2);
  ParamStore<double> params;
  params.add("w", dgn::glorot_uniform<double>(3, 3, rng));
  std::ostringstream out;
  dgn::save_checkpoint<double>(out, params, "{}", 7);

  std::istringstream header_in(out.str());
  auto info = dgn::read_checkpoint_header(header_in);
  CHECK(info.scalar_width == 8);
  CHECK(info.seed == 7);

  // loading at the wrong precision is a configuration error
  std::istringstream in(out.str());
  CHECK_THROWS_AS(dgn::load_checkpoint<float>(in), ConfigError);

  std::istringstream in2(out.str());
  auto loaded = dgn::load_checkpoint<double>(in2);
  CHECK(loaded.params.get("w").value == params.get("w").value);
}

TEST_CASE("graph cache round-trips exactly") {
  auto corpus = synth::make_corpus({.examples = 3, .vocab = 50, .dim = 4, .seed = 5});

  SUBCASE("empty graph") {
    dgn::DocumentGraph g;
    std::ostringstream out;
    dgn::save_graph(out, "none", g);
    std::istringstream in(out.str());
    auto loaded = dgn::load_graph(in);
    CHECK(loaded.example_id == "none");
    CHECK(loaded.graph.nodes.empty());
    CHECK(loaded.graph.edges.empty());
  }

  SUBCASE("two-document graph keeps its document-document edge") {
    auto ds = parse_str(kTwoDocExample);
    auto g = dgn::build_graph(ds.examples[0]);
    REQUIRE(g.edge_count(dgn::EdgeType::document_document) == 1);
    std::ostringstream out;
    dgn::save_graph(out, ds.examples[0].id, g);
    std::istringstream in(out.str());
    auto loaded = dgn::load_graph(in);
    CHECK(loaded.graph.nodes == g.nodes);
    CHECK(loaded.graph.edges == g.edges);
    CHECK(loaded.graph.edge_count(dgn::EdgeType::document_document) == 1);
  }

  SUBCASE("ten-paragraph distractor example") {
    const auto& ex = corpus.examples[0];
    auto g = dgn::build_graph(ex);
    CHECK(g.nodes.size() == ex.paragraphs.size() + ex.sentence_count());
    std::ostringstream out;
    dgn::save_graph(out, ex.id, g);
    std::istringstream in(out.str());
    auto loaded = dgn::load_graph(in);
    CHECK(loaded.example_id == ex.id);
    CHECK(loaded.graph.nodes == g.nodes);
    CHECK(loaded.graph.edges == g.edges);

    // byte-stable across repeated serialization
    std::ostringstream out2;
    dgn::save_graph(out2, ex.id, g);
    CHECK(out.str() == out2.str());
  }
}

TEST_CASE("graph cache rejects corrupt input") {
  std::istringstream bad_magic("XXXX????");
  CHECK_THROWS_AS(dgn::load_graph(bad_magic), FormatError);

  dgn::DocumentGraph g;
  g.nodes.push_back({dgn::NodeKind::document, "T", 0, "", {"t"}});
  std::ostringstream out;
  dgn::save_graph(out, "x", g);
  std::istringstream truncated(out.str().substr(0, out.str().size() - 3));
  CHECK_THROWS_AS(dgn::load_graph(truncated), FormatError);
}

TEST_CASE("graph cache file names are filesystem-safe") {
  CHECK(dgn::graph_cache_name("abc-123_X") == "abc-123_X.dgg");
  CHECK(dgn::graph_cache_name("a/b c") == "a%2fb%20c.dgg");
}
