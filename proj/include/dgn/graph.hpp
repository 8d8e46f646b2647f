#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "dgn/dataset.hpp"
#include "dgn/error.hpp"
#include "dgn/tokenize.hpp"

namespace dgn {

enum class NodeKind : std::uint8_t { document = 0, sentence = 1 };
enum class EdgeType : std::uint8_t { sentence_document = 0, document_document = 1 };

struct GraphNode {
  NodeKind kind;
  std::string title;
  std::uint32_t sentence_index = 0;   // sentence nodes only
  std::string text;                   // sentence nodes: sentence text
  TokenSequence feature_tokens;       // document nodes: entity tokens

  SentenceKey key() const { return {title, sentence_index}; }

  bool operator==(const GraphNode& o) const {
    return kind == o.kind && title == o.title && sentence_index == o.sentence_index &&
           text == o.text && feature_tokens == o.feature_tokens;
  }
};

struct GraphEdge {
  std::uint32_t a;  // a < b always
  std::uint32_t b;
  EdgeType type;

  bool operator==(const GraphEdge& o) const = default;
  auto operator<=>(const GraphEdge& o) const = default;
};

// Undirected typed graph over one question's paragraphs: a document node per
// paragraph, a sentence node per sentence, membership edges between them, and
// document-document edges wherever one document's title is mentioned in the
// other's text. No sentence-sentence edges, no self-loops, no duplicates.
struct DocumentGraph {
  std::vector<GraphNode> nodes;
  std::vector<GraphEdge> edges;
  std::size_t empty_paragraph_warnings = 0;
  std::size_t duplicate_title_warnings = 0;

  std::size_t document_count() const {
    std::size_t n = 0;
    for (const auto& node : nodes)
      if (node.kind == NodeKind::document) ++n;
    return n;
  }

  std::size_t sentence_count() const { return nodes.size() - document_count(); }

  std::size_t edge_count(EdgeType t) const {
    std::size_t n = 0;
    for (const auto& e : edges)
      if (e.type == t) ++n;
    return n;
  }

  std::vector<SentenceKey> sentence_keys() const {
    std::vector<SentenceKey> keys;
    for (const auto& node : nodes)
      if (node.kind == NodeKind::sentence) keys.push_back(node.key());
    return keys;
  }
};

namespace linking {

// Title with any trailing parenthetical disambiguator removed:
// "Kiss (band)" -> "Kiss".
inline std::string base_title(const std::string& title) {
  std::string t = title;
  while (!t.empty() && t.back() == ' ') t.pop_back();
  if (!t.empty() && t.back() == ')') {
    auto open = t.rfind('(');
    if (open != std::string::npos && open > 0) {
      t = t.substr(0, open);
      while (!t.empty() && t.back() == ' ') t.pop_back();
    }
  }
  return t;
}

// A title is eligible for mention matching only if its non-stop-word content
// has at least 2 characters; single letters and pure stop-word titles would
// link almost everything.
inline bool mention_eligible(const TokenSequence& title_tokens,
                             const StopWords& stop = StopWords::english()) {
  std::size_t content_chars = 0;
  for (const auto& tok : title_tokens)
    if (!stop.contains(tok)) content_chars += tok.size();
  return content_chars >= 2;
}

// True when `needle` occurs as a contiguous run inside `haystack`.
inline bool contains_token_run(const TokenSequence& haystack, const TokenSequence& needle) {
  if (needle.empty() || needle.size() > haystack.size()) return false;
  for (std::size_t start = 0; start + needle.size() <= haystack.size(); ++start) {
    bool match = true;
    for (std::size_t j = 0; j < needle.size(); ++j) {
      if (haystack[start + j] != needle[j]) {
        match = false;
        break;
      }
    }
    if (match) return true;
  }
  return false;
}

}  // namespace linking

// Pluggable document linker. The default implementation stands in for the
// coreference step: documents are linked when one's normalized base title
// occurs, with word boundaries, in the other's text.
class DocumentLinker {
 public:
  virtual ~DocumentLinker() = default;

  // Returns unordered title-index pairs (i < j) over the input order.
  virtual std::vector<std::pair<std::uint32_t, std::uint32_t>> link(
      const std::vector<std::pair<std::string, std::string>>& docs) const = 0;
};

class TitleMentionLinker final : public DocumentLinker {
 public:
  std::vector<std::pair<std::uint32_t, std::uint32_t>> link(
      const std::vector<std::pair<std::string, std::string>>& docs) const override {
    std::size_t n = docs.size();
    std::vector<TokenSequence> title_keys(n);
    std::vector<bool> eligible(n, false);
    std::vector<TokenSequence> texts(n);
    for (std::size_t i = 0; i < n; ++i) {
      title_keys[i] = tokenize_keep_stopwords(linking::base_title(docs[i].first));
      eligible[i] = linking::mention_eligible(title_keys[i]);
      texts[i] = tokenize_keep_stopwords(docs[i].second);
    }
    std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        bool i_in_j = eligible[i] && linking::contains_token_run(texts[j], title_keys[i]);
        bool j_in_i = eligible[j] && linking::contains_token_run(texts[i], title_keys[j]);
        if (i_in_j || j_in_i)
          pairs.emplace_back(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j));
      }
    return pairs;
  }
};

// Unordered title pairs linked by the default mention matcher. Duplicate
// titles are expected to be pre-disambiguated by the caller.
inline std::set<std::pair<std::string, std::string>> link_documents(
    const std::vector<std::pair<std::string, std::string>>& docs) {
  TitleMentionLinker linker;
  std::set<std::pair<std::string, std::string>> out;
  for (auto [i, j] : linker.link(docs)) {
    std::string a = docs[i].first;
    std::string b = docs[j].first;
    if (b < a) std::swap(a, b);
    out.emplace(std::move(a), std::move(b));
  }
  return out;
}

// Build the document graph for one example. Node order: per paragraph, the
// document node followed by its sentence nodes. Duplicate titles get an
// ordinal suffix ("X#2") and count a warning; the first occurrence keeps the
// original title so gold facts still resolve.
inline DocumentGraph build_graph(const SpExample& example,
                                 const DocumentLinker& linker = TitleMentionLinker()) {
  if (example.paragraphs.empty())
    throw EmptyGraphError("build_graph: example " + example.id + " has no paragraphs");

  DocumentGraph g;

  std::vector<std::string> titles;
  std::set<std::string> seen;
  for (const auto& p : example.paragraphs) {
    std::string title = p.title;
    if (seen.count(title)) {
      ++g.duplicate_title_warnings;
      int ordinal = 2;
      while (seen.count(title + "#" + std::to_string(ordinal))) ++ordinal;
      title += "#" + std::to_string(ordinal);
    }
    seen.insert(title);
    titles.push_back(std::move(title));
  }

  std::vector<std::pair<std::string, std::string>> docs;
  for (std::size_t i = 0; i < example.paragraphs.size(); ++i) {
    std::string full_text;
    for (const auto& s : example.paragraphs[i].sentences) {
      full_text += s;
      full_text.push_back(' ');
    }
    docs.emplace_back(titles[i], std::move(full_text));
  }
  auto linked = linker.link(docs);

  // Document features: title tokens plus the base-title tokens of every
  // linked document mentioned in this one's text.
  std::vector<TokenSequence> features(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) features[i] = tokenize(docs[i].first);
  auto extend = [&](std::size_t target, std::size_t mentioned) {
    for (auto& tok : tokenize(linking::base_title(docs[mentioned].first))) {
      if (std::find(features[target].begin(), features[target].end(), tok) ==
          features[target].end())
        features[target].push_back(std::move(tok));
    }
  };
  for (auto [i, j] : linked) {
    extend(i, j);
    extend(j, i);
  }

  std::vector<std::uint32_t> doc_node_ids(docs.size());
  for (std::size_t i = 0; i < example.paragraphs.size(); ++i) {
    const auto& p = example.paragraphs[i];
    GraphNode doc;
    doc.kind = NodeKind::document;
    doc.title = titles[i];
    doc.feature_tokens = features[i];
    doc_node_ids[i] = static_cast<std::uint32_t>(g.nodes.size());
    g.nodes.push_back(std::move(doc));

    if (p.sentences.empty()) ++g.empty_paragraph_warnings;
    for (std::size_t s = 0; s < p.sentences.size(); ++s) {
      GraphNode sent;
      sent.kind = NodeKind::sentence;
      sent.title = titles[i];
      sent.sentence_index = static_cast<std::uint32_t>(s);
      sent.text = p.sentences[s];
      auto sid = static_cast<std::uint32_t>(g.nodes.size());
      g.nodes.push_back(std::move(sent));
      g.edges.push_back({std::min(doc_node_ids[i], sid), std::max(doc_node_ids[i], sid),
                         EdgeType::sentence_document});
    }
  }

  for (auto [i, j] : linked) {
    auto a = doc_node_ids[i];
    auto b = doc_node_ids[j];
    g.edges.push_back({std::min(a, b), std::max(a, b), EdgeType::document_document});
  }
  std::sort(g.edges.begin(), g.edges.end());
  return g;
}

// Subgraph induced by the kept sentences: kept sentence nodes, every document
// node owning one, and all surviving edges among retained nodes (including
// document-document edges between retained documents).
inline DocumentGraph induced_subgraph(const DocumentGraph& graph,
                                      const std::set<SentenceKey>& kept_sentences) {
  DocumentGraph out;
  std::vector<std::int64_t> remap(graph.nodes.size(), -1);

  std::set<std::string> kept_titles;
  for (const auto& [title, idx] : kept_sentences) kept_titles.insert(title);

  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    const auto& node = graph.nodes[i];
    bool keep = node.kind == NodeKind::sentence ? kept_sentences.count(node.key()) != 0
                                                : kept_titles.count(node.title) != 0;
    if (keep) {
      remap[i] = static_cast<std::int64_t>(out.nodes.size());
      out.nodes.push_back(node);
    }
  }
  for (const auto& e : graph.edges) {
    if (remap[e.a] < 0 || remap[e.b] < 0) continue;
    out.edges.push_back({static_cast<std::uint32_t>(remap[e.a]),
                         static_cast<std::uint32_t>(remap[e.b]), e.type});
  }
  std::sort(out.edges.begin(), out.edges.end());
  return out;
}

// Typed neighbor lists for the propagation step. Undirected edges populate
// both directions symmetrically, so the in and out lists of each type are
// transposes of one another.
struct Adjacency {
  std::size_t node_count = 0;
  // [edge_type][direction] -> per-node sorted neighbor lists
  std::array<std::array<std::shared_ptr<const std::vector<std::vector<std::uint32_t>>>, 2>, 2>
      lists;

  static constexpr std::size_t kEdgeTypes = 2;
  static constexpr std::size_t kDirections = 2;
};

inline Adjacency build_adjacency(const DocumentGraph& g) {
  Adjacency adj;
  adj.node_count = g.nodes.size();
  for (std::size_t t = 0; t < Adjacency::kEdgeTypes; ++t) {
    std::vector<std::vector<std::uint32_t>> fwd(g.nodes.size());
    for (const auto& e : g.edges) {
      if (static_cast<std::size_t>(e.type) != t) continue;
      fwd[e.a].push_back(e.b);
      fwd[e.b].push_back(e.a);
    }
    for (auto& list : fwd) std::sort(list.begin(), list.end());
    auto shared = std::make_shared<const std::vector<std::vector<std::uint32_t>>>(std::move(fwd));
    adj.lists[t][0] = shared;
    adj.lists[t][1] = shared;
  }
  return adj;
}

}  // namespace dgn
