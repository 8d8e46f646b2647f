#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "dgn/dataset.hpp"
#include "dgn/embeddings.hpp"
#include "dgn/error.hpp"
#include "dgn/graph.hpp"
#include "dgn/parallel.hpp"
#include "dgn/tokenize.hpp"

namespace dgn {

// Sentences whose sides have no in-vocabulary tokens score below any cosine
// value and rank last.
inline constexpr double kEmptyScore = -2.0;

template <typename T>
struct RelevanceScore {
  SentenceKey key;
  double score;  // mean of at most m cosine similarities, each in [-1, 1]
};

namespace detail {

// Unit-normalized in-vocabulary vectors for a token sequence; zero vectors
// stay zero so their cosine contribution is 0.
template <typename T>
std::vector<std::vector<double>> unit_vectors(const TokenSequence& tokens,
                                              const EmbeddingTable<T>& table) {
  std::vector<std::vector<double>> out;
  for (const auto& tok : tokens) {
    auto v = table.lookup(tok);
    if (v.empty()) continue;
    std::vector<double> u(v.begin(), v.end());
    double norm = 0;
    for (double x : u) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > 0)
      for (double& x : u) x /= norm;
    out.push_back(std::move(u));
  }
  return out;
}

}  // namespace detail

inline double score_sentence_prepared(const std::vector<std::vector<double>>& question_units,
                                      const std::vector<std::vector<double>>& sentence_units,
                                      std::size_t m) {
  if (question_units.empty() || sentence_units.empty()) return kEmptyScore;
  std::vector<double> sims;
  sims.reserve(question_units.size() * sentence_units.size());
  for (const auto& sv : sentence_units)
    for (const auto& qv : question_units) {
      double dot = 0;
      for (std::size_t i = 0; i < sv.size(); ++i) dot += sv[i] * qv[i];
      sims.push_back(dot);
    }
  std::size_t top = std::min(m, sims.size());
  std::partial_sort(sims.begin(), sims.begin() + top, sims.end(), std::greater<double>());
  double sum = 0;
  for (std::size_t i = 0; i < top; ++i) sum += sims[i];
  return sum / static_cast<double>(top);
}

// Cosine similarity of every (sentence word, question word) pair over
// in-vocabulary tokens, then the mean of the min(m, pair count) largest
// values. Either side empty in vocabulary -> kEmptyScore.
template <typename T>
double score_sentence(const TokenSequence& question_tokens, const TokenSequence& sentence_tokens,
                      const EmbeddingTable<T>& table, std::size_t m) {
  if (m < 1) throw ConfigError("score_sentence: m must be >= 1");
  auto q = detail::unit_vectors(question_tokens, table);
  auto s = detail::unit_vectors(sentence_tokens, table);
  return score_sentence_prepared(q, s, m);
}

struct RankedSentence {
  SentenceKey key;
  double score;
  std::size_t paragraph_pos;  // tie-break: document order, then sentence index
};

// Scores every sentence node of the graph against the question. Keys come
// from the graph so they stay valid for induced_subgraph even when duplicate
// titles were disambiguated.
template <typename T>
std::vector<RankedSentence> score_all_sentences(const std::string& question,
                                                const DocumentGraph& graph,
                                                const EmbeddingTable<T>& table, std::size_t m,
                                                const StopWords& stop = StopWords::english()) {
  if (m < 1) throw ConfigError("score_all_sentences: m must be >= 1");
  auto question_units = detail::unit_vectors(tokenize(question, stop), table);
  std::vector<RankedSentence> scored;
  std::size_t paragraph_pos = 0;
  for (const auto& node : graph.nodes) {
    if (node.kind == NodeKind::document) {
      ++paragraph_pos;
      continue;
    }
    auto sentence_units = detail::unit_vectors(tokenize(node.text, stop), table);
    double score = score_sentence_prepared(question_units, sentence_units, m);
    scored.push_back({node.key(), score, paragraph_pos == 0 ? 0 : paragraph_pos - 1});
  }
  return scored;
}

// Sentences ordered by (score descending, paragraph position ascending,
// sentence index ascending); the first min(k, total) are kept.
template <typename T>
std::vector<SentenceKey> rank_and_select(const SpExample& example, const DocumentGraph& graph,
                                         const EmbeddingTable<T>& table, std::size_t m,
                                         std::size_t k,
                                         const StopWords& stop = StopWords::english()) {
  if (k < 1) throw ConfigError("rank_and_select: k must be >= 1");
  auto scored = score_all_sentences(example.question, graph, table, m, stop);
  std::sort(scored.begin(), scored.end(), [](const RankedSentence& a, const RankedSentence& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.paragraph_pos != b.paragraph_pos) return a.paragraph_pos < b.paragraph_pos;
    return a.key.second < b.key.second;
  });
  std::vector<SentenceKey> kept;
  kept.reserve(std::min(k, scored.size()));
  for (std::size_t i = 0; i < scored.size() && i < k; ++i) kept.push_back(scored[i].key);
  return kept;
}

struct RecallReport {
  double recall = 0.0;            // macro-average over scored examples
  double mean_candidates = 0.0;   // mean sentence count per example
  double discard_fraction = 0.0;  // 1 - mean(min(k, total) / total)
  std::size_t examples = 0;
  std::size_t skipped_examples = 0;  // zero valid gold facts
  std::size_t m = 0;
  std::size_t k = 0;
};

template <typename T>
RecallReport eval_recall(const std::vector<SpExample>& dataset, const EmbeddingTable<T>& table,
                         std::size_t m, std::size_t k,
                         const StopWords& stop = StopWords::english(), std::size_t jobs = 1) {
  if (dataset.empty()) throw ConfigError("eval_recall: empty dataset");
  RecallReport report;
  report.m = m;
  report.k = k;

  // per-example results land in slots; the reduction below runs in index
  // order, so the outcome does not depend on scheduling
  std::vector<double> recalls(dataset.size(), -1.0);  // -1 marks skipped
  parallel_for(dataset.size(), jobs, [&](std::size_t i) {
    const auto& ex = dataset[i];
    if (ex.gold_facts.empty() || ex.paragraphs.empty()) return;
    auto kept = rank_and_select(ex, build_graph(ex), table, m, k, stop);
    std::size_t hit = 0;
    for (const auto& key : kept)
      if (ex.gold_facts.count(key)) ++hit;
    recalls[i] = static_cast<double>(hit) / static_cast<double>(ex.gold_facts.size());
  });

  double recall_sum = 0.0;
  std::size_t scored = 0;
  double candidates_sum = 0.0;
  double kept_fraction_sum = 0.0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    std::size_t total = dataset[i].sentence_count();
    candidates_sum += static_cast<double>(total);
    kept_fraction_sum +=
        total > 0 ? static_cast<double>(std::min(k, total)) / static_cast<double>(total) : 1.0;
    if (recalls[i] < 0) {
      ++report.skipped_examples;
      continue;
    }
    recall_sum += recalls[i];
    ++scored;
  }
  report.examples = dataset.size();
  report.recall = scored ? recall_sum / static_cast<double>(scored) : 0.0;
  report.mean_candidates = candidates_sum / static_cast<double>(dataset.size());
  report.discard_fraction = 1.0 - kept_fraction_sum / static_cast<double>(dataset.size());
  return report;
}

}  // namespace dgn
