#pragma once

// Deterministic HotpotQA-shaped corpus generator for tests: pseudo-word
// vocabulary, random unit embeddings, and questions whose two gold sentences
// share signature words with the question. Gold paragraph pairs cross-mention
// each other's titles so document-document edges exist.

#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "dgn/dataset.hpp"
#include "dgn/embeddings.hpp"
#include "dgn/rng.hpp"

namespace synth {

struct Options {
  std::size_t examples = 100;
  std::size_t vocab = 300;
  std::size_t dim = 50;
  std::uint64_t seed = 1234;
  std::size_t paragraphs = 10;
  std::size_t min_sentences = 3;
  std::size_t max_sentences = 6;
};

struct Corpus {
  std::vector<dgn::SpExample> examples;
  std::string embeddings_text;

  std::string dataset_json() const { return dgn::dataset_to_json(examples).dump(); }
};

inline std::string word(std::size_t i) { return "veq" + std::to_string(i); }

inline std::string title_word(std::size_t i) { return "Norv" + std::to_string(i); }

inline Corpus make_corpus(const Options& opt) {
  dgn::Rng rng(opt.seed);
  Corpus corpus;

  std::ostringstream emb;
  emb.precision(9);
  for (std::size_t i = 0; i < opt.vocab; ++i) {
    std::vector<double> v(opt.dim);
    double norm = 0;
    for (auto& x : v) {
      x = rng.uniform(-1.0, 1.0);
      norm += x * x;
    }
    norm = std::sqrt(norm);
    emb << word(i);
    for (double x : v) emb << ' ' << x / norm;
    emb << '\n';
  }
  // title words share the same embedding space
  std::size_t title_vocab = 2 * opt.paragraphs * opt.examples / 3 + 64;
  for (std::size_t i = 0; i < title_vocab; ++i) {
    std::vector<double> v(opt.dim);
    double norm = 0;
    for (auto& x : v) {
      x = rng.uniform(-1.0, 1.0);
      norm += x * x;
    }
    norm = std::sqrt(norm);
    emb << "norv" << i;
    for (double x : v) emb << ' ' << x / norm;
    emb << '\n';
  }
  corpus.embeddings_text = emb.str();

  auto random_word = [&] { return word(rng.below(opt.vocab)); };
  std::size_t next_title = 0;
  auto fresh_title = [&] {
    std::size_t a = next_title++ % title_vocab;
    std::size_t b = next_title++ % title_vocab;
    return title_word(a) + " " + title_word(b);
  };

  for (std::size_t e = 0; e < opt.examples; ++e) {
    dgn::SpExample ex;
    ex.id = "synth" + std::to_string(e);

    std::vector<std::string> titles(opt.paragraphs);
    for (auto& t : titles) t = fresh_title();

    std::size_t gold_a = rng.below(opt.paragraphs);
    std::size_t gold_b = (gold_a + 1 + rng.below(opt.paragraphs - 1)) % opt.paragraphs;

    // signature words tie the question to its gold sentences
    std::string sig1 = random_word();
    std::string sig2 = random_word();
    std::string sig3 = random_word();
    ex.question = "Which fact links " + sig1 + " with " + sig2 + " and " + sig3 + "?";

    for (std::size_t p = 0; p < opt.paragraphs; ++p) {
      dgn::Paragraph para;
      para.title = titles[p];
      std::size_t n_sent =
          opt.min_sentences + rng.below(opt.max_sentences - opt.min_sentences + 1);
      std::size_t gold_idx = rng.below(n_sent);
      for (std::size_t s = 0; s < n_sent; ++s) {
        std::string sent;
        if (p == gold_a && s == gold_idx) {
          sent = "The " + sig1 + " record notes " + sig2 + " near " + titles[gold_b] + ".";
        } else if (p == gold_b && s == gold_idx) {
          sent = "Reports about " + sig2 + " mention " + sig3 + " and " + random_word() + ".";
        } else {
          std::size_t len = 4 + rng.below(5);
          sent = "A";
          for (std::size_t w = 0; w < len; ++w) sent += " " + random_word();
          sent += ".";
        }
        para.sentences.push_back(std::move(sent));
      }
      if (p == gold_a) ex.gold_facts.insert({titles[p], static_cast<std::uint32_t>(gold_idx)});
      if (p == gold_b) ex.gold_facts.insert({titles[p], static_cast<std::uint32_t>(gold_idx)});
      ex.paragraphs.push_back(std::move(para));
    }
    corpus.examples.push_back(std::move(ex));
  }
  return corpus;
}

template <typename T>
dgn::EmbeddingTable<T> load_table(const Corpus& corpus) {
  std::istringstream in(corpus.embeddings_text);
  return dgn::EmbeddingTable<T>::load(in);
}

}  // namespace synth
