#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "dgn/embeddings.hpp"
#include "dgn/error.hpp"
#include "dgn/graph.hpp"
#include "dgn/model.hpp"
#include "dgn/parallel.hpp"
#include "dgn/params.hpp"
#include "dgn/prefilter.hpp"
#include "dgn/rng.hpp"

namespace dgn {

struct TrainConfig {
  std::size_t m = 5;    // similarity values averaged per sentence score
  std::size_t k = 30;   // sentences kept by the prefilter
  std::size_t steps = 3;            // T
  std::size_t hidden_dim = 0;       // H; 0 means "equal to the embedding dim"
  std::size_t self_attn_dim = 64;   // D_s
  std::size_t output_hidden = 128;  // H_o
  double learning_rate = 1e-3;
  std::size_t epochs = 5;
  std::uint64_t seed = 1;
  double positive_weight = 1.0;  // loss weight of the positive class
  double threshold = 0.5;        // classification cut for evaluation
  bool collapse_edge_types = false;
  bool normalize_aggregation = false;
  std::string precision = "f32";  // f32 training, f64 verification
  double clip_norm = 5.0;         // global gradient norm cap
  bool strip_stopwords_from_nodes = true;
  bool early_stop = false;  // stop on stagnating dev F1
  std::size_t patience = 2;

  void validate() const {
    if (m < 1 || k < 1) throw ConfigError("config: m and k must be >= 1");
    if (steps < 1) throw ConfigError("config: steps must be >= 1");
    if (!(threshold > 0.0 && threshold < 1.0))
      throw ConfigError("config: threshold must lie in (0, 1)");
    if (learning_rate <= 0.0) throw ConfigError("config: learning rate must be positive");
    if (positive_weight <= 0.0) throw ConfigError("config: positive weight must be positive");
    if (precision != "f32" && precision != "f64")
      throw ConfigError("config: precision must be f32 or f64");
  }

  ModelConfig model_config(std::size_t embedding_dim) const {
    ModelConfig cfg;
    cfg.embedding_dim = embedding_dim;
    cfg.hidden_dim = hidden_dim;
    cfg.self_attn_dim = self_attn_dim;
    cfg.output_hidden = output_hidden;
    cfg.steps = steps;
    cfg.collapse_edge_types = collapse_edge_types;
    cfg.normalize_aggregation = normalize_aggregation;
    return cfg;
  }
};

// Keys are spelled exactly like the CLI flags.
inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"m", c.m},
                     {"k", c.k},
                     {"steps", c.steps},
                     {"hidden-dim", c.hidden_dim},
                     {"self-attn-dim", c.self_attn_dim},
                     {"output-hidden", c.output_hidden},
                     {"learning-rate", c.learning_rate},
                     {"epochs", c.epochs},
                     {"seed", c.seed},
                     {"positive-weight", c.positive_weight},
                     {"threshold", c.threshold},
                     {"collapse-edge-types", c.collapse_edge_types},
                     {"normalize-aggregation", c.normalize_aggregation},
                     {"precision", c.precision},
                     {"clip-norm", c.clip_norm},
                     {"strip-stopwords-from-nodes", c.strip_stopwords_from_nodes},
                     {"early-stop", c.early_stop},
                     {"patience", c.patience}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.m = j.value("m", c.m);
  c.k = j.value("k", c.k);
  c.steps = j.value("steps", c.steps);
  c.hidden_dim = j.value("hidden-dim", c.hidden_dim);
  c.self_attn_dim = j.value("self-attn-dim", c.self_attn_dim);
  c.output_hidden = j.value("output-hidden", c.output_hidden);
  c.learning_rate = j.value("learning-rate", c.learning_rate);
  c.epochs = j.value("epochs", c.epochs);
  c.seed = j.value("seed", c.seed);
  c.positive_weight = j.value("positive-weight", c.positive_weight);
  c.threshold = j.value("threshold", c.threshold);
  c.collapse_edge_types = j.value("collapse-edge-types", c.collapse_edge_types);
  c.normalize_aggregation = j.value("normalize-aggregation", c.normalize_aggregation);
  c.precision = j.value("precision", c.precision);
  c.clip_norm = j.value("clip-norm", c.clip_norm);
  c.strip_stopwords_from_nodes =
      j.value("strip-stopwords-from-nodes", c.strip_stopwords_from_nodes);
  c.early_stop = j.value("early-stop", c.early_stop);
  c.patience = j.value("patience", c.patience);
}

// ---- metrics ----

struct SingleMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool exact_match = false;
};

// Per-example supporting-fact metrics with the empty-prediction-zero
// convention. Gold must be non-empty; empty-gold examples are the caller's
// skip case.
inline SingleMetrics sp_metrics_single(const std::set<SentenceKey>& pred,
                                       const std::set<SentenceKey>& gold) {
  if (gold.empty()) throw ConfigError("sp_metrics_single: empty gold set");
  std::size_t hit = 0;
  for (const auto& key : pred)
    if (gold.count(key)) ++hit;
  SingleMetrics m;
  m.precision = pred.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(pred.size());
  m.recall = static_cast<double>(hit) / static_cast<double>(gold.size());
  m.f1 = (m.precision + m.recall) > 0.0
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  m.exact_match = pred == gold;
  return m;
}

// Macro-averaged per example; f1 is the mean of per-example harmonic means,
// not the harmonic mean of the averaged precision/recall.
struct SpMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double exact_match = 0.0;
  std::size_t examples = 0;
  std::size_t skipped = 0;
};

inline void to_json(nlohmann::json& j, const SpMetrics& m) {
  j = nlohmann::json{{"precision", m.precision}, {"recall", m.recall},
                     {"f1", m.f1},               {"em", m.exact_match},
                     {"examples", m.examples},   {"skipped", m.skipped}};
}

// ---- optimizer ----

// Adam with bias correction; moments follow the model precision.
template <typename T>
class AdamOptimizer {
 public:
  explicit AdamOptimizer(double learning_rate) : lr_(learning_rate) {}

  void step(ParamStore<T>& params) {
    if (m_.empty()) {
      for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor<T> zero = params.at(i).value;
        zero.fill(T(0));
        m_.push_back(zero);
        v_.push_back(zero);
      }
    }
    ++step_;
    double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(step_));
    double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(step_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& p = params.at(i);
      for (std::size_t j = 0; j < p.value.size(); ++j) {
        double g = static_cast<double>(p.gradient[j]);
        double m = kBeta1 * static_cast<double>(m_[i][j]) + (1.0 - kBeta1) * g;
        double v = kBeta2 * static_cast<double>(v_[i][j]) + (1.0 - kBeta2) * g * g;
        m_[i][j] = static_cast<T>(m);
        v_[i][j] = static_cast<T>(v);
        double update = lr_ * (m / bc1) / (std::sqrt(v / bc2) + kEps);
        p.value[j] = static_cast<T>(static_cast<double>(p.value[j]) - update);
      }
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  double lr_;
  std::uint64_t step_ = 0;
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
};

// ---- graph selection ----

// Training keeps top-k plus every gold fact; evaluation keeps pure top-k.
template <typename T>
std::set<SentenceKey> select_sentences(const SpExample& example, const DocumentGraph& graph,
                                       const EmbeddingTable<T>& table, const TrainConfig& cfg,
                                       bool training, const StopWords& stop) {
  auto kept_list = rank_and_select(example, graph, table, cfg.m, cfg.k, stop);
  std::set<SentenceKey> kept(kept_list.begin(), kept_list.end());
  if (training)
    for (const auto& fact : example.gold_facts) kept.insert(fact);
  return kept;
}

template <typename T>
DocumentGraph make_training_graph(const SpExample& example, const DocumentGraph& graph,
                                  const EmbeddingTable<T>& table, const TrainConfig& cfg,
                                  bool training = true,
                                  const StopWords& stop = StopWords::english()) {
  return induced_subgraph(graph, select_sentences(example, graph, table, cfg, training, stop));
}

using GraphProvider = std::function<DocumentGraph(const SpExample&)>;

inline GraphProvider default_graph_provider() {
  return [](const SpExample& ex) { return build_graph(ex); };
}

// ---- evaluation ----

// Predicted set per example: sentences with probability above the threshold
// over the eval-mode (pure top-k) induced graph. Examples with no valid gold
// facts, an empty question representation, or an empty induced graph are
// skipped and counted.
template <typename T>
SpMetrics evaluate(DgnModel<T>& model, const std::vector<SpExample>& dataset,
                   const EmbeddingTable<T>& table, const TrainConfig& cfg,
                   const GraphProvider& provider = default_graph_provider(),
                   std::size_t jobs = 1, const StopWords& stop = StopWords::english()) {
  SpMetrics metrics;
  metrics.examples = dataset.size();

  std::vector<std::optional<SingleMetrics>> per_example(dataset.size());
  parallel_for(dataset.size(), jobs, [&](std::size_t i) {
    const auto& ex = dataset[i];
    if (ex.gold_facts.empty() || ex.paragraphs.empty()) return;
    try {
      auto sub = make_training_graph(ex, provider(ex), table, cfg, false, stop);
      auto prepared =
          prepare_graph(sub, ex.question, table, ex.gold_facts, stop,
                        cfg.strip_stopwords_from_nodes, ex.id);
      if (prepared.sentence_rows.empty()) return;
      Tape<T> tape;
      auto fwd = forward(tape, model, prepared);
      std::set<SentenceKey> pred;
      const auto& probs = tape.value(fwd.probabilities);
      for (std::size_t s = 0; s < fwd.sentence_keys.size(); ++s)
        if (static_cast<double>(probs[s]) > cfg.threshold) pred.insert(fwd.sentence_keys[s]);
      per_example[i] = sp_metrics_single(pred, ex.gold_facts);
    } catch (const EmptyGraphError&) {
    } catch (const EmptyRepresentationError&) {
    }
  });

  std::size_t scored = 0;
  for (const auto& m : per_example) {
    if (!m) {
      ++metrics.skipped;
      continue;
    }
    ++scored;
    metrics.precision += m->precision;
    metrics.recall += m->recall;
    metrics.f1 += m->f1;
    metrics.exact_match += m->exact_match ? 1.0 : 0.0;
  }
  if (scored) {
    metrics.precision /= static_cast<double>(scored);
    metrics.recall /= static_cast<double>(scored);
    metrics.f1 /= static_cast<double>(scored);
    metrics.exact_match /= static_cast<double>(scored);
  }
  return metrics;
}

// ---- training ----

struct EpochLog {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  std::optional<double> train_f1;
};

inline void to_json(nlohmann::json& j, const EpochLog& log) {
  j = nlohmann::json{{"epoch", log.epoch}, {"mean_loss", log.mean_loss}};
  if (log.train_f1) j["train_f1"] = *log.train_f1;
}

struct TrainResult {
  std::vector<EpochLog> log;
  std::size_t skipped_examples = 0;
};

// Return false to stop training after the current epoch.
template <typename T>
using EpochCallback = std::function<bool(const EpochLog&, DgnModel<T>&)>;

// Supervised training with weighted binary cross-entropy over sentence nodes,
// one graph per optimization step, epoch order shuffled by the seeded RNG.
// Deterministic for fixed (dataset, config, seed). Examples whose question or
// induced graph is empty are skipped once, up front.
template <typename T>
TrainResult train(DgnModel<T>& model, const std::vector<SpExample>& dataset,
                  const EmbeddingTable<T>& table, const TrainConfig& cfg,
                  const GraphProvider& provider = default_graph_provider(),
                  const EpochCallback<T>& on_epoch = {},
                  const StopWords& stop = StopWords::english(), bool log_train_f1 = false) {
  if (dataset.empty()) throw ConfigError("train: empty dataset");
  cfg.validate();

  TrainResult result;
  std::vector<PreparedGraph<T>> prepared;
  prepared.reserve(dataset.size());
  for (const auto& ex : dataset) {
    try {
      auto sub = make_training_graph(ex, provider(ex), table, cfg, true, stop);
      auto p = prepare_graph(sub, ex.question, table, ex.gold_facts, stop,
                             cfg.strip_stopwords_from_nodes, ex.id);
      if (p.sentence_rows.empty()) throw EmptyGraphError("no sentence nodes");
      prepared.push_back(std::move(p));
    } catch (const EmptyGraphError&) {
      ++result.skipped_examples;
    } catch (const EmptyRepresentationError&) {
      ++result.skipped_examples;
    }
  }
  if (prepared.empty()) throw ConfigError("train: every example was skipped");

  AdamOptimizer<T> optimizer(cfg.learning_rate);
  std::vector<std::size_t> order(prepared.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng epoch_rng = Rng::stream(cfg.seed, epoch);
    epoch_rng.shuffle(order);

    double loss_sum = 0.0;
    for (std::size_t idx : order) {
      const auto& graph = prepared[idx];
      Tape<T> tape;
      auto fwd = forward(tape, model, graph);
      auto loss = tape.bce_with_logits(fwd.logits, graph.labels,
                                       static_cast<T>(cfg.positive_weight));
      double loss_value = static_cast<double>(tape.value(loss).item());
      if (!std::isfinite(loss_value))
        throw NumericError("train: non-finite loss at example " + graph.example_id);
      loss_sum += loss_value;

      backward(tape, loss, model.params);
      T norm = model.params.grad_norm();
      if (static_cast<double>(norm) > cfg.clip_norm)
        model.params.scale_grads(static_cast<T>(cfg.clip_norm / static_cast<double>(norm)));
      optimizer.step(model.params);
    }

    EpochLog log;
    log.epoch = epoch;
    log.mean_loss = loss_sum / static_cast<double>(prepared.size());
    if (log_train_f1)
      log.train_f1 = evaluate(model, dataset, table, cfg, provider, 1, stop).f1;
    result.log.push_back(log);
    if (on_epoch && !on_epoch(result.log.back(), model)) break;
  }
  return result;
}

}  // namespace dgn
