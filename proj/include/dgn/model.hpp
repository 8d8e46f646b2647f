#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dgn/embeddings.hpp"
#include "dgn/error.hpp"
#include "dgn/graph.hpp"
#include "dgn/params.hpp"
#include "dgn/rng.hpp"
#include "dgn/tape.hpp"
#include "dgn/tensor.hpp"
#include "dgn/tokenize.hpp"

namespace dgn {

struct ModelConfig {
  std::size_t embedding_dim = 0;   // D, fixed by the embedding table
  std::size_t hidden_dim = 0;      // H >= D; 0 means H = D
  std::size_t self_attn_dim = 64;  // D_s
  std::size_t output_hidden = 128; // H_o
  std::size_t steps = 3;           // T propagation steps
  bool collapse_edge_types = false;  // single propagation matrix ablation
  bool normalize_aggregation = false;  // mean instead of sum over neighbors

  std::size_t effective_hidden() const { return hidden_dim ? hidden_dim : embedding_dim; }

  void validate() const {
    if (embedding_dim == 0) throw ConfigError("model: embedding dimension not set");
    if (hidden_dim && hidden_dim < embedding_dim)
      throw ConfigError("model: hidden dim " + std::to_string(hidden_dim) +
                        " smaller than annotation dim " + std::to_string(embedding_dim));
    if (steps < 1) throw ConfigError("model: propagation steps must be >= 1");
    if (self_attn_dim < 1 || output_hidden < 1)
      throw ConfigError("model: attention/output widths must be >= 1");
  }
};

inline const char* propagation_param_name(EdgeType type, std::size_t direction) {
  if (type == EdgeType::sentence_document)
    return direction == 0 ? "ggnn.prop_sd_out" : "ggnn.prop_sd_in";
  return direction == 0 ? "ggnn.prop_dd_out" : "ggnn.prop_dd_in";
}

// All learned tensors in canonical order; seeded Glorot-uniform weights,
// zero biases.
template <typename T>
ParamStore<T> init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::size_t d = cfg.embedding_dim;
  std::size_t h = cfg.effective_hidden();
  std::size_t ds = cfg.self_attn_dim;
  std::size_t ho = cfg.output_hidden;

  Rng rng(seed);
  ParamStore<T> params;
  params.add("attn.bilinear_w", glorot_uniform<T>(d, d, rng));
  params.add("attn.bilinear_b", Tensor<T>::scalar(T(0)));
  params.add("attn.phi_w", glorot_uniform<T>(d, d, rng));
  params.add("attn.phi_b", Tensor<T>::vector(d));
  params.add("attn.self_w", glorot_uniform<T>(ds, d, rng));
  params.add("attn.self_b", Tensor<T>::vector(ds));
  params.add("attn.self_u", glorot_uniform_vec<T>(ds, rng));

  if (cfg.collapse_edge_types) {
    params.add("ggnn.prop_shared", glorot_uniform<T>(h, h, rng));
  } else {
    for (auto type : {EdgeType::sentence_document, EdgeType::document_document})
      for (std::size_t dir = 0; dir < 2; ++dir)
        params.add(propagation_param_name(type, dir), glorot_uniform<T>(h, h, rng));
  }
  params.add("ggnn.agg_b", Tensor<T>::vector(h));
  params.add("ggnn.update_w", glorot_uniform<T>(h, h, rng));
  params.add("ggnn.update_u", glorot_uniform<T>(h, h, rng));
  params.add("ggnn.reset_w", glorot_uniform<T>(h, h, rng));
  params.add("ggnn.reset_u", glorot_uniform<T>(h, h, rng));
  params.add("ggnn.cand_w", glorot_uniform<T>(h, h, rng));
  params.add("ggnn.cand_u", glorot_uniform<T>(h, h, rng));

  params.add("out.w1", glorot_uniform<T>(ho, h + d, rng));
  params.add("out.b1", Tensor<T>::vector(ho));
  params.add("out.w2", glorot_uniform_vec<T>(ho, rng));
  params.add("out.b2", Tensor<T>::scalar(T(0)));
  return params;
}

template <typename T>
struct DgnModel {
  ModelConfig config;
  ParamStore<T> params;

  static DgnModel init(ModelConfig cfg, std::uint64_t seed) {
    return DgnModel{cfg, init_params<T>(cfg, seed)};
  }
};

// A graph plus question, embedded and ready for the network. Node features
// and adjacency are fixed per example, so an example prepared once can be
// re-run across epochs.
template <typename T>
struct PreparedGraph {
  std::string example_id;
  Tensor<T> question;                     // |W_q| x D
  std::vector<Tensor<T>> node_features;   // per node, |W_v| x D (one zero row if empty)
  std::vector<bool> empty_nodes;
  std::vector<NodeKind> kinds;
  std::vector<SentenceKey> keys;          // per node; document nodes carry index 0
  std::vector<std::size_t> sentence_rows; // node indices of sentence nodes
  Adjacency adj;
  std::vector<T> labels;                  // per sentence row, 1 = gold

  std::size_t node_count() const { return node_features.size(); }
};

template <typename T>
PreparedGraph<T> prepare_graph(const DocumentGraph& graph, const std::string& question,
                               const EmbeddingTable<T>& table,
                               const std::set<SentenceKey>& gold = {},
                               const StopWords& stop = StopWords::english(),
                               bool strip_stopwords_from_nodes = true,
                               const std::string& example_id = "") {
  if (graph.nodes.empty())
    throw EmptyGraphError("prepare_graph: empty graph for example " + example_id);

  PreparedGraph<T> out;
  out.example_id = example_id;

  auto q = table.embed(tokenize(question, stop));
  if (q.empty_representation())
    throw EmptyRepresentationError("prepare_graph: question has no in-vocabulary tokens: " +
                                   question);
  out.question = std::move(q.matrix);

  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    const auto& node = graph.nodes[i];
    TokenSequence tokens;
    if (node.kind == NodeKind::sentence) {
      tokens = strip_stopwords_from_nodes ? tokenize(node.text, stop)
                                          : tokenize_keep_stopwords(node.text);
    } else {
      tokens = node.feature_tokens;
    }
    auto emb = table.embed(tokens);
    bool empty = emb.empty_representation();
    // empty nodes still route messages: give them one all-zero feature row
    out.node_features.push_back(empty ? Tensor<T>::matrix(1, table.dimension())
                                      : std::move(emb.matrix));
    out.empty_nodes.push_back(empty);
    out.kinds.push_back(node.kind);
    out.keys.push_back(node.kind == NodeKind::sentence ? node.key()
                                                       : SentenceKey{node.title, 0});
    if (node.kind == NodeKind::sentence) {
      out.sentence_rows.push_back(i);
      out.labels.push_back(gold.count(node.key()) ? T(1) : T(0));
    }
  }
  out.adj = build_adjacency(graph);
  return out;
}

template <typename T>
struct ConditionedNode {
  typename Tape<T>::Id conditioned;  // |W_v| x D
  typename Tape<T>::Id alpha;        // [|W_v|], sums to 1
};

// Bilinear attention against the question, reduced per node word by max over
// question words, then a gated nonlinear transform:
//   E = V W_b Q^T + b,  alpha = softmax(rowmax E),  vhat_w = alpha_w * tanh(W_phi v_w + b_phi)
template <typename T>
ConditionedNode<T> condition_on_question(Tape<T>& tape, typename Tape<T>::Id node_repr,
                                         typename Tape<T>::Id question, ParamStore<T>& params) {
  if (tape.value(node_repr).rows() == 0 || tape.value(question).rows() == 0)
    throw EmptyRepresentationError("condition_on_question: empty representation");
  auto scores = tape.add_scalar(
      tape.matmul(tape.matmul(node_repr, params.get("attn.bilinear_w").use(tape)),
                  tape.transpose(question)),
      params.get("attn.bilinear_b").use(tape));
  auto alpha = tape.softmax_rows(tape.row_max(scores));
  auto transformed = tape.tanh(
      tape.add_rowvec(tape.matmul(node_repr, tape.transpose(params.get("attn.phi_w").use(tape))),
                      params.get("attn.phi_b").use(tape)));
  return {tape.scale_rows(transformed, alpha), alpha};
}

template <typename T>
struct PooledNode {
  typename Tape<T>::Id annotation;  // [D]
  typename Tape<T>::Id delta;       // [|W_v|], sums to 1
};

// Self-attention pooling to a single annotation vector:
//   r_w = u^T tanh(W_s vhat_w + b_s),  delta = softmax(r),  x_v = sum_w delta_w vhat_w
template <typename T>
PooledNode<T> pool_to_annotation(Tape<T>& tape, typename Tape<T>::Id conditioned,
                                 ParamStore<T>& params) {
  auto hidden = tape.tanh(
      tape.add_rowvec(tape.matmul(conditioned, tape.transpose(params.get("attn.self_w").use(tape))),
                      params.get("attn.self_b").use(tape)));
  auto scores = tape.matvec(hidden, params.get("attn.self_u").use(tape));
  auto delta = tape.softmax_rows(scores);
  auto annotation = tape.matvec(tape.transpose(conditioned), delta);
  return {annotation, delta};
}

// h^(1) = [x_v, 0]: annotations zero-padded on the right to the hidden width.
template <typename T>
typename Tape<T>::Id init_hidden(Tape<T>& tape, typename Tape<T>::Id annotations,
                                 std::size_t hidden_dim) {
  const auto& x = tape.value(annotations);
  if (hidden_dim < x.cols())
    throw ConfigError("init_hidden: hidden dim " + std::to_string(hidden_dim) +
                      " smaller than annotation dim " + std::to_string(x.cols()));
  return tape.pad_cols(annotations, hidden_dim);
}

// T rounds of gated propagation over the typed adjacency. Each round:
//   a_v = sum over (type, dir) P_{type,dir} (sum of neighbor states) + b
//   z   = sigmoid(W^z a + U^z h),  r = sigmoid(W^r a + U^r h)
//   hcand = tanh(W a + U (r * h)),  h <- (1 - z) * h + z * hcand
// Aggregation is an unnormalized sum unless normalize_aggregation is set.
// After T rounds a node has seen exactly its distance-<=T neighborhood.
template <typename T>
typename Tape<T>::Id propagate(Tape<T>& tape, typename Tape<T>::Id hidden, const Adjacency& adj,
                               ParamStore<T>& params, const ModelConfig& cfg) {
  if (tape.value(hidden).rows() != adj.node_count)
    throw ShapeError("propagate: " + std::to_string(adj.node_count) + " adjacency nodes vs " +
                     tape.value(hidden).shape_str() + " hidden states");
  auto h = hidden;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    typename Tape<T>::Id agg = 0;
    bool first = true;
    for (std::size_t type = 0; type < Adjacency::kEdgeTypes; ++type)
      for (std::size_t dir = 0; dir < Adjacency::kDirections; ++dir) {
        const char* name = cfg.collapse_edge_types
                               ? "ggnn.prop_shared"
                               : propagation_param_name(static_cast<EdgeType>(type), dir);
        auto gathered = tape.neighbor_sum(h, adj.lists[type][dir], cfg.normalize_aggregation);
        auto routed = tape.matmul(gathered, tape.transpose(params.get(name).use(tape)));
        agg = first ? routed : tape.add(agg, routed);
        first = false;
      }
    auto a = tape.add_rowvec(agg, params.get("ggnn.agg_b").use(tape));

    auto z = tape.sigmoid(
        tape.add(tape.matmul(a, tape.transpose(params.get("ggnn.update_w").use(tape))),
                 tape.matmul(h, tape.transpose(params.get("ggnn.update_u").use(tape)))));
    auto r = tape.sigmoid(
        tape.add(tape.matmul(a, tape.transpose(params.get("ggnn.reset_w").use(tape))),
                 tape.matmul(h, tape.transpose(params.get("ggnn.reset_u").use(tape)))));
    auto candidate = tape.tanh(
        tape.add(tape.matmul(a, tape.transpose(params.get("ggnn.cand_w").use(tape))),
                 tape.matmul(tape.mul(r, h), tape.transpose(params.get("ggnn.cand_u").use(tape)))));
    h = tape.add(tape.mul(tape.one_minus(z), h), tape.mul(z, candidate));
  }
  return h;
}

// Two-layer output network over [h_v^(T); x_v] for the selected rows,
// yielding one logit per row.
template <typename T>
typename Tape<T>::Id classify_rows(Tape<T>& tape, typename Tape<T>::Id final_hidden,
                                   typename Tape<T>::Id annotations,
                                   const std::vector<std::size_t>& rows, ParamStore<T>& params) {
  auto features =
      tape.concat_cols(tape.gather_rows(final_hidden, rows), tape.gather_rows(annotations, rows));
  auto hidden = tape.tanh(
      tape.add_rowvec(tape.matmul(features, tape.transpose(params.get("out.w1").use(tape))),
                      params.get("out.b1").use(tape)));
  return tape.add_scalar(tape.matvec(hidden, params.get("out.w2").use(tape)),
                         params.get("out.b2").use(tape));
}

template <typename T>
struct ForwardResult {
  typename Tape<T>::Id logits = 0;         // [sentence rows]
  typename Tape<T>::Id probabilities = 0;  // sigmoid(logits)
  typename Tape<T>::Id annotations = 0;    // |V| x D
  typename Tape<T>::Id final_hidden = 0;   // |V| x H
  std::vector<typename Tape<T>::Id> alphas;
  std::vector<typename Tape<T>::Id> deltas;
  std::vector<SentenceKey> sentence_keys;

  std::vector<std::pair<SentenceKey, double>> probability_map(const Tape<T>& tape) const {
    std::vector<std::pair<SentenceKey, double>> out;
    const auto& p = tape.value(probabilities);
    for (std::size_t i = 0; i < sentence_keys.size(); ++i)
      out.emplace_back(sentence_keys[i], static_cast<double>(p[i]));
    return out;
  }
};

// Whole-network forward pass: condition every node on the question, pool to
// annotations, propagate, classify the sentence nodes.
template <typename T>
ForwardResult<T> forward(Tape<T>& tape, DgnModel<T>& model, const PreparedGraph<T>& graph) {
  if (graph.node_count() == 0)
    throw EmptyGraphError("forward: empty graph for example " + graph.example_id);
  if (graph.sentence_rows.empty())
    throw EmptyGraphError("forward: no sentence nodes in example " + graph.example_id);
  if (graph.question.cols() != model.config.embedding_dim)
    throw ConfigError("forward: question dim " + std::to_string(graph.question.cols()) +
                      " vs model dim " + std::to_string(model.config.embedding_dim));

  ForwardResult<T> result;
  auto question = tape.constant(graph.question);
  std::vector<typename Tape<T>::Id> annotations;
  annotations.reserve(graph.node_count());
  for (std::size_t v = 0; v < graph.node_count(); ++v) {
    auto node = tape.constant(graph.node_features[v]);
    auto conditioned = condition_on_question(tape, node, question, model.params);
    auto pooled = pool_to_annotation(tape, conditioned.conditioned, model.params);
    result.alphas.push_back(conditioned.alpha);
    result.deltas.push_back(pooled.delta);
    annotations.push_back(pooled.annotation);
  }
  result.annotations = tape.stack_rows(annotations);
  auto h1 = init_hidden(tape, result.annotations, model.config.effective_hidden());
  result.final_hidden = propagate(tape, h1, graph.adj, model.params, model.config);
  result.logits =
      classify_rows(tape, result.final_hidden, result.annotations, graph.sentence_rows,
                    model.params);
  result.probabilities = tape.sigmoid(result.logits);
  for (auto row : graph.sentence_rows) result.sentence_keys.push_back(graph.keys[row]);
  return result;
}

// Guard for the per-node contract: classification applies to sentence nodes
// only.
template <typename T>
double classify_single(Tape<T>& tape, DgnModel<T>& model, const PreparedGraph<T>& graph,
                       const ForwardResult<T>& result, std::size_t node_index) {
  if (node_index >= graph.node_count())
    throw LookupError("classify_single: node " + std::to_string(node_index) + " out of range");
  if (graph.kinds[node_index] != NodeKind::sentence)
    throw ConfigError("classify_single: node " + std::to_string(node_index) +
                      " is a document node");
  auto logit = classify_rows(tape, result.final_hidden, result.annotations, {node_index},
                             model.params);
  return static_cast<double>(tape.value(tape.sigmoid(logit))[0]);
}

}  // namespace dgn
