// Command-line pipeline: build/cache document graphs, evaluate the
// similarity prefilter, train the gated graph network, evaluate supporting
// fact predictions, and predict for a single question.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dgn/dataset.hpp"
#include "dgn/embeddings.hpp"
#include "dgn/error.hpp"
#include "dgn/graph.hpp"
#include "dgn/model.hpp"
#include "dgn/parallel.hpp"
#include "dgn/prefilter.hpp"
#include "dgn/serialize.hpp"
#include "dgn/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Applies a flat JSON object {"flag-name": value} to the options of the
// parsed subcommand. Values given on the command line take precedence; the
// config file only fills flags the user did not pass.
void apply_config_file(CLI::App* sub, const std::string& path) {
  if (path.empty()) return;
  std::ifstream in(path);
  if (!in) throw dgn::IoError("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw dgn::ParseError(std::string("config file is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw dgn::ParseError("config file must hold a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    std::string flag = "--" + it.key();
    CLI::Option* opt = sub->get_option_no_throw(flag);
    if (!opt) throw dgn::ConfigError("config file sets unknown flag " + flag);
    if (opt->count() > 0) continue;
    std::string value;
    if (it->is_string()) {
      value = it->get<std::string>();
    } else if (it->is_boolean()) {
      value = it->get<bool>() ? "true" : "false";
    } else {
      value = it->dump();
    }
    opt->add_result(value);
    opt->run_callback();
  }
}

struct CommonArgs {
  bool log_train_f1 = false;
  std::string dataset;
  std::string embeddings;
  std::string cache_dir;
  std::string checkpoint;
  std::string output;
  std::string log_path;
  std::string stopwords;
  std::string dev_dataset;
  std::string example_id;
  std::string config_file;
  std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());
};

void add_train_config_flags(CLI::App* sub, dgn::TrainConfig& cfg) {
  sub->add_option("--m", cfg.m, "similarity values averaged per sentence score");
  sub->add_option("--k", cfg.k, "sentences kept by the prefilter");
  sub->add_option("--steps", cfg.steps, "propagation steps T");
  sub->add_option("--hidden-dim", cfg.hidden_dim, "hidden width H (0: use embedding dim)");
  sub->add_option("--self-attn-dim", cfg.self_attn_dim, "self-attention width");
  sub->add_option("--output-hidden", cfg.output_hidden, "output network hidden width");
  sub->add_option("--learning-rate", cfg.learning_rate, "optimizer step size");
  sub->add_option("--epochs", cfg.epochs, "training epochs");
  sub->add_option("--seed", cfg.seed, "RNG seed");
  sub->add_option("--positive-weight", cfg.positive_weight, "loss weight of gold sentences");
  sub->add_option("--threshold", cfg.threshold, "classification probability cut");
  sub->add_flag("--collapse-edge-types", cfg.collapse_edge_types,
                "share one propagation matrix across edge types");
  sub->add_flag("--normalize-aggregation", cfg.normalize_aggregation,
                "mean instead of sum neighbor aggregation");
  sub->add_option("--precision", cfg.precision, "f32 or f64")
      ->check(CLI::IsMember({"f32", "f64"}));
  sub->add_option("--clip-norm", cfg.clip_norm, "global gradient norm cap");
  sub->add_flag("--strip-stopwords-from-nodes,!--keep-stopwords-in-nodes",
                cfg.strip_stopwords_from_nodes,
                "apply the stop list to node words, not only the question");
  sub->add_flag("--early-stop", cfg.early_stop, "stop on stagnating dev F1");
  sub->add_option("--patience", cfg.patience, "epochs without dev F1 gain before stopping");
}

// Path preflight: inputs must be readable and output directories writable
// before any heavy work begins.
void require_readable(const std::string& path, const char* what) {
  if (path.empty()) return;
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw dgn::IoError(std::string(what) + " not readable: " + path);
}

void require_writable_parent(const std::string& path, const char* what) {
  if (path.empty() || path == "/dev/null") return;
  fs::path parent = fs::path(path).parent_path();
  if (parent.empty()) parent = ".";
  std::error_code ec;
  fs::create_directories(parent, ec);
  fs::path probe_path = parent / (".dgn_probe_" + std::to_string(static_cast<unsigned>(::getpid())));
  std::ofstream probe(probe_path);
  if (!probe) {
    throw dgn::IoError(std::string(what) + " directory not writable: " + parent.string());
  }
  probe.close();
  fs::remove(probe_path, ec);
}

void preflight(const CommonArgs& args) {
  require_readable(args.dataset, "dataset");
  require_readable(args.embeddings, "embeddings");
  require_readable(args.stopwords, "stop-word list");
  require_readable(args.dev_dataset, "dev dataset");
  require_writable_parent(args.output, "output");
  require_writable_parent(args.log_path, "log");
}

dgn::StopWords load_stopwords(const CommonArgs& args) {
  if (args.stopwords.empty()) return dgn::StopWords::english();
  std::ifstream in(args.stopwords);
  if (!in) throw dgn::IoError("cannot open stop-word list " + args.stopwords);
  return dgn::StopWords::load(in);
}

dgn::Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw dgn::IoError("cannot open dataset " + path);
  auto ds = dgn::parse_dataset(in);
  if (ds.warnings.dropped_gold_facts)
    std::cerr << "warning: dropped " << ds.warnings.dropped_gold_facts
              << " unresolvable gold facts\n";
  return ds;
}

template <typename T>
dgn::EmbeddingTable<T> load_table(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw dgn::IoError("cannot open embeddings " + path);
  return dgn::EmbeddingTable<T>::load(in);
}

// Graph source honoring the cache directory: cached graphs are loaded,
// anything else is built on the fly.
dgn::GraphProvider cached_graph_provider(const std::string& cache_dir) {
  if (cache_dir.empty()) return dgn::default_graph_provider();
  return [cache_dir](const dgn::SpExample& ex) {
    fs::path path = fs::path(cache_dir) / dgn::graph_cache_name(ex.id);
    if (fs::exists(path)) {
      std::ifstream in(path, std::ios::binary);
      if (in) return dgn::load_graph(in).graph;
    }
    return dgn::build_graph(ex);
  };
}

void emit_report(const std::string& output, const json& report) {
  if (output.empty()) {
    std::cout << report.dump(2) << '\n';
  } else {
    dgn::atomic_write_file(output, report.dump(2) + "\n");
  }
}

int cmd_build_graph(const CommonArgs& args) {
  if (args.cache_dir.empty())
    throw dgn::ConfigError("build-graph: --cache-dir (or DGN_CACHE) is required");
  preflight(args);
  require_writable_parent((fs::path(args.cache_dir) / "x").string(), "cache");
  auto ds = load_dataset(args.dataset);

  std::vector<std::size_t> written(ds.examples.size(), 0);
  dgn::parallel_for(ds.examples.size(), args.jobs, [&](std::size_t i) {
    const auto& ex = ds.examples[i];
    auto graph = dgn::build_graph(ex);
    std::ostringstream bytes;
    dgn::save_graph(bytes, ex.id, graph);
    dgn::atomic_write_file(fs::path(args.cache_dir) / dgn::graph_cache_name(ex.id), bytes.str());
    written[i] = 1;
  });
  std::size_t count = 0;
  for (auto w : written) count += w;

  emit_report(args.output, json{{"graphs_written", count}});
  return 0;
}

int cmd_prefilter_eval(const CommonArgs& args, const dgn::TrainConfig& cfg) {
  preflight(args);
  auto ds = load_dataset(args.dataset);
  auto table = load_table<float>(args.embeddings);
  auto stop = load_stopwords(args);
  auto report = dgn::eval_recall(ds.examples, table, cfg.m, cfg.k, stop, args.jobs);

  emit_report(args.output, json{{"k", report.k},
                                {"m", report.m},
                                {"recall", report.recall},
                                {"mean_candidates", report.mean_candidates},
                                {"discard_fraction", report.discard_fraction},
                                {"skipped_examples", report.skipped_examples}});
  return 0;
}

template <typename T>
int run_train(const CommonArgs& args, dgn::TrainConfig cfg) {
  preflight(args);
  require_writable_parent(args.checkpoint, "checkpoint");
  auto ds = load_dataset(args.dataset);
  auto table = load_table<T>(args.embeddings);
  auto stop = load_stopwords(args);
  auto provider = cached_graph_provider(args.cache_dir);

  auto model = dgn::DgnModel<T>::init(cfg.model_config(table.dimension()), cfg.seed);

  std::optional<dgn::Dataset> dev;
  if (!args.dev_dataset.empty()) dev = load_dataset(args.dev_dataset);

  double best_dev_f1 = -1.0;
  std::size_t stale_epochs = 0;
  dgn::EpochCallback<T> on_epoch = [&](const dgn::EpochLog& log, dgn::DgnModel<T>& m) {
    if (!cfg.early_stop || !dev) return true;
    auto metrics = dgn::evaluate(m, dev->examples, table, cfg, provider, args.jobs, stop);
    std::cerr << "epoch " << log.epoch << " dev f1 " << metrics.f1 << "\n";
    if (metrics.f1 > best_dev_f1) {
      best_dev_f1 = metrics.f1;
      stale_epochs = 0;
    } else {
      ++stale_epochs;
    }
    return stale_epochs < cfg.patience;
  };

  auto result =
      dgn::train(model, ds.examples, table, cfg, provider, on_epoch, stop, args.log_train_f1);
  if (result.skipped_examples)
    std::cerr << "warning: skipped " << result.skipped_examples
              << " examples with empty graphs or questions\n";

  std::ostringstream log_lines;
  for (const auto& entry : result.log) log_lines << json(entry).dump() << '\n';
  if (args.log_path.empty()) {
    std::cout << log_lines.str();
  } else {
    dgn::atomic_write_file(args.log_path, log_lines.str());
  }

  std::ostringstream bytes;
  dgn::save_checkpoint<T>(bytes, model.params, json(cfg).dump(), cfg.seed);
  dgn::atomic_write_file(args.checkpoint, bytes.str());
  return 0;
}

// Restores config and parameters; CLI flags the user actually passed replace
// the checkpointed config values.
template <typename T>
std::pair<dgn::DgnModel<T>, dgn::TrainConfig> load_model(const std::string& path,
                                                         std::size_t table_dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw dgn::IoError("cannot open checkpoint " + path);
  auto loaded = dgn::load_checkpoint<T>(in);
  dgn::TrainConfig cfg;
  try {
    cfg = json::parse(loaded.config_json).template get<dgn::TrainConfig>();
  } catch (const json::exception& e) {
    throw dgn::FormatError(std::string("checkpoint config snapshot unreadable: ") + e.what());
  }
  std::size_t model_dim = loaded.params.get("attn.bilinear_w").value.dim0();
  if (model_dim != table_dim)
    throw dgn::ConfigError("checkpoint embedding dim " + std::to_string(model_dim) +
                           " does not match table dim " + std::to_string(table_dim));
  dgn::DgnModel<T> model{cfg.model_config(table_dim), std::move(loaded.params)};
  model.config.validate();
  return {std::move(model), cfg};
}

void apply_cli_overrides(CLI::App* sub, dgn::TrainConfig& cfg, const dgn::TrainConfig& parsed) {
  // flags present on the command line (or config file) override the
  // checkpoint snapshot
  auto maybe = [&](const char* name, auto member) {
    if (sub->count(name)) cfg.*member = parsed.*member;
  };
  maybe("--m", &dgn::TrainConfig::m);
  maybe("--k", &dgn::TrainConfig::k);
  maybe("--threshold", &dgn::TrainConfig::threshold);
  maybe("--positive-weight", &dgn::TrainConfig::positive_weight);
  maybe("--strip-stopwords-from-nodes", &dgn::TrainConfig::strip_stopwords_from_nodes);
}

template <typename T>
int run_eval(const CommonArgs& args, CLI::App* sub, const dgn::TrainConfig& parsed) {
  preflight(args);
  require_readable(args.checkpoint, "checkpoint");
  auto ds = load_dataset(args.dataset);
  auto table = load_table<T>(args.embeddings);
  auto stop = load_stopwords(args);
  auto [model, cfg] = load_model<T>(args.checkpoint, table.dimension());
  apply_cli_overrides(sub, cfg, parsed);

  auto metrics = dgn::evaluate(model, ds.examples, table, cfg,
                               cached_graph_provider(args.cache_dir), args.jobs, stop);
  emit_report(args.output, json(metrics));
  return 0;
}

template <typename T>
int run_predict(const CommonArgs& args, CLI::App* sub, const dgn::TrainConfig& parsed) {
  preflight(args);
  require_readable(args.checkpoint, "checkpoint");
  auto ds = load_dataset(args.dataset);
  const dgn::SpExample* example = nullptr;
  for (const auto& ex : ds.examples)
    if (ex.id == args.example_id) example = &ex;
  if (!example) throw dgn::LookupError("unknown example id: " + args.example_id);

  auto table = load_table<T>(args.embeddings);
  auto stop = load_stopwords(args);
  auto [model, cfg] = load_model<T>(args.checkpoint, table.dimension());
  apply_cli_overrides(sub, cfg, parsed);

  auto provider = cached_graph_provider(args.cache_dir);
  auto sub_graph = dgn::make_training_graph(*example, provider(*example), table, cfg, false, stop);
  auto prepared = dgn::prepare_graph(sub_graph, example->question, table, example->gold_facts,
                                     stop, cfg.strip_stopwords_from_nodes, example->id);
  dgn::Tape<T> tape;
  auto fwd = dgn::forward(tape, model, prepared);

  std::vector<std::pair<dgn::SentenceKey, double>> predictions;
  const auto& probs = tape.value(fwd.probabilities);
  for (std::size_t i = 0; i < fwd.sentence_keys.size(); ++i)
    if (static_cast<double>(probs[i]) > cfg.threshold)
      predictions.emplace_back(fwd.sentence_keys[i], static_cast<double>(probs[i]));
  std::stable_sort(predictions.begin(), predictions.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  json out = json::array();
  for (const auto& [key, prob] : predictions) out.push_back({key.first, key.second});
  emit_report(args.output, out);
  return 0;
}

int guarded_main(int argc, char** argv) {
  CLI::App app{"document graph pipeline for multi-hop supporting-fact identification"};
  app.require_subcommand(1);

  CommonArgs args;
  if (const char* env_cache = std::getenv("DGN_CACHE")) args.cache_dir = env_cache;
  dgn::TrainConfig cfg;

  auto* build = app.add_subcommand("build-graph", "build and cache document graphs");
  build->add_option("--dataset", args.dataset, "dataset JSON")->required();
  build->add_option("--cache-dir", args.cache_dir, "graph cache directory (env DGN_CACHE)");
  build->add_option("--output", args.output, "write the JSON report here");
  build->add_option("--jobs", args.jobs, "worker thread cap");
  build->add_option("--config", args.config_file, "JSON file with flag values (command line wins)");

  auto* pre = app.add_subcommand("prefilter-eval", "recall of the similarity prefilter");
  pre->add_option("--dataset", args.dataset, "dataset JSON")->required();
  pre->add_option("--embeddings", args.embeddings, "embedding text file")->required();
  pre->add_option("--stopwords", args.stopwords, "stop-word list, one token per line");
  pre->add_option("--output", args.output, "write the JSON report here");
  pre->add_option("--jobs", args.jobs, "worker thread cap");
  add_train_config_flags(pre, cfg);
  pre->add_option("--config", args.config_file, "JSON file with flag values (command line wins)");

  auto* train = app.add_subcommand("train", "train the network on gold supporting facts");
  train->add_option("--dataset", args.dataset, "training dataset JSON")->required();
  train->add_option("--embeddings", args.embeddings, "embedding text file")->required();
  train->add_option("--checkpoint", args.checkpoint, "checkpoint output path")->required();
  train->add_option("--log", args.log_path, "epoch log (JSON lines); stdout when omitted");
  train->add_option("--cache-dir", args.cache_dir, "graph cache directory (env DGN_CACHE)");
  train->add_option("--stopwords", args.stopwords, "stop-word list, one token per line");
  train->add_option("--dev-dataset", args.dev_dataset, "dev split for early stopping");
  train->add_flag("--log-train-f1", args.log_train_f1, "add the training-set F1 to each epoch record");
  train->add_option("--jobs", args.jobs, "worker thread cap");
  add_train_config_flags(train, cfg);
  train->add_option("--config", args.config_file, "JSON file with flag values (command line wins)");

  auto* eval = app.add_subcommand("eval", "supporting-fact metrics of a checkpoint");
  eval->add_option("--dataset", args.dataset, "evaluation dataset JSON")->required();
  eval->add_option("--embeddings", args.embeddings, "embedding text file")->required();
  eval->add_option("--checkpoint", args.checkpoint, "checkpoint to evaluate")->required();
  eval->add_option("--output", args.output, "write the metric JSON here");
  eval->add_option("--cache-dir", args.cache_dir, "graph cache directory (env DGN_CACHE)");
  eval->add_option("--stopwords", args.stopwords, "stop-word list, one token per line");
  eval->add_option("--jobs", args.jobs, "worker thread cap");
  add_train_config_flags(eval, cfg);
  eval->add_option("--config", args.config_file, "JSON file with flag values (command line wins)");

  auto* predict = app.add_subcommand("predict", "predicted supporting facts for one question");
  predict->add_option("--dataset", args.dataset, "dataset JSON")->required();
  predict->add_option("--embeddings", args.embeddings, "embedding text file")->required();
  predict->add_option("--checkpoint", args.checkpoint, "trained checkpoint")->required();
  predict->add_option("--id", args.example_id, "example id to predict")->required();
  predict->add_option("--output", args.output, "write predictions here instead of stdout");
  predict->add_option("--cache-dir", args.cache_dir, "graph cache directory (env DGN_CACHE)");
  predict->add_option("--stopwords", args.stopwords, "stop-word list, one token per line");
  predict->add_option("--jobs", args.jobs, "worker thread cap");
  add_train_config_flags(predict, cfg);
  predict->add_option("--config", args.config_file, "JSON file with flag values (command line wins)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 3;
  }

  for (CLI::App* sub : {build, pre, train, eval, predict})
    if (sub->parsed()) apply_config_file(sub, args.config_file);

  cfg.validate();
  if (build->parsed()) return cmd_build_graph(args);
  if (pre->parsed()) return cmd_prefilter_eval(args, cfg);
  if (train->parsed())
    return cfg.precision == "f64" ? run_train<double>(args, cfg) : run_train<float>(args, cfg);
  if (eval->parsed()) {
    std::ifstream in(args.checkpoint, std::ios::binary);
    if (!in) throw dgn::IoError("cannot open checkpoint " + args.checkpoint);
    auto info = dgn::read_checkpoint_header(in);
    in.close();
    return info.scalar_width == 8 ? run_eval<double>(args, eval, cfg)
                                  : run_eval<float>(args, eval, cfg);
  }
  if (predict->parsed()) {
    std::ifstream in(args.checkpoint, std::ios::binary);
    if (!in) throw dgn::IoError("cannot open checkpoint " + args.checkpoint);
    auto info = dgn::read_checkpoint_header(in);
    in.close();
    return info.scalar_width == 8 ? run_predict<double>(args, predict, cfg)
                                  : run_predict<float>(args, predict, cfg);
  }
  return 3;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return guarded_main(argc, argv);
  } catch (const dgn::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 3;
  } catch (const dgn::ParseError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 2;
  } catch (const dgn::FormatError& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return 2;
  } catch (const dgn::IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return 2;
  } catch (const dgn::LookupError& e) {
    std::cerr << "lookup error: " << e.what() << '\n';
    return 2;
  } catch (const dgn::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
