// End-to-end runs of the command-line binary against generated fixtures.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "dgn/serialize.hpp"
#include "doctest.h"
#include "support/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Fixture {
  fs::path dir;
  fs::path dataset;
  fs::path embeddings;

  explicit Fixture(const synth::Options& opt, const std::string& name) {
    dir = fs::temp_directory_path() / ("dgn_cli_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    auto corpus = synth::make_corpus(opt);
    dataset = dir / "dataset.json";
    embeddings = dir / "embeddings.txt";
    std::ofstream(dataset) << corpus.dataset_json();
    std::ofstream(embeddings) << corpus.embeddings_text;
  }

  ~Fixture() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }

  fs::path operator/(const char* name) const { return dir / name; }
};

int run(const std::string& command) {
  int status = std::system(command.c_str());
  return WEXITSTATUS(status);
}

std::string cli() { return std::string(DGN_CLI_PATH); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

TEST_CASE("build-graph writes one cache file per example, idempotently") {
  Fixture fx({.examples = 12, .vocab = 50, .dim = 6, .seed = 101}, "build");
  auto cache = fx / "cache";
  auto report = fx / "report.json";

  int rc = run(cli() + " build-graph --dataset " + fx.dataset.string() + " --cache-dir " +
               cache.string() + " --output " + report.string());
  REQUIRE(rc == 0);
  auto j = json::parse(slurp(report));
  CHECK(j.at("graphs_written") == 12);

  std::size_t files = 0;
  fs::path sample;
  for (const auto& entry : fs::directory_iterator(cache)) {
    ++files;
    if (sample.empty()) sample = entry.path();
  }
  CHECK(files == 12);

  // rerun: byte-identical cache content
  std::string before = slurp(sample);
  rc = run(cli() + " build-graph --dataset " + fx.dataset.string() + " --cache-dir " +
           cache.string() + " --output " + report.string());
  REQUIRE(rc == 0);
  CHECK(slurp(sample) == before);

  // cached graphs load back
  std::ifstream in(sample, std::ios::binary);
  auto loaded = dgn::load_graph(in);
  CHECK_FALSE(loaded.graph.nodes.empty());
}

TEST_CASE("build-graph honors the DGN_CACHE environment variable") {
  Fixture fx({.examples = 3, .vocab = 40, .dim = 5, .seed = 103}, "envcache");
  auto cache = fx / "env_cache";
  int rc = run("DGN_CACHE=" + cache.string() + " " + cli() + " build-graph --dataset " +
               fx.dataset.string());
  REQUIRE(rc == 0);
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& entry : fs::directory_iterator(cache)) ++files;
  CHECK(files == 3);
}

TEST_CASE("prefilter-eval reports full recall for huge k and fails cleanly on bad input") {
  Fixture fx({.examples = 8, .vocab = 50, .dim = 6, .seed = 107}, "prefilter");
  auto report = fx / "prefilter.json";

  int rc = run(cli() + " prefilter-eval --dataset " + fx.dataset.string() + " --embeddings " +
               fx.embeddings.string() + " --k 10000 --m 5 --output " + report.string());
  REQUIRE(rc == 0);
  auto j = json::parse(slurp(report));
  CHECK(j.at("recall") == doctest::Approx(1.0));
  CHECK(j.at("k") == 10000);
  CHECK(j.at("m") == 5);
  CHECK(j.at("skipped_examples") == 0);
  CHECK(j.at("discard_fraction") == doctest::Approx(0.0));
  CHECK(j.at("mean_candidates").get<double>() > 0.0);

  // malformed dataset -> exit code 2
  auto broken = fx / "broken.json";
  std::ofstream(broken) << "{ not json";
  rc = run(cli() + " prefilter-eval --dataset " + broken.string() + " --embeddings " +
           fx.embeddings.string() + " 2>/dev/null");
  CHECK(rc == 2);
}

TEST_CASE("train / eval / predict round trip on an overfit toy corpus") {
  Fixture fx({.examples = 5,
              .vocab = 60,
              .dim = 8,
              .seed = 109,
              .paragraphs = 3,
              .min_sentences = 2,
              .max_sentences = 3},
             "train");
  auto ckpt = (fx / "model.ckpt").string();
  auto log = (fx / "train.jsonl").string();
  std::string flags = " --epochs 80 --seed 7 --self-attn-dim 8 --output-hidden 16";

  int rc = run(cli() + " train --dataset " + fx.dataset.string() + " --embeddings " +
               fx.embeddings.string() + " --checkpoint " + ckpt + " --log " + log + flags);
  REQUIRE(rc == 0);

  // epoch log: one JSON record per epoch
  std::istringstream log_in(slurp(log));
  std::string line;
  std::size_t lines = 0;
  double last_loss = 1e9;
  while (std::getline(log_in, line)) {
    auto j = json::parse(line);
    CHECK(j.at("epoch") == ++lines);
    last_loss = j.at("mean_loss").get<double>();
  }
  CHECK(lines == 80);
  CHECK(last_loss < 0.2);

  auto metrics_path = fx / "metrics.json";
  rc = run(cli() + " eval --dataset " + fx.dataset.string() + " --embeddings " +
           fx.embeddings.string() + " --checkpoint " + ckpt + " --output " +
           metrics_path.string());
  REQUIRE(rc == 0);
  auto metrics = json::parse(slurp(metrics_path));
  CHECK(metrics.at("f1").get<double>() >= 0.95);
  CHECK(metrics.at("examples") == 5);

  // near-one threshold: recall collapses
  auto strict_path = fx / "strict.json";
  rc = run(cli() + " eval --dataset " + fx.dataset.string() + " --embeddings " +
           fx.embeddings.string() + " --checkpoint " + ckpt + " --threshold 0.999999 --output " +
           strict_path.string());
  REQUIRE(rc == 0);
  CHECK(json::parse(slurp(strict_path)).at("recall").get<double>() <= 0.05);

  // predict: gold facts of the overfit example come back first
  auto corpus = synth::make_corpus({.examples = 5,
                                    .vocab = 60,
                                    .dim = 8,
                                    .seed = 109,
                                    .paragraphs = 3,
                                    .min_sentences = 2,
                                    .max_sentences = 3});
  const auto& ex = corpus.examples[0];
  auto pred_path = fx / "pred.json";
  rc = run(cli() + " predict --dataset " + fx.dataset.string() + " --embeddings " +
           fx.embeddings.string() + " --checkpoint " + ckpt + " --id " + ex.id + " --output " +
           pred_path.string());
  REQUIRE(rc == 0);
  auto pred = json::parse(slurp(pred_path));
  REQUIRE(pred.is_array());
  REQUIRE(pred.size() >= ex.gold_facts.size());
  std::set<dgn::SentenceKey> top;
  for (std::size_t i = 0; i < ex.gold_facts.size(); ++i)
    top.insert({pred[i][0].get<std::string>(), pred[i][1].get<std::uint32_t>()});
  CHECK(top == ex.gold_facts);

  // unknown id -> lookup error, exit 2
  rc = run(cli() + " predict --dataset " + fx.dataset.string() + " --embeddings " +
           fx.embeddings.string() + " --checkpoint " + ckpt + " --id nonexistent 2>/dev/null");
  CHECK(rc == 2);

  // mismatched embedding dimension -> configuration error, exit 3
  auto other = synth::make_corpus({.examples = 2, .vocab = 30, .dim = 5, .seed = 1});
  auto other_emb = fx / "other_emb.txt";
  std::ofstream(other_emb) << other.embeddings_text;
  rc = run(cli() + " eval --dataset " + fx.dataset.string() + " --embeddings " +
           other_emb.string() + " --checkpoint " + ckpt + " 2>/dev/null");
  CHECK(rc == 3);
}

TEST_CASE("train twice with the same seed produces identical checkpoints and metrics") {
  Fixture fx({.examples = 4, .vocab = 40, .dim = 6, .seed = 113, .paragraphs = 3}, "determinism");
  std::string flags = " --epochs 3 --seed 7 --precision f64 --self-attn-dim 6 --output-hidden 8";

  auto ckpt1 = (fx / "a.ckpt").string();
  auto ckpt2 = (fx / "b.ckpt").string();
  REQUIRE(run(cli() + " train --dataset " + fx.dataset.string() + " --embeddings " +
              fx.embeddings.string() + " --checkpoint " + ckpt1 + " --log /dev/null" + flags) ==
          0);
  REQUIRE(run(cli() + " train --dataset " + fx.dataset.string() + " --embeddings " +
              fx.embeddings.string() + " --checkpoint " + ckpt2 + " --log /dev/null" + flags) ==
          0);
  CHECK(slurp(ckpt1) == slurp(ckpt2));

  auto m1 = fx / "m1.json";
  auto m2 = fx / "m2.json";
  REQUIRE(run(cli() + " eval --dataset " + fx.dataset.string() + " --embeddings " +
              fx.embeddings.string() + " --checkpoint " + ckpt1 + " --output " + m1.string()) ==
          0);
  REQUIRE(run(cli() + " eval --dataset " + fx.dataset.string() + " --embeddings " +
              fx.embeddings.string() + " --checkpoint " + ckpt2 + " --output " + m2.string()) ==
          0);
  CHECK(slurp(m1) == slurp(m2));
}

TEST_CASE("a JSON config file sets flags and the command line overrides it") {
  Fixture fx({.examples = 3, .vocab = 40, .dim = 5, .seed = 127, .paragraphs = 2}, "config");
  auto config = fx / "run.json";
  std::ofstream(config) << R"({"epochs": 1, "seed": 9, "self-attn-dim": 6, "output-hidden": 8})";

  auto count_epochs = [&](const std::string& extra) {
    auto ckpt = (fx / "c.ckpt").string();
    auto log = (fx / "c.jsonl").string();
    int rc = run(cli() + " train --dataset " + fx.dataset.string() + " --embeddings " +
                 fx.embeddings.string() + " --checkpoint " + ckpt + " --log " + log +
                 " --config " + config.string() + extra);
    REQUIRE(rc == 0);
    std::istringstream in(slurp(log));
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) ++n;
    return n;
  };

  CHECK(count_epochs("") == 1);        // file value applies
  CHECK(count_epochs(" --epochs 2") == 2);  // command line wins
}

TEST_CASE("bad flags exit with the configuration code") {
  CHECK(run(cli() + " train --no-such-flag 2>/dev/null") == 3);
  CHECK(run(cli() + " 2>/dev/null") == 3);  // missing subcommand
}
