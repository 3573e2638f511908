// Copyright 2026 The dtr Authors
// SPDX-License-Identifier: Apache-2.0

// dtr: generate corpora, pretrain, train, evaluate and serve ranking models.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "dtr/checkpoint.hpp"
#include "dtr/config.hpp"
#include "dtr/serving.hpp"
#include "dtr/synthetic.hpp"
#include "dtr/trainer.hpp"

namespace fs = std::filesystem;
using namespace dtr;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void log(const std::string& msg) { std::cerr << "[dtr] " << msg << '\n'; }

RunConfig load(const Globals& g) {
  RunConfig c = g.config.empty() ? RunConfig{} : load_run_config(g.config);
  if (g.seed) c.seed = g.seed;
  if (!c.seed) {
    c.seed = 0;
    log("no --seed given; using seed 0");
  } else {
    log("seed " + std::to_string(*c.seed));
  }
  return c;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

fs::path out_dir(const Globals& g, const char* fallback) { return g.out.empty() ? fs::path(fallback) : fs::path(g.out); }

Dataset load_split(const std::string& dir, const char* name) { return load_dataset(fs::path(dir) / name); }

std::string ranking_json(const std::string& query_id, const std::vector<RankedDoc>& ranking) {
  Json j;
  j["query_id"] = query_id;
  Json docs = Json::array();
  for (const auto& r : ranking) docs.push_back({{"doc_id", r.doc_id}, {"score", r.score}});
  j["ranking"] = std::move(docs);
  return j.dump();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dtr: multi-field deep text ranking"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "JSON run configuration");
  app.add_option("--seed", g.seed, "Seed for every random choice");
  app.add_option("--out", g.out, "Output directory or file");

  // gen ---------------------------------------------------------------------
  auto* gen = app.add_subcommand("gen", "Generate a synthetic clickthrough corpus");
  std::optional<double> gen_noise;
  std::optional<std::size_t> gen_train;
  gen->add_option("--noise", gen_noise, "Fraction of queries whose click is not the best overlap");
  gen->add_option("--train-queries", gen_train, "Training queries");

  // pretrain ----------------------------------------------------------------
  auto* pre = app.add_subcommand("pretrain", "Masked-language-model pretraining of the transformer");
  std::optional<std::size_t> pre_steps;
  std::string pre_corpus;
  pre->add_option("--steps", pre_steps, "Optimizer steps");
  pre->add_option("--corpus", pre_corpus, "Text file, one sentence per line (default: synthetic sentences)");

  // train -------------------------------------------------------------------
  auto* tr = app.add_subcommand("train", "Train a ranking model");
  std::string tr_data, tr_encoder, tr_ltr, tr_interaction, tr_pretrained;
  std::optional<std::size_t> tr_filters, tr_epochs, tr_batch;
  std::optional<double> tr_lr, tr_lr_bert;
  tr->add_option("--data", tr_data, "Directory with train.jsonl and dev.jsonl");
  tr->add_option("--encoder", tr_encoder, "mlp, cnn or bert");
  tr->add_option("--filters", tr_filters, "CNN filter count");
  tr->add_option("--lr", tr_lr, "Learning rate of non-transformer parameters");
  tr->add_option("--lr-bert", tr_lr_bert, "Learning rate of transformer parameters");
  tr->add_option("--epochs", tr_epochs, "Epochs");
  tr->add_option("--batch", tr_batch, "Queries per minibatch");
  tr->add_option("--ltr", tr_ltr, "pointwise, pairwise or listwise");
  tr->add_option("--interaction", tr_interaction, "Comma list of cosine, hadamard, concat");
  tr->add_option("--pretrained", tr_pretrained, "Pretrained transformer checkpoint");

  // eval --------------------------------------------------------------------
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string ev_ckpt, ev_data;
  std::size_t ev_k = 10;
  bool ev_per_query = false;
  ev->add_option("--checkpoint", ev_ckpt, "Model checkpoint")->required();
  ev->add_option("--data", ev_data, "JSON-lines dataset")->required();
  ev->add_option("--k", ev_k, "Cutoff for NDCG and MRR");
  ev->add_flag("--per-query", ev_per_query, "Include per-query rows in the CSV");

  // precompute --------------------------------------------------------------
  auto* pc = app.add_subcommand("precompute", "Build a document embedding store");
  std::string pc_ckpt, pc_data;
  std::int64_t pc_timestamp = 0;
  pc->add_option("--checkpoint", pc_ckpt, "Deep model checkpoint")->required();
  pc->add_option("--data", pc_data, "JSON-lines dataset whose documents are stored")->required();
  pc->add_option("--timestamp", pc_timestamp, "Build timestamp recorded in the header");

  // rank --------------------------------------------------------------------
  auto* rk = app.add_subcommand("rank", "Rank the candidates of each query");
  std::string rk_ckpt, rk_data, rk_store, rk_first;
  std::optional<std::size_t> rk_k;
  rk->add_option("--checkpoint", rk_ckpt, "Deep model checkpoint")->required();
  rk->add_option("--data", rk_data, "JSON-lines queries with candidates")->required();
  rk->add_option("--store", rk_store, "Embedding store (target embeddings are not recomputed)");
  rk->add_option("--first-pass", rk_first, "First-pass checkpoint for two-pass ranking");
  rk->add_option("--k", rk_k, "Documents rescored by the deep model in two-pass mode");

  // bench -------------------------------------------------------------------
  auto* bn = app.add_subcommand("bench", "Latency benchmark");
  std::string bn_ckpt, bn_data, bn_store, bn_first, bn_mode = "all-decoding";
  std::optional<std::size_t> bn_k, bn_requests, bn_candidates, bn_warmup, bn_concurrency;
  bn->add_option("--checkpoint", bn_ckpt, "Deep model checkpoint")->required();
  bn->add_option("--data", bn_data, "JSON-lines dataset providing queries and the document pool")->required();
  bn->add_option("--mode", bn_mode, "all-decoding, two-pass or precompute")
      ->check(CLI::IsMember({"all-decoding", "two-pass", "precompute"}));
  bn->add_option("--store", bn_store, "Embedding store for precompute mode");
  bn->add_option("--first-pass", bn_first, "First-pass checkpoint for two-pass mode");
  bn->add_option("--k", bn_k, "Two-pass cutoff");
  bn->add_option("--requests", bn_requests, "Timed requests");
  bn->add_option("--candidates", bn_candidates, "Candidates per request");
  bn->add_option("--warmup", bn_warmup, "Untimed warmup requests");
  bn->add_option("--concurrency", bn_concurrency, "Concurrent request workers");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) {
      RunConfig c = load(g);
      if (gen_noise) c.synthetic.noise = *gen_noise;
      if (gen_train) c.synthetic.train_queries = *gen_train;
      c.synthetic.validate();
      const fs::path dir = out_dir(g, "data");
      const SyntheticCorpus corpus = generate_synthetic_corpus(c.synthetic, *c.seed);
      write_dataset(corpus.train, dir / "train.jsonl");
      write_dataset(corpus.dev, dir / "dev.jsonl");
      write_dataset(corpus.test, dir / "test.jsonl");
      log("wrote " + std::to_string(corpus.train.size()) + "/" + std::to_string(corpus.dev.size()) + "/" +
          std::to_string(corpus.test.size()) + " queries to " + dir.string());
    } else if (pre->parsed()) {
      RunConfig c = load(g);
      if (pre_steps) c.pretrain.steps = *pre_steps;
      c.pretrain.seed = *c.seed;
      std::vector<std::string> corpus;
      if (!pre_corpus.empty()) {
        std::ifstream in(pre_corpus);
        if (!in) throw DataError("cannot open corpus " + pre_corpus);
        for (std::string line; std::getline(in, line);)
          if (!line.empty()) corpus.push_back(line);
      } else {
        corpus = generate_pretraining_corpus(c.synthetic, c.pretrain_sentences, *c.seed);
      }
      MlmModel mlm(c.model.transformer, learn_subword_vocab(corpus, c.model.subword_merges), *c.seed);
      const fs::path dir = out_dir(g, "pretrain");
      fs::create_directories(dir);
      std::ofstream curve(dir / "mlm_loss.csv");
      curve << "step,loss\n";
      const PretrainResult r = pretrain_mlm(mlm, corpus, c.pretrain, [&](std::size_t step, double loss) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%zu,%.17g\n", step, loss);
        curve << buf;
      });
      save_mlm_checkpoint(mlm, dir / "pretrained.dtxt");
      if (!r.losses.empty())
        log("pretrained " + std::to_string(r.losses.size()) + " steps, final loss " + std::to_string(r.losses.back()));
      log("wrote " + (dir / "pretrained.dtxt").string());
    } else if (tr->parsed()) {
      RunConfig c = load(g);
      if (!tr_encoder.empty()) c.model.encoder = parse_encoder_kind(tr_encoder);
      if (tr_filters) c.model.cnn.filters = *tr_filters;
      if (!tr_interaction.empty()) c.model.interaction = InteractionConfig::parse(tr_interaction);
      if (tr_lr) c.train.lr_other = *tr_lr;
      if (tr_lr_bert) c.train.lr_bert = *tr_lr_bert;
      if (tr_epochs) c.train.epochs = *tr_epochs;
      if (tr_batch) c.train.batch_queries = *tr_batch;
      if (!tr_ltr.empty()) c.train.ltr.mode = parse_ltr_mode(tr_ltr);
      if (!tr_pretrained.empty()) c.pretrained = tr_pretrained;
      if (!tr_data.empty()) c.data_dir = tr_data;
      if (c.data_dir.empty()) c.data_dir = "data";
      c.train.seed = *c.seed;
      c.model.validate();
      c.train.validate();
      const Dataset train_set = load_split(c.data_dir, "train.jsonl");
      const Dataset dev_set = load_split(c.data_dir, "dev.jsonl");
      std::unique_ptr<MlmModel> mlm;
      if (!c.pretrained.empty()) {
        if (c.model.encoder != EncoderKind::kBert) throw ConfigError("--pretrained needs the bert encoder");
        mlm = load_mlm_checkpoint(c.pretrained);
        c.model.transformer = mlm->config;
      }
      Vocabularies vocab = mlm ? Vocabularies{WordVocabulary(), mlm->vocab} : build_vocabularies(c.model, train_set);
      Model<float> model(c.model, std::move(vocab), *c.seed);
      if (mlm) log("initialized " + std::to_string(model.copy_matching_from(mlm->store)) + " tensors from " + c.pretrained);
      log("encoder=" + to_string(c.model.encoder) + " ltr=" + to_string(c.train.ltr.mode) +
          " lr=" + std::to_string(c.train.lr_other) + " lr_bert=" + std::to_string(c.train.lr_bert) +
          " epochs=" + std::to_string(c.train.epochs) + " batch=" + std::to_string(c.train.batch_queries));
      const TrainResult r = train(model, train_set, dev_set, c.train, [](const TrainLogRow& row) {
        if (row.dev_ndcg10)
          log("step " + std::to_string(row.step) + " epoch " + std::to_string(row.epoch) +
              " loss " + std::to_string(row.loss) + " dev_ndcg10 " + std::to_string(*row.dev_ndcg10));
      });
      const fs::path dir = out_dir(g, "run");
      save_checkpoint(model, dir / "model.dtxt");
      write_text(dir / "train_log.csv", r.log_csv());
      write_text(dir / "run_config.json", to_json(c).dump(2) + "\n");
      log("best dev ndcg@10 " + std::to_string(r.best_dev_ndcg) + " at step " + std::to_string(r.best_step));
      log("wrote " + (dir / "model.dtxt").string());
    } else if (ev->parsed()) {
      const auto model = load_checkpoint(ev_ckpt);
      const EvalReport report = evaluate(*model, load_dataset(ev_data), ev_k, ev_per_query);
      std::cout << report.to_table();
      if (!g.out.empty()) {
        write_text(fs::path(g.out) / "eval.csv", report.to_csv(ev_per_query));
        write_text(fs::path(g.out) / "eval.json", report.to_json() + "\n");
      }
    } else if (pc->parsed()) {
      const auto model = load_checkpoint(pc_ckpt);
      const std::vector<Document> docs = unique_documents(load_dataset(pc_data));
      const fs::path path = g.out.empty() ? fs::path("store.dtes") : fs::path(g.out);
      precompute_embeddings(*model, model_fingerprint(*model), docs, path, pc_timestamp);
      log("stored " + std::to_string(docs.size()) + " documents in " + path.string());
    } else if (rk->parsed()) {
      const auto model = load_checkpoint(rk_ckpt);
      const Dataset queries = load_dataset(rk_data);
      std::shared_ptr<const EmbeddingStore> store;
      if (!rk_store.empty()) store = EmbeddingStore::open(rk_store);
      std::unique_ptr<Model<float>> first;
      if (!rk_first.empty()) first = load_checkpoint(rk_first);
      const RunConfig c = g.config.empty() ? RunConfig{} : load_run_config(g.config);
      const std::size_t k = rk_k.value_or(c.serving.two_pass_k);
      const std::uint64_t fp = model_fingerprint(*model);
      std::ostringstream os;
      for (const auto& q : queries) {
        std::vector<RankedDoc> ranking;
        if (first) ranking = two_pass_rank(*first, *model, q, k).ranking;
        else if (store) ranking = rank_with_store(*model, fp, q, *store);
        else ranking = rank_all_decoding(*model, q);
        os << ranking_json(q.query_id, ranking) << '\n';
      }
      if (g.out.empty()) std::cout << os.str();
      else write_text(g.out, os.str());
    } else if (bn->parsed()) {
      RunConfig c = load(g);
      if (bn_k) c.serving.two_pass_k = *bn_k;
      if (bn_requests) c.serving.requests = *bn_requests;
      if (bn_candidates) c.serving.candidates = *bn_candidates;
      if (bn_warmup) c.serving.warmup = *bn_warmup;
      if (bn_concurrency) c.serving.concurrency = *bn_concurrency;
      const auto model = load_checkpoint(bn_ckpt);
      const Dataset data = load_dataset(bn_data);
      const std::vector<Document> pool = unique_documents(data);
      const auto workload = make_bench_workload(data, pool, c.serving.requests, c.serving.candidates, *c.seed);
      std::function<void(const RankingExample&)> request;
      std::unique_ptr<Model<float>> first;
      std::shared_ptr<const EmbeddingStore> store;
      const std::uint64_t fp = model_fingerprint(*model);
      if (bn_mode == "two-pass") {
        if (bn_first.empty()) throw ConfigError("two-pass mode needs --first-pass");
        first = load_checkpoint(bn_first);
        request = [&](const RankingExample& q) { two_pass_rank(*first, *model, q, c.serving.two_pass_k); };
      } else if (bn_mode == "precompute") {
        if (bn_store.empty()) throw ConfigError("precompute mode needs --store");
        store = EmbeddingStore::open(bn_store);
        request = [&](const RankingExample& q) { rank_with_store(*model, fp, q, *store); };
      } else {
        request = [&](const RankingExample& q) { rank_all_decoding(*model, q); };
      }
      const LatencyReport report =
          latency_bench(workload, bn_mode, request, {c.serving.warmup, 1, c.serving.concurrency});
      std::cerr << report.to_table();
      if (g.out.empty()) std::cout << report.to_json() << '\n';
      else write_text(g.out, report.to_json() + "\n");
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
  return 0;
}
