// Copyright 2026 The dtr Authors
// SPDX-License-Identifier: Apache-2.0

#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "dtr/checkpoint.hpp"
#include "dtr/config.hpp"
#include "dtr/serving.hpp"
#include "dtr/synthetic.hpp"
#include "dtr/trainer.hpp"

namespace py = pybind11;
using namespace dtr;

namespace {

std::pair<double, std::vector<double>> as_pair(const LossValue& v) { return {v.loss, v.grad}; }

}  // namespace

PYBIND11_MODULE(_dtr, m) {
  m.doc() = "Multi-field deep text ranking: encoders, learning-to-rank and serving";

  py::register_exception<Error>(m, "Error");
  py::register_exception<ConfigError>(m, "ConfigError", m.attr("Error"));
  py::register_exception<DataError>(m, "DataError", m.attr("Error"));
  py::register_exception<ShapeError>(m, "ShapeError", m.attr("Error"));

  // Text --------------------------------------------------------------------
  m.def("tokenize_words", &tokenize_words, py::arg("text"));
  py::class_<WordVocabulary>(m, "WordVocabulary")
      .def(py::init<>())
      .def(py::init<std::vector<std::string>>(), py::arg("tokens"))
      .def("id", &WordVocabulary::id)
      .def("token", &WordVocabulary::token)
      .def("encode", &WordVocabulary::encode, py::arg("text"), py::arg("max_len") = 0)
      .def("regular_tokens", &WordVocabulary::regular_tokens)
      .def("__len__", &WordVocabulary::size)
      .def("__eq__", &WordVocabulary::operator==);
  py::class_<SubwordVocabulary>(m, "SubwordVocabulary")
      .def(py::init<>())
      .def(py::init<std::vector<std::string>>(), py::arg("units"))
      .def("id", &SubwordVocabulary::id)
      .def("token", &SubwordVocabulary::token)
      .def("contains", &SubwordVocabulary::contains)
      .def("regular_tokens", &SubwordVocabulary::regular_tokens)
      .def("__len__", &SubwordVocabulary::size);
  m.def("build_word_vocab", [](const std::vector<std::string>& corpus, std::size_t min_count) {
    return build_word_vocab(corpus, min_count);
  }, py::arg("corpus"), py::arg("min_count") = 1);
  m.def("learn_subword_vocab", [](const std::vector<std::string>& corpus, std::size_t num_merges) {
    return learn_subword_vocab(corpus, num_merges);
  }, py::arg("corpus"), py::arg("num_merges"));
  m.def("tokenize_subwords", &tokenize_subwords, py::arg("text"), py::arg("vocab"), py::arg("max_len") = 0);

  // Data --------------------------------------------------------------------
  py::class_<FieldText>(m, "FieldText")
      .def(py::init<std::string, std::string>(), py::arg("field_name"), py::arg("text"))
      .def_readwrite("field_name", &FieldText::field_name)
      .def_readwrite("text", &FieldText::text);
  py::class_<Document>(m, "Document")
      .def(py::init<>())
      .def_readwrite("doc_id", &Document::doc_id)
      .def_readwrite("target_fields", &Document::target_fields)
      .def_readwrite("traditional_features", &Document::traditional_features)
      .def_readwrite("label", &Document::label);
  py::class_<RankingExample>(m, "RankingExample")
      .def(py::init<>())
      .def_readwrite("query_id", &RankingExample::query_id)
      .def_readwrite("source_fields", &RankingExample::source_fields)
      .def_readwrite("documents", &RankingExample::documents)
      .def("to_json", &example_to_json_line)
      .def_static("from_json", &example_from_json_line)
      .def("__eq__", &RankingExample::operator==);
  m.def("load_dataset", [](const std::filesystem::path& p) { return load_dataset(p); }, py::arg("path"));
  m.def("write_dataset", [](const Dataset& d, const std::filesystem::path& p) { write_dataset(d, p); },
        py::arg("dataset"), py::arg("path"));
  m.def("generate_synthetic_corpus", [](const std::string& spec_json, std::uint64_t seed) {
    const SyntheticSpec spec = synthetic_spec_from_json(Json::parse(spec_json.empty() ? "{}" : spec_json));
    SyntheticCorpus c = generate_synthetic_corpus(spec, seed);
    return py::make_tuple(c.train, c.dev, c.test);
  }, py::arg("spec_json") = "{}", py::arg("seed") = 0);

  // Pure functions ----------------------------------------------------------
  m.def("cosine_sim", [](const std::vector<float>& u, const std::vector<float>& v) { return cosine_sim(u, v); });
  m.def("hadamard", [](const std::vector<float>& u, const std::vector<float>& v) { return hadamard(u, v); });
  m.def("assemble_deep_features", [](const std::vector<std::vector<float>>& s, const std::vector<std::vector<float>>& t,
                                     const std::string& methods) {
    return assemble_deep_features(s, t, InteractionConfig::parse(methods));
  }, py::arg("sources"), py::arg("targets"), py::arg("methods") = "cosine,hadamard");
  m.def("fit_standardizer", [](const std::vector<std::vector<double>>& rows) {
    Standardizer s = fit_standardizer(std::span<const std::vector<double>>(rows));
    return py::make_tuple(s.mean, s.std);
  });
  m.def("process_features", [](const std::vector<double>& x, const std::vector<double>& mean,
                               const std::vector<double>& std, const std::vector<double>& w,
                               const std::vector<double>& b) { return process_features(x, {mean, std}, w, b); });
  m.def("ndcg_at_k", [](const std::vector<double>& s, const std::vector<double>& l, std::size_t k) {
    return ndcg_at_k(s, l, k);
  }, py::arg("scores"), py::arg("labels"), py::arg("k") = 10);
  m.def("mrr_at_k", [](const std::vector<double>& s, const std::vector<double>& l, std::size_t k) {
    return mrr_at_k(s, l, k);
  }, py::arg("scores"), py::arg("labels"), py::arg("k") = 10);
  m.def("auc", [](const std::vector<double>& s, const std::vector<double>& l) { return auc(s, l); });
  m.def("pointwise_loss", [](const std::vector<double>& s, const std::vector<double>& l) {
    return as_pair(pointwise_loss(s, l));
  });
  m.def("pairwise_loss", [](const std::vector<double>& s, const std::vector<double>& l, bool lambda_rank) {
    return as_pair(pairwise_loss(s, l, lambda_rank));
  }, py::arg("scores"), py::arg("labels"), py::arg("lambda_rank") = false);
  m.def("listwise_loss", [](const std::vector<double>& s, const std::vector<double>& l) {
    return as_pair(listwise_loss(s, l));
  });
  m.def("lambda_weights", [](const std::vector<double>& s, const std::vector<double>& l) {
    return lambda_weights(s, l);
  });

  // Models ------------------------------------------------------------------
  py::class_<Model<float>>(m, "Model")
      .def_static("load", [](const std::filesystem::path& p) { return load_checkpoint(p); }, py::arg("path"))
      .def("save", [](const Model<float>& model, const std::filesystem::path& p) { save_checkpoint(model, p); })
      .def("score", [](const Model<float>& model, const RankingExample& ex) { return model.score(ex); })
      .def("fingerprint", &model_fingerprint)
      .def("evaluate", [](const Model<float>& model, const Dataset& d, std::size_t k) {
        const EvalReport r = evaluate(model, d, k);
        py::dict out;
        out["ndcg"] = r.ndcg;
        out["mrr"] = r.mrr;
        out["auc"] = r.auc ? py::cast(*r.auc) : py::none();
        out["queries"] = r.queries;
        return out;
      }, py::arg("dataset"), py::arg("k") = 10)
      .def_property_readonly("spec_json", [](const Model<float>& model) { return to_json(model.spec()).dump(); })
      .def_property_readonly("num_parameters", [](const Model<float>& model) { return model.parameters().size(); });

  m.def("train_model", [](const std::string& config_json, const Dataset& train_set, const Dataset& dev_set) {
    const RunConfig c = run_config_from_json(Json::parse(config_json.empty() ? "{}" : config_json));
    TrainConfig tc = c.train;
    if (c.seed) tc.seed = *c.seed;
    auto model = std::make_unique<Model<float>>(c.model, build_vocabularies(c.model, train_set), tc.seed);
    TrainResult r;
    {
      py::gil_scoped_release release;
      r = train(*model, train_set, dev_set, tc);
    }
    return py::make_tuple(std::move(model), r.log_csv(), r.best_dev_ndcg);
  }, py::arg("config_json"), py::arg("train"), py::arg("dev"));

  // Serving -----------------------------------------------------------------
  py::class_<EmbeddingStore, std::shared_ptr<EmbeddingStore>>(m, "EmbeddingStore")
      .def_static("open", [](const std::filesystem::path& p) {
        return std::const_pointer_cast<EmbeddingStore>(EmbeddingStore::open(p));
      })
      .def("lookup", [](const EmbeddingStore& s, const std::string& id) -> std::optional<std::vector<std::vector<float>>> {
        auto e = s.lookup(id);
        if (!e) return std::nullopt;
        std::vector<std::vector<float>> out;
        for (auto& mtx : *e) out.push_back(mtx.data);
        return out;
      })
      .def("ids", &EmbeddingStore::ids)
      .def_property_readonly("fingerprint", &EmbeddingStore::fingerprint)
      .def_property_readonly("dim", &EmbeddingStore::dim)
      .def("__len__", &EmbeddingStore::size);
  m.def("precompute_embeddings", [](const Model<float>& model, const Dataset& data, const std::filesystem::path& p,
                                    std::int64_t timestamp) {
    const auto docs = unique_documents(data);
    precompute_embeddings(model, model_fingerprint(model), docs, p, timestamp);
  }, py::arg("model"), py::arg("dataset"), py::arg("path"), py::arg("timestamp") = 0);
  auto ranked = [](const std::vector<RankedDoc>& r) {
    std::vector<std::pair<std::string, double>> out;
    for (const auto& d : r) out.emplace_back(d.doc_id, d.score);
    return out;
  };
  m.def("rank_all_decoding", [ranked](const Model<float>& model, const RankingExample& q) {
    return ranked(rank_all_decoding(model, q));
  });
  m.def("rank_with_store", [ranked](const Model<float>& model, const RankingExample& q, const EmbeddingStore& s) {
    return ranked(rank_with_store(model, model_fingerprint(model), q, s));
  });
  m.def("two_pass_rank", [ranked](const Model<float>& first, const Model<float>& deep, const RankingExample& q,
                                  std::size_t k) { return ranked(two_pass_rank(first, deep, q, k).ranking); },
        py::arg("first_pass"), py::arg("deep"), py::arg("query"), py::arg("k") = 300);
}
