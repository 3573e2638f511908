// Copyright 2026 The dtr Authors
// SPDX-License-Identifier: Apache-2.0

#include "dtr/config.hpp"

#include <fstream>
#include <set>

#include "dtr/error.hpp"

namespace dtr {

namespace {

// Reads known keys out of one JSON object and rejects the rest.
class Reader {
 public:
  Reader(const Json& j, std::string section) : j_(j), section_(std::move(section)) {
    if (!j_.is_object()) throw ConfigError(where() + "expected an object");
  }

  template <typename V>
  void get(const char* key, V& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      if constexpr (std::is_same_v<V, bool>) {
        if (!it->is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_unsigned_v<V>) {
        if (!it->is_number_unsigned()) throw ConfigError("");
      } else if constexpr (std::is_floating_point_v<V>) {
        if (!it->is_number()) throw ConfigError("");
      } else if constexpr (std::is_same_v<V, std::string>) {
        if (!it->is_string()) throw ConfigError("");
      }
      out = it->template get<V>();
    } catch (const std::exception&) {
      throw ConfigError(where() + "key '" + key + "' has the wrong type");
    }
  }

  const Json* object(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.contains(it.key())) throw ConfigError(where() + "unknown key '" + it.key() + "'");
  }

  std::string sub(const char* key) const { return section_.empty() ? key : section_ + "." + key; }

 private:
  std::string where() const { return "config" + (section_.empty() ? std::string() : " [" + section_ + "]") + ": "; }
  const Json& j_;
  std::string section_;
  std::set<std::string> seen_;
};

}  // namespace

Json to_json(const ModelSpec& s) {
  Json j;
  j["encoder"] = to_string(s.encoder);
  j["source_fields"] = s.source_fields;
  j["target_fields"] = s.target_fields;
  j["num_features"] = s.num_features;
  j["use_features"] = s.use_features;
  j["normalize_features"] = s.normalize_features;
  j["rescale_features"] = s.rescale_features;
  j["interaction"] = s.interaction.to_string();
  j["hidden"] = s.hidden;
  j["cnn"] = {{"embedding_dim", s.cnn.embedding_dim}, {"filters", s.cnn.filters}, {"window", s.cnn.window}};
  j["transformer"] = {{"layers", s.transformer.layers},
                      {"hidden", s.transformer.hidden},
                      {"heads", s.transformer.heads},
                      {"max_len", s.transformer.max_len}};
  j["source_max_len"] = s.source_max_len;
  j["target_max_len"] = s.target_max_len;
  j["word_min_count"] = s.word_min_count;
  j["subword_merges"] = s.subword_merges;
  return j;
}

ModelSpec model_spec_from_json(const Json& j) {
  ModelSpec s;
  Reader r(j, "model");
  std::string encoder = to_string(s.encoder), interaction = s.interaction.to_string();
  r.get("encoder", encoder);
  s.encoder = parse_encoder_kind(encoder);
  r.get("source_fields", s.source_fields);
  r.get("target_fields", s.target_fields);
  r.get("num_features", s.num_features);
  r.get("use_features", s.use_features);
  r.get("normalize_features", s.normalize_features);
  r.get("rescale_features", s.rescale_features);
  r.get("interaction", interaction);
  s.interaction = InteractionConfig::parse(interaction);
  r.get("hidden", s.hidden);
  if (const Json* c = r.object("cnn")) {
    Reader rc(*c, r.sub("cnn"));
    rc.get("embedding_dim", s.cnn.embedding_dim);
    rc.get("filters", s.cnn.filters);
    rc.get("window", s.cnn.window);
    rc.finish();
  }
  if (const Json* t = r.object("transformer")) {
    Reader rt(*t, r.sub("transformer"));
    rt.get("layers", s.transformer.layers);
    rt.get("hidden", s.transformer.hidden);
    rt.get("heads", s.transformer.heads);
    rt.get("max_len", s.transformer.max_len);
    rt.finish();
  }
  r.get("source_max_len", s.source_max_len);
  r.get("target_max_len", s.target_max_len);
  r.get("word_min_count", s.word_min_count);
  r.get("subword_merges", s.subword_merges);
  r.finish();
  s.validate();
  return s;
}

Json to_json(const TrainConfig& c) {
  Json j;
  j["epochs"] = c.epochs;
  j["batch_queries"] = c.batch_queries;
  j["lr_other"] = c.lr_other;
  j["lr_bert"] = c.lr_bert;
  j["ltr"] = to_string(c.ltr.mode);
  j["lambda_rank"] = c.ltr.lambda_rank;
  j["seed"] = c.seed;
  j["eval_every"] = c.eval_every;
  j["eval_k"] = c.eval_k;
  j["fit_features"] = c.fit_features;
  return j;
}

TrainConfig train_config_from_json(const Json& j) {
  TrainConfig c;
  Reader r(j, "train");
  std::string mode = to_string(c.ltr.mode);
  r.get("epochs", c.epochs);
  r.get("batch_queries", c.batch_queries);
  r.get("lr_other", c.lr_other);
  r.get("lr_bert", c.lr_bert);
  r.get("ltr", mode);
  c.ltr.mode = parse_ltr_mode(mode);
  r.get("lambda_rank", c.ltr.lambda_rank);
  r.get("seed", c.seed);
  r.get("eval_every", c.eval_every);
  r.get("eval_k", c.eval_k);
  r.get("fit_features", c.fit_features);
  r.finish();
  c.validate();
  return c;
}

Json to_json(const SyntheticSpec& s) {
  Json j;
  j["vocab_size"] = s.vocab_size;
  j["num_topics"] = s.num_topics;
  j["train_queries"] = s.train_queries;
  j["dev_queries"] = s.dev_queries;
  j["test_queries"] = s.test_queries;
  j["docs_per_query"] = s.docs_per_query;
  j["source_fields"] = s.source_fields;
  j["target_fields"] = s.target_fields;
  j["num_features"] = s.num_features;
  j["noise"] = s.noise;
  j["query_terms_min"] = s.query_terms_min;
  j["query_terms_max"] = s.query_terms_max;
  j["field_words_min"] = s.field_words_min;
  j["field_words_max"] = s.field_words_max;
  j["topic_coherence"] = s.topic_coherence;
  j["feature_noise"] = s.feature_noise;
  return j;
}

SyntheticSpec synthetic_spec_from_json(const Json& j) {
  SyntheticSpec s;
  Reader r(j, "synthetic");
  r.get("vocab_size", s.vocab_size);
  r.get("num_topics", s.num_topics);
  r.get("train_queries", s.train_queries);
  r.get("dev_queries", s.dev_queries);
  r.get("test_queries", s.test_queries);
  r.get("docs_per_query", s.docs_per_query);
  r.get("source_fields", s.source_fields);
  r.get("target_fields", s.target_fields);
  r.get("num_features", s.num_features);
  r.get("noise", s.noise);
  r.get("query_terms_min", s.query_terms_min);
  r.get("query_terms_max", s.query_terms_max);
  r.get("field_words_min", s.field_words_min);
  r.get("field_words_max", s.field_words_max);
  r.get("topic_coherence", s.topic_coherence);
  r.get("feature_noise", s.feature_noise);
  r.finish();
  s.validate();
  return s;
}

Json to_json(const PretrainConfig& c) {
  Json j;
  j["steps"] = c.steps;
  j["batch_sentences"] = c.batch_sentences;
  j["lr"] = c.lr;
  j["mask_prob"] = c.mask_prob;
  j["seed"] = c.seed;
  return j;
}

PretrainConfig pretrain_config_from_json(const Json& j) {
  PretrainConfig c;
  Reader r(j, "pretrain");
  r.get("steps", c.steps);
  r.get("batch_sentences", c.batch_sentences);
  r.get("lr", c.lr);
  r.get("mask_prob", c.mask_prob);
  r.get("seed", c.seed);
  r.finish();
  if (c.batch_sentences == 0) throw ConfigError("config [pretrain]: batch_sentences must be at least 1");
  if (!(c.mask_prob > 0.0 && c.mask_prob < 1.0)) throw ConfigError("config [pretrain]: mask_prob must be in (0, 1)");
  if (!(c.lr >= 0.0)) throw ConfigError("config [pretrain]: lr must be non-negative");
  return c;
}

Json to_json(const ServingConfig& c) {
  Json j;
  j["two_pass_k"] = c.two_pass_k;
  j["warmup"] = c.warmup;
  j["requests"] = c.requests;
  j["candidates"] = c.candidates;
  j["concurrency"] = c.concurrency;
  return j;
}

ServingConfig serving_config_from_json(const Json& j) {
  ServingConfig c;
  Reader r(j, "serving");
  r.get("two_pass_k", c.two_pass_k);
  r.get("warmup", c.warmup);
  r.get("requests", c.requests);
  r.get("candidates", c.candidates);
  r.get("concurrency", c.concurrency);
  r.finish();
  if (c.requests == 0 || c.candidates == 0 || c.concurrency == 0)
    throw ConfigError("config [serving]: requests, candidates and concurrency must be positive");
  return c;
}

Json to_json(const RunConfig& c) {
  Json j;
  if (c.seed) j["seed"] = *c.seed;
  j["data_dir"] = c.data_dir;
  j["pretrained"] = c.pretrained;
  j["pretrain_sentences"] = c.pretrain_sentences;
  j["synthetic"] = to_json(c.synthetic);
  j["model"] = to_json(c.model);
  j["train"] = to_json(c.train);
  j["pretrain"] = to_json(c.pretrain);
  j["serving"] = to_json(c.serving);
  return j;
}

RunConfig run_config_from_json(const Json& j) {
  RunConfig c;
  Reader r(j, "");
  std::uint64_t seed = 0;
  if (j.contains("seed")) {
    r.get("seed", seed);
    c.seed = seed;
  } else {
    r.get("seed", seed);
  }
  r.get("data_dir", c.data_dir);
  r.get("pretrained", c.pretrained);
  r.get("pretrain_sentences", c.pretrain_sentences);
  if (const Json* s = r.object("synthetic")) c.synthetic = synthetic_spec_from_json(*s);
  if (const Json* s = r.object("model")) c.model = model_spec_from_json(*s);
  if (const Json* s = r.object("train")) c.train = train_config_from_json(*s);
  if (const Json* s = r.object("pretrain")) c.pretrain = pretrain_config_from_json(*s);
  if (const Json* s = r.object("serving")) c.serving = serving_config_from_json(*s);
  r.finish();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

}  // namespace dtr
