// Copyright 2026 The dtr Authors
// SPDX-License-Identifier: Apache-2.0

#include "dtr/model.hpp"

#include <set>

#include "dtr/error.hpp"

namespace dtr {

std::string to_string(EncoderKind kind) {
  switch (kind) {
    case EncoderKind::kMlp: return "mlp";
    case EncoderKind::kCnn: return "cnn";
    case EncoderKind::kBert: return "bert";
  }
  return "?";
}

EncoderKind parse_encoder_kind(const std::string& name) {
  if (name == "mlp") return EncoderKind::kMlp;
  if (name == "cnn") return EncoderKind::kCnn;
  if (name == "bert" || name == "libert") return EncoderKind::kBert;
  throw ConfigError("unknown encoder '" + name + "' (expected mlp, cnn or bert)");
}

void ModelSpec::validate() const {
  if (hidden == 0) throw ConfigError("model: hidden width must be positive");
  if (deep()) {
    interaction.validate();
    if (source_fields.empty() || target_fields.empty())
      throw ConfigError("model: deep encoders need at least one source and one target field");
    for (const auto* fields : {&source_fields, &target_fields}) {
      std::set<std::string> seen;
      for (const auto& f : *fields) {
        if (f.empty()) throw ConfigError("model: empty field name");
        if (!seen.insert(f).second) throw ConfigError("model: duplicate field name '" + f + "'");
      }
    }
    if (source_max_len == 0 || target_max_len == 0) throw ConfigError("model: max lengths must be positive");
  }
  if (encoder == EncoderKind::kCnn && (cnn.embedding_dim == 0 || cnn.filters == 0 || cnn.window == 0))
    throw ConfigError("model: cnn dimensions must be positive");
  if (encoder == EncoderKind::kBert) {
    transformer.validate();
    if (source_max_len < 2 || target_max_len < 2) throw ConfigError("model: subword max lengths must be at least 2");
    if (std::max(source_max_len, target_max_len) > transformer.max_len)
      throw ConfigError("model: field max length exceeds the transformer's position table");
  }
  if (use_features && num_features == 0) throw ConfigError("model: use_features requires num_features > 0");
  if (!use_features && !deep()) throw ConfigError("model: the mlp encoder needs traditional features");
}

std::size_t ModelSpec::embedding_dim() const {
  switch (encoder) {
    case EncoderKind::kMlp: return 0;
    case EncoderKind::kCnn: return cnn.filters;
    case EncoderKind::kBert: return transformer.hidden;
  }
  return 0;
}

std::size_t ModelSpec::deep_feature_dim() const {
  if (!deep()) return 0;
  return interaction.output_dim(source_fields.size(), target_fields.size(), embedding_dim());
}

std::size_t ModelSpec::head_input_dim() const { return deep_feature_dim() + (use_features ? num_features : 0); }

Vocabularies build_vocabularies(const ModelSpec& spec, const Dataset& data, std::span<const std::string> subword_corpus) {
  Vocabularies v;
  if (spec.encoder == EncoderKind::kCnn) {
    const auto texts = collect_texts(data);
    v.words = build_word_vocab(texts, spec.word_min_count);
  } else if (spec.encoder == EncoderKind::kBert) {
    if (subword_corpus.empty()) {
      const auto texts = collect_texts(data);
      v.subwords = learn_subword_vocab(texts, spec.subword_merges);
    } else {
      v.subwords = learn_subword_vocab(subword_corpus, spec.subword_merges);
    }
  }
  return v;
}

template <typename T>
Model<T>::Model(const ModelSpec& spec, Vocabularies vocab, std::uint64_t seed)
    : spec_(spec), vocab_(std::move(vocab)), seed_(seed) {
  spec_.validate();
  Rng rng(seed);
  if (spec_.encoder == EncoderKind::kCnn) {
    word_embedding_ = &store_.add("embedding/words", {vocab_.words.size(), spec_.cnn.embedding_dim}, ParamGroup::kOther);
    init::uniform(*word_embedding_, rng, 0.05);
    for (const auto& f : spec_.source_fields)
      cnn_sources_.push_back(std::make_unique<CnnEncoder<T>>(store_, "cnn/source/" + f, *word_embedding_, spec_.cnn, rng));
    for (const auto& f : spec_.target_fields)
      cnn_targets_.push_back(std::make_unique<CnnEncoder<T>>(store_, "cnn/target/" + f, *word_embedding_, spec_.cnn, rng));
  } else if (spec_.encoder == EncoderKind::kBert) {
    bert_ = std::make_unique<TransformerEncoder<T>>(store_, "bert", spec_.transformer, vocab_.subwords.size(), rng);
  }
  if (spec_.use_features)
    features_ = std::make_unique<FeatureProcessor<T>>(store_, spec_.num_features, spec_.normalize_features,
                                                      spec_.rescale_features);
  const std::size_t in = spec_.head_input_dim();
  hidden_kernel_ = &store_.add("scoring/hidden_kernel", {in, spec_.hidden}, ParamGroup::kOther);
  hidden_bias_ = &store_.add("scoring/hidden_bias", {spec_.hidden}, ParamGroup::kOther);
  output_kernel_ = &store_.add("scoring/output_kernel", {spec_.hidden, 1}, ParamGroup::kOther);
  output_bias_ = &store_.add("scoring/output_bias", {1}, ParamGroup::kOther);
  init::glorot(*hidden_kernel_, rng);
  init::glorot(*output_kernel_, rng);
  source_calls_ = std::make_unique<std::atomic<std::uint64_t>[]>(spec_.source_fields.size());
}

template <typename T>
std::size_t Model<T>::copy_matching_from(const ParameterStore<T>& other) {
  std::size_t copied = 0;
  for (std::size_t i = 0; i < other.size(); ++i) {
    const Parameter<T>& src = other[i];
    Parameter<T>* dst = store_.find(src.name);
    if (dst == nullptr) continue;
    if (!dst->value.same_shape(src.value)) throw ShapeError("copy: shape mismatch at " + src.name);
    dst->value.data = src.value.data;
    ++copied;
  }
  return copied;
}

template <typename T>
std::vector<TokenId> Model<T>::tokenize(const std::string& text, bool source) const {
  const std::size_t max_len = source ? spec_.source_max_len : spec_.target_max_len;
  switch (spec_.encoder) {
    case EncoderKind::kCnn: {
      // Fixed-length word sequence: empty or short fields are PAD-filled.
      auto ids = vocab_.words.encode(text, max_len);
      if (ids.empty()) ids.push_back(WordVocabulary::kPad);
      return ids;
    }
    case EncoderKind::kBert: return tokenize_subwords(text, vocab_.subwords, max_len);
    case EncoderKind::kMlp: return {};
  }
  return {};
}

namespace {
const std::string& field_text(const std::vector<FieldText>& fields, const std::string& name, const std::string& where) {
  for (const auto& f : fields)
    if (f.field_name == name) return f.text;
  throw DataError(where + ": missing field '" + name + "'");
}
}  // namespace

template <typename T>
PreparedExample<T> Model<T>::prepare(const RankingExample& example, bool targets) const {
  PreparedExample<T> ex;
  const std::size_t n = example.documents.size();
  if (spec_.deep()) {
    for (const auto& f : spec_.source_fields)
      ex.sources.push_back(tokenize(field_text(example.source_fields, f, "query " + example.query_id), true));
    if (targets) {
      ex.targets.reserve(n);
      for (const auto& d : example.documents) {
        std::vector<std::vector<TokenId>> fields;
        for (const auto& f : spec_.target_fields)
          fields.push_back(tokenize(field_text(d.target_fields, f, "document " + d.doc_id), false));
        ex.targets.push_back(std::move(fields));
      }
    }
  }
  ex.features = Matrix<T>(n, spec_.use_features ? spec_.num_features : 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& d = example.documents[i];
    if (spec_.use_features) {
      if (d.traditional_features.size() != spec_.num_features)
        throw DataError("document " + d.doc_id + ": expected " + std::to_string(spec_.num_features) +
                        " traditional features, got " + std::to_string(d.traditional_features.size()));
      for (std::size_t c = 0; c < spec_.num_features; ++c) ex.features(i, c) = static_cast<T>(d.traditional_features[c]);
    }
    ex.labels.push_back(d.label);
  }
  return ex;
}

template <typename T>
Var Model<T>::encode_field(Tape<T>& tape, std::span<const TokenId> ids, std::size_t field, bool source) const {
  switch (spec_.encoder) {
    case EncoderKind::kCnn: return (source ? cnn_sources_ : cnn_targets_).at(field)->encode(tape, ids);
    case EncoderKind::kBert: return bert_->encode(tape, ids);
    case EncoderKind::kMlp: break;
  }
  throw ConfigError("the mlp model has no text encoders");
}

template <typename T>
std::vector<Var> Model<T>::encode_sources(Tape<T>& tape, const PreparedExample<T>& ex) const {
  std::vector<Var> out;
  if (!spec_.deep()) return out;
  for (std::size_t i = 0; i < ex.sources.size(); ++i) {
    source_calls_[i].fetch_add(1, std::memory_order_relaxed);
    out.push_back(encode_field(tape, ex.sources[i], i, true));
  }
  return out;
}

template <typename T>
std::vector<Matrix<T>> Model<T>::target_embeddings(const PreparedExample<T>& ex, std::size_t doc) const {
  if (!spec_.deep()) throw ConfigError("the mlp model has no text encoders");
  Tape<T> tape(false);
  std::vector<Matrix<T>> out;
  for (std::size_t j = 0; j < ex.targets.at(doc).size(); ++j)
    out.push_back(tape.value(encode_field(tape, ex.targets[doc][j], j, false)));
  return out;
}

template <typename T>
Var Model<T>::score_embeddings(Tape<T>& tape, std::span<const Var> sources, std::span<const std::vector<Var>> targets,
                               const Matrix<T>& features) const {
  std::vector<Var> parts;
  if (spec_.deep()) {
    if (targets.size() != features.rows) throw ShapeError("score: document count mismatch");
    std::vector<Var> rows;
    rows.reserve(targets.size());
    for (const auto& t : targets)
      rows.push_back(assemble_deep_features(tape, sources, std::span<const Var>(t), spec_.interaction));
    parts.push_back(rows.size() == 1 ? rows.front() : ops::concat_rows(tape, std::span<const Var>(rows)));
  }
  if (features_) parts.push_back(features_->apply(tape, features));
  Var x = parts.size() == 1 ? parts.front() : ops::concat_cols(tape, std::span<const Var>(parts));
  Var h = ops::relu(tape, ops::linear(tape, x, tape.param(*hidden_kernel_), tape.param(*hidden_bias_)));
  return ops::linear(tape, h, tape.param(*output_kernel_), tape.param(*output_bias_));
}

template <typename T>
Var Model<T>::forward(Tape<T>& tape, const PreparedExample<T>& ex) const {
  if (ex.size() == 0) throw DataError("score: query has no documents");
  const std::vector<Var> sources = encode_sources(tape, ex);
  std::vector<std::vector<Var>> targets;
  if (spec_.deep()) {
    targets.reserve(ex.size());
    for (const auto& doc : ex.targets) {
      std::vector<Var> fields;
      for (std::size_t j = 0; j < doc.size(); ++j) fields.push_back(encode_field(tape, doc[j], j, false));
      targets.push_back(std::move(fields));
    }
  }
  return score_embeddings(tape, sources, targets, ex.features);
}

template <typename T>
std::vector<double> Model<T>::score(const PreparedExample<T>& ex) const {
  Tape<T> tape(false);
  const Matrix<T>& s = tape.value(forward(tape, ex));
  return {s.data.begin(), s.data.end()};
}

template <typename T>
std::vector<double> Model<T>::score(const RankingExample& example) const {
  return score(prepare(example));
}

template struct PreparedExample<float>;
template struct PreparedExample<double>;
template class Model<float>;
template class Model<double>;

}  // namespace dtr
