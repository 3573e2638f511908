// Copyright 2026 The dtr Authors
// SPDX-License-Identifier: Apache-2.0

#include "dtr/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "dtr/config.hpp"

namespace dtr {

namespace {

constexpr char kMagic[4] = {'D', 'T', 'X', 'T'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Cursor {
 public:
  explicit Cursor(const std::vector<std::uint8_t>& b) : b_(b) {}
  void need(std::size_t n, const char* what) const {
    if (b_.size() - pos_ < n)
      throw CheckpointError(std::string("checkpoint truncated while reading ") + what + " at byte " +
                            std::to_string(pos_));
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  float f32() {
    return std::bit_cast<float>(u32("tensor data"));
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  const std::vector<std::uint8_t>& b_;
  std::size_t pos_ = 0;
};

std::vector<TensorRecord> records_of(const ParameterStore<float>& store) {
  std::vector<TensorRecord> out;
  for (std::size_t i = 0; i < store.size(); ++i) {
    const Parameter<float>& p = store[i];
    TensorRecord r;
    r.name = p.name;
    for (std::size_t d : p.shape) r.shape.push_back(static_cast<std::uint32_t>(d));
    r.values = p.value.data;
    out.push_back(std::move(r));
  }
  return out;
}

// Assigns every record to the same-named parameter of `store`, requiring an
// exact one-to-one match of names and shapes.
void assign_records(ParameterStore<float>& store, const std::vector<TensorRecord>& records) {
  if (records.size() != store.size())
    throw CheckpointError("checkpoint has " + std::to_string(records.size()) + " tensors, topology expects " +
                          std::to_string(store.size()));
  for (const auto& r : records) {
    Parameter<float>* p = store.find(r.name);
    if (p == nullptr) throw CheckpointError("checkpoint tensor '" + r.name + "' is not part of the topology");
    std::vector<std::size_t> shape(r.shape.begin(), r.shape.end());
    if (shape != p->shape) throw CheckpointError("checkpoint tensor '" + r.name + "' has a shape mismatch");
    p->value.data = r.values;
  }
}

Json parse_topology(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("checkpoint topology is not valid JSON: ") + e.what());
  }
}

}  // namespace

std::vector<std::uint8_t> encode_tensor_file(const std::string& topology, const std::vector<TensorRecord>& tensors) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(topology.size()));
  out.insert(out.end(), topology.begin(), topology.end());
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out.insert(out.end(), t.name.begin(), t.name.end());
    put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
    for (std::uint32_t d : t.shape) put_u32(out, d);
    for (float v : t.values) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

void decode_tensor_file(const std::vector<std::uint8_t>& bytes, std::string& topology,
                        std::vector<TensorRecord>& tensors) {
  Cursor c(bytes);
  if (c.bytes(4, "magic") != std::string(kMagic, 4)) throw CheckpointError("not a checkpoint file (bad magic)");
  const std::uint32_t version = c.u32("version");
  if (version != kCheckpointVersion)
    throw CheckpointError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  topology = c.bytes(c.u32("topology length"), "topology");
  const std::uint32_t count = c.u32("tensor count");
  tensors.clear();
  for (std::uint32_t i = 0; i < count; ++i) {
    TensorRecord r;
    r.name = c.bytes(c.u32("tensor name length"), "tensor name");
    const std::uint32_t rank = c.u32("tensor rank");
    if (rank == 0 || rank > 2) throw CheckpointError("tensor '" + r.name + "' has unsupported rank");
    std::size_t numel = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      r.shape.push_back(c.u32("tensor dims"));
      numel *= r.shape.back();
    }
    c.need(numel * 4, "tensor data");
    r.values.resize(numel);
    for (float& v : r.values) v = c.f32();
    tensors.push_back(std::move(r));
  }
  if (!c.done()) throw CheckpointError("checkpoint has trailing bytes");
}

std::vector<std::uint8_t> serialize_checkpoint(const Model<float>& model) {
  Json topo;
  topo["kind"] = "ranking-model";
  topo["spec"] = to_json(model.spec());
  topo["vocab"] = {{"words", model.vocab().words.regular_tokens()},
                   {"subwords", model.vocab().subwords.regular_tokens()}};
  return encode_tensor_file(topo.dump(), records_of(model.parameters()));
}

std::unique_ptr<Model<float>> deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
  std::string topology;
  std::vector<TensorRecord> tensors;
  decode_tensor_file(bytes, topology, tensors);
  const Json topo = parse_topology(topology);
  if (topo.value("kind", "") != "ranking-model") throw CheckpointError("checkpoint is not a ranking model");
  ModelSpec spec;
  Vocabularies vocab;
  try {
    spec = model_spec_from_json(topo.at("spec"));
    vocab.words = WordVocabulary(topo.at("vocab").at("words").get<std::vector<std::string>>());
    vocab.subwords = SubwordVocabulary(topo.at("vocab").at("subwords").get<std::vector<std::string>>());
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("checkpoint topology is invalid: ") + e.what());
  }
  auto model = std::make_unique<Model<float>>(spec, std::move(vocab), 0);
  assign_records(model->parameters(), tensors);
  return model;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void save_checkpoint(const Model<float>& model, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_checkpoint(model));
}

std::unique_ptr<Model<float>> load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(read_file_bytes(path));
}

void save_mlm_checkpoint(const MlmModel& model, const std::filesystem::path& path) {
  Json topo;
  topo["kind"] = "mlm-encoder";
  topo["transformer"] = {{"layers", model.config.layers},
                         {"hidden", model.config.hidden},
                         {"heads", model.config.heads},
                         {"max_len", model.config.max_len}};
  topo["subwords"] = model.vocab.regular_tokens();
  write_file_atomic(path, encode_tensor_file(topo.dump(), records_of(model.store)));
}

std::unique_ptr<MlmModel> load_mlm_checkpoint(const std::filesystem::path& path) {
  std::string topology;
  std::vector<TensorRecord> tensors;
  decode_tensor_file(read_file_bytes(path), topology, tensors);
  const Json topo = parse_topology(topology);
  if (topo.value("kind", "") != "mlm-encoder") throw CheckpointError("checkpoint is not a pretrained encoder");
  TransformerConfig cfg;
  SubwordVocabulary vocab;
  try {
    const Json& t = topo.at("transformer");
    cfg = {t.at("layers").get<std::size_t>(), t.at("hidden").get<std::size_t>(), t.at("heads").get<std::size_t>(),
           t.at("max_len").get<std::size_t>()};
    vocab = SubwordVocabulary(topo.at("subwords").get<std::vector<std::string>>());
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("pretrained topology is invalid: ") + e.what());
  }
  auto model = std::make_unique<MlmModel>(cfg, std::move(vocab), 0);
  assign_records(model->store, tensors);
  return model;
}

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t size) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t model_fingerprint(const Model<float>& model) {
  const auto bytes = serialize_checkpoint(model);
  return fnv1a64(bytes.data(), bytes.size());
}

}  // namespace dtr
