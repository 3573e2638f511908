// Copyright 2026 The dtr Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstring>
#include <fstream>

#include "dtr/checkpoint.hpp"
#include "helpers.hpp"

using namespace dtr;
using testing::small_model_spec;

namespace {

struct Fixture {
  SyntheticCorpus corpus = generate_synthetic_corpus(testing::small_spec(12, 4), 8);

  std::unique_ptr<Model<float>> model(EncoderKind kind) const {
    const ModelSpec spec = small_model_spec(kind);
    auto m = std::make_unique<Model<float>>(spec, build_vocabularies(spec, corpus.train), 21);
    m->features()->set_statistics(fit_standardizer(std::span<const RankingExample>(corpus.train)));
    // Move away from the initializer so a silent re-init would be caught.
    Rng rng(22);
    for (auto* p : m->parameters().trainable())
      for (float& v : p->value.data) v += static_cast<float>(rng.uniform(-0.05, 0.05));
    return m;
  }
};

}  // namespace

TEST_SUITE("checkpoint") {
  TEST_CASE("save then load gives bitwise identical scores for every encoder") {
    Fixture f;
    testing::TempDir dir("ckpt");
    for (EncoderKind kind : {EncoderKind::kMlp, EncoderKind::kCnn, EncoderKind::kBert}) {
      CAPTURE(to_string(kind));
      auto m = f.model(kind);
      const auto path = dir / (to_string(kind) + ".dtx");
      save_checkpoint(*m, path);
      auto back = load_checkpoint(path);
      CHECK(back->spec() == m->spec());
      CHECK(back->vocab() == m->vocab());
      for (const auto& ex : f.corpus.dev) CHECK(back->score(ex) == m->score(ex));
      CHECK(serialize_checkpoint(*back) == serialize_checkpoint(*m));
      CHECK(model_fingerprint(*back) == model_fingerprint(*m));
    }
  }

  TEST_CASE("file size follows the layout") {
    Fixture f;
    auto m = f.model(EncoderKind::kCnn);
    const auto bytes = serialize_checkpoint(*m);
    std::string topology;
    std::vector<TensorRecord> tensors;
    decode_tensor_file(bytes, topology, tensors);
    std::size_t want = 4 + 4 + 4 + topology.size() + 4;
    for (const auto& t : tensors) want += 4 + t.name.size() + 4 + 4 * t.shape.size() + 4 * t.values.size();
    CHECK(bytes.size() == want);
    CHECK(tensors.size() == m->parameters().size());
    CHECK(std::memcmp(bytes.data(), "DTXT", 4) == 0);
  }

  TEST_CASE("every truncation is rejected") {
    Fixture f;
    auto m = f.model(EncoderKind::kMlp);
    const auto bytes = serialize_checkpoint(*m);
    for (std::size_t cut = 0; cut < bytes.size(); cut += 1 + cut / 7) {
      const std::vector<std::uint8_t> part(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
      CHECK_THROWS_AS(deserialize_checkpoint(part), CheckpointError);
    }
    auto extra = bytes;
    extra.push_back(0);
    CHECK_THROWS_AS(deserialize_checkpoint(extra), CheckpointError);
  }

  TEST_CASE("wrong magic and version mismatch") {
    Fixture f;
    auto bytes = serialize_checkpoint(*f.model(EncoderKind::kMlp));
    auto bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(deserialize_checkpoint(bad), CheckpointError);
    bad = bytes;
    bad[4] = static_cast<std::uint8_t>(kCheckpointVersion + 1);
    try {
      deserialize_checkpoint(bad);
      FAIL("expected a version error");
    } catch (const CheckpointError& e) {
      CHECK(std::string(e.what()).find("version") != std::string::npos);
    }
    testing::TempDir dir("ckpt_missing");
    CHECK_THROWS_AS(load_checkpoint(dir / "absent.dtx"), DataError);
  }

  TEST_CASE("tensor set must match the topology") {
    Fixture f;
    auto m = f.model(EncoderKind::kMlp);
    std::string topology;
    std::vector<TensorRecord> tensors;
    decode_tensor_file(serialize_checkpoint(*m), topology, tensors);
    auto fewer = tensors;
    fewer.pop_back();
    CHECK_THROWS_AS(deserialize_checkpoint(encode_tensor_file(topology, fewer)), CheckpointError);
    auto reshaped = tensors;
    reshaped.back().shape = {static_cast<std::uint32_t>(reshaped.back().values.size()), 1, 1};
    CHECK_THROWS_AS(deserialize_checkpoint(encode_tensor_file(topology, reshaped)), CheckpointError);
    CHECK_THROWS_AS(deserialize_checkpoint(encode_tensor_file("{not json", tensors)), CheckpointError);
    CHECK_NOTHROW(deserialize_checkpoint(encode_tensor_file(topology, tensors)));
  }

  TEST_CASE("pretrained encoder checkpoints round trip and load into a model") {
    Fixture f;
    const ModelSpec spec = small_model_spec(EncoderKind::kBert);
    const auto vocab = build_vocabularies(spec, f.corpus.train);
    MlmModel mlm(spec.transformer, vocab.subwords, 4);
    for (std::size_t i = 0; i < mlm.store.size(); ++i)
      for (float& v : mlm.store[i].value.data) v += 0.01f;
    testing::TempDir dir("mlm");
    save_mlm_checkpoint(mlm, dir / "mlm.dtx");
    auto back = load_mlm_checkpoint(dir / "mlm.dtx");
    CHECK(back->vocab == mlm.vocab);
    REQUIRE(back->store.size() == mlm.store.size());
    for (std::size_t i = 0; i < mlm.store.size(); ++i) CHECK(back->store[i].value.data == mlm.store[i].value.data);
    Model<float> model(spec, vocab, 5);
    CHECK(model.copy_matching_from(back->store) == spec.transformer.tensor_count());
    CHECK(model.parameters().find("bert/layer_0/q_kernel")->value.data ==
          mlm.store.find("bert/layer_0/q_kernel")->value.data);
    CHECK_THROWS_AS(load_checkpoint(dir / "mlm.dtx"), CheckpointError);
  }

  TEST_CASE("fnv1a64 reference values") {
    CHECK(fnv1a64(nullptr, 0) == 0xcbf29ce484222325ULL);
    const std::string a = "a";
    CHECK(fnv1a64(reinterpret_cast<const std::uint8_t*>(a.data()), 1) == 0xaf63dc4c8601ec8cULL);
    const std::string foobar = "foobar";
    CHECK(fnv1a64(reinterpret_cast<const std::uint8_t*>(foobar.data()), 6) == 0x85944171f73967e8ULL);
  }
}
