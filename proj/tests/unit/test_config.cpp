// Copyright 2026 The dtr Authors
// SPDX-License-Identifier: Apache-2.0

#include <fstream>

#include "dtr/config.hpp"
#include "dtr/error.hpp"
#include "helpers.hpp"

using namespace dtr;

TEST_SUITE("config") {
  TEST_CASE("defaults round trip through json") {
    RunConfig c;
    const Json j = to_json(c);
    const RunConfig back = run_config_from_json(j);
    CHECK(to_json(back) == j);
    CHECK(!back.seed.has_value());
    CHECK(back.model == c.model);
    CHECK(back.train == c.train);
    CHECK(back.serving == c.serving);
  }

  TEST_CASE("non-default values round trip") {
    RunConfig c;
    c.seed = 17;
    c.data_dir = "/tmp/x";
    c.model = testing::small_model_spec(EncoderKind::kBert);
    c.model.interaction = {true, false, true};
    c.model.rescale_features = false;
    c.train.ltr = {LtrMode::kPairwise, true};
    c.train.lr_bert = 2.5e-5;
    c.train.epochs = 7;
    c.synthetic.noise = 0.25;
    c.pretrain.steps = 12;
    c.serving.two_pass_k = 40;
    const RunConfig back = run_config_from_json(to_json(c));
    CHECK(back.seed == std::optional<std::uint64_t>(17));
    CHECK(back.model == c.model);
    CHECK(back.train == c.train);
    CHECK(back.synthetic.noise == 0.25);
    CHECK(back.pretrain.steps == 12);
    CHECK(back.serving == c.serving);
    CHECK(to_json(back) == to_json(c));
  }

  TEST_CASE("partial sections keep defaults") {
    const RunConfig c = run_config_from_json(Json::parse(R"({"train": {"epochs": 3}, "model": {"encoder": "mlp"}})"));
    CHECK(c.train.epochs == 3);
    CHECK(c.train.batch_queries == TrainConfig{}.batch_queries);
    CHECK(c.model.encoder == EncoderKind::kMlp);
    CHECK(c.model.hidden == ModelSpec{}.hidden);
  }

  TEST_CASE("unknown keys, wrong types and invalid values are rejected") {
    for (const char* text : {R"({"trian": {}})", R"({"train": {"epoch": 3}})", R"({"model": {"cnn": {"width": 3}}})",
                             R"({"train": {"epochs": "3"}})", R"({"train": {"epochs": -1}})",
                             R"({"model": {"use_features": 1}})", R"({"model": {"encoder": "rnn"}})",
                             R"({"train": {"ltr": "listwise", "lambda_rank": true}})",
                             R"({"model": {"interaction": "dot"}})", R"({"serving": {"requests": 0}})",
                             R"({"pretrain": {"mask_prob": 1.5}})", R"({"train": []})", R"([1, 2])"}) {
      CAPTURE(text);
      CHECK_THROWS_AS(run_config_from_json(Json::parse(text)), ConfigError);
    }
  }

  TEST_CASE("load_run_config reads files and reports parse errors") {
    testing::TempDir dir("config");
    {
      std::ofstream(dir / "ok.json") << R"({"seed": 5, "train": {"lr_other": 0.003}})";
      std::ofstream(dir / "bad.json") << "{\"seed\": ";
    }
    const RunConfig c = load_run_config(dir / "ok.json");
    CHECK(c.seed == std::optional<std::uint64_t>(5));
    CHECK(c.train.lr_other == 0.003);
    CHECK_THROWS_AS(load_run_config(dir / "bad.json"), ConfigError);
    CHECK_THROWS_AS(load_run_config(dir / "missing.json"), ConfigError);
  }
}
