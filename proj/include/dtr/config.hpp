// Copyright 2026 The dtr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "dtr/model.hpp"
#include "dtr/synthetic.hpp"
#include "dtr/trainer.hpp"

namespace dtr {

using Json = nlohmann::ordered_json;

// Serving and benchmark settings.
struct ServingConfig {
  std::size_t two_pass_k = 300;
  std::size_t warmup = 50;
  std::size_t requests = 200;
  std::size_t candidates = 1000;
  std::size_t concurrency = 1;
  bool operator==(const ServingConfig&) const = default;
};

// Everything one experiment needs. Every section is optional in the file;
// absent keys keep their defaults, unknown keys are rejected.
struct RunConfig {
  SyntheticSpec synthetic;
  ModelSpec model;
  TrainConfig train;
  PretrainConfig pretrain;
  ServingConfig serving;
  std::size_t pretrain_sentences = 4000;
  std::optional<std::uint64_t> seed;
  std::string data_dir;      // gen output / train input directory
  std::string pretrained;    // MLM checkpoint to initialize the transformer from
};

Json to_json(const ModelSpec& spec);
Json to_json(const TrainConfig& config);
Json to_json(const SyntheticSpec& spec);
Json to_json(const PretrainConfig& config);
Json to_json(const ServingConfig& config);
Json to_json(const RunConfig& config);

ModelSpec model_spec_from_json(const Json& j);
TrainConfig train_config_from_json(const Json& j);
SyntheticSpec synthetic_spec_from_json(const Json& j);
PretrainConfig pretrain_config_from_json(const Json& j);
ServingConfig serving_config_from_json(const Json& j);
RunConfig run_config_from_json(const Json& j);

// Parses and validates; throws ConfigError on malformed or unknown input.
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace dtr
