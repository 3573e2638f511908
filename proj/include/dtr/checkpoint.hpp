// Copyright 2026 The dtr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "dtr/error.hpp"
#include "dtr/model.hpp"
#include "dtr/trainer.hpp"

namespace dtr {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Malformed, truncated or incompatible checkpoint.
class CheckpointError : public DataError {
 public:
  using DataError::DataError;
};

struct TensorRecord {
  std::string name;
  std::vector<std::uint32_t> shape;
  std::vector<float> values;
};

// "DTXT", u32 version, u32 length + JSON topology, u32 tensor count, then per
// tensor: u32 length + name, u32 rank, u32 dims, little-endian float32 data.
std::vector<std::uint8_t> encode_tensor_file(const std::string& topology, const std::vector<TensorRecord>& tensors);
void decode_tensor_file(const std::vector<std::uint8_t>& bytes, std::string& topology,
                        std::vector<TensorRecord>& tensors);

std::vector<std::uint8_t> serialize_checkpoint(const Model<float>& model);
std::unique_ptr<Model<float>> deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);
void save_checkpoint(const Model<float>& model, const std::filesystem::path& path);
std::unique_ptr<Model<float>> load_checkpoint(const std::filesystem::path& path);

// Pretrained transformer weights plus the subword vocabulary they were trained with.
void save_mlm_checkpoint(const MlmModel& model, const std::filesystem::path& path);
std::unique_ptr<MlmModel> load_mlm_checkpoint(const std::filesystem::path& path);

// FNV-1a 64 of the serialized checkpoint bytes.
std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t size);
std::uint64_t model_fingerprint(const Model<float>& model);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace dtr
