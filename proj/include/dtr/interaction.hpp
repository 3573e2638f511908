// Copyright 2026 The dtr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "dtr/tape.hpp"

namespace dtr {

struct InteractionConfig {
  bool cosine = true;
  bool hadamard = true;
  bool concat = false;

  void validate() const;
  // Deep feature length for the given field counts and embedding dim.
  std::size_t output_dim(std::size_t sources, std::size_t targets, std::size_t dim) const;
  std::string to_string() const;  // e.g. "cosine,hadamard"
  static InteractionConfig parse(const std::string& methods);
  bool operator==(const InteractionConfig&) const = default;
};

// uᵀv / (|u| |v|), 0 when either norm is 0.
double cosine_sim(std::span<const float> u, std::span<const float> v);
std::vector<float> hadamard(std::span<const float> u, std::span<const float> v);

// Deep feature vector: for every (source i, target j), sources outer, the
// cosine scalar then the hadamard vector; then each source and each target
// embedding if concat is on.
std::vector<float> assemble_deep_features(std::span<const std::vector<float>> sources,
                                          std::span<const std::vector<float>> targets, const InteractionConfig& config);

// Tape version over 1 x d rows. Returns a 1 x output_dim row.
template <typename T>
Var assemble_deep_features(Tape<T>& tape, std::span<const Var> sources, std::span<const Var> targets,
                           const InteractionConfig& config);

}  // namespace dtr
