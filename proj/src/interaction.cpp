// Copyright 2026 The dtr Authors
// SPDX-License-Identifier: Apache-2.0

#include "dtr/interaction.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dtr/error.hpp"
#include "dtr/kernels.hpp"

namespace dtr {

void InteractionConfig::validate() const {
  if (!cosine && !hadamard && !concat) throw ConfigError("interaction: at least one method must be enabled");
}

std::size_t InteractionConfig::output_dim(std::size_t sources, std::size_t targets, std::size_t dim) const {
  return sources * targets * ((cosine ? 1 : 0) + (hadamard ? dim : 0)) + (concat ? (sources + targets) * dim : 0);
}

std::string InteractionConfig::to_string() const {
  std::string out;
  auto append = [&](const char* name) {
    if (!out.empty()) out += ',';
    out += name;
  };
  if (cosine) append("cosine");
  if (hadamard) append("hadamard");
  if (concat) append("concat");
  return out;
}

InteractionConfig InteractionConfig::parse(const std::string& methods) {
  InteractionConfig c{false, false, false};
  std::stringstream ss(methods);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "cosine") c.cosine = true;
    else if (item == "hadamard") c.hadamard = true;
    else if (item == "concat") c.concat = true;
    else throw ConfigError("interaction: unknown method '" + item + "'");
  }
  c.validate();
  return c;
}

namespace {
void check_dims(std::size_t a, std::size_t b, const char* op) {
  if (a != b) throw ShapeError(std::string(op) + ": dimension mismatch " + std::to_string(a) + " vs " + std::to_string(b));
}
}  // namespace

double cosine_sim(std::span<const float> u, std::span<const float> v) {
  check_dims(u.size(), v.size(), "cosine_sim");
  double uv = 0, uu = 0, vv = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    uv += static_cast<double>(u[i]) * v[i];
    uu += static_cast<double>(u[i]) * u[i];
    vv += static_cast<double>(v[i]) * v[i];
  }
  if (uu == 0.0 || vv == 0.0) return 0.0;
  return std::clamp(uv / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
}

std::vector<float> hadamard(std::span<const float> u, std::span<const float> v) {
  check_dims(u.size(), v.size(), "hadamard");
  std::vector<float> out(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) out[i] = u[i] * v[i];
  return out;
}

std::vector<float> assemble_deep_features(std::span<const std::vector<float>> sources,
                                          std::span<const std::vector<float>> targets, const InteractionConfig& config) {
  config.validate();
  std::size_t d = 0;
  if (!sources.empty()) d = sources.front().size();
  else if (!targets.empty()) d = targets.front().size();
  for (const auto& s : sources) check_dims(s.size(), d, "assemble_deep_features");
  for (const auto& t : targets) check_dims(t.size(), d, "assemble_deep_features");
  std::vector<float> out;
  out.reserve(config.output_dim(sources.size(), targets.size(), d));
  for (const auto& s : sources) {
    for (const auto& t : targets) {
      if (config.cosine) out.push_back(static_cast<float>(cosine_sim(s, t)));
      if (config.hadamard) {
        const auto h = hadamard(s, t);
        out.insert(out.end(), h.begin(), h.end());
      }
    }
  }
  if (config.concat) {
    for (const auto& s : sources) out.insert(out.end(), s.begin(), s.end());
    for (const auto& t : targets) out.insert(out.end(), t.begin(), t.end());
  }
  return out;
}

template <typename T>
Var assemble_deep_features(Tape<T>& tape, std::span<const Var> sources, std::span<const Var> targets,
                           const InteractionConfig& config) {
  config.validate();
  std::vector<Var> parts;
  for (Var s : sources) {
    for (Var t : targets) {
      check_dims(tape.value(s).cols, tape.value(t).cols, "assemble_deep_features");
      if (config.cosine) parts.push_back(ops::cosine(tape, s, t));
      if (config.hadamard) parts.push_back(ops::mul(tape, s, t));
    }
  }
  if (config.concat) {
    parts.insert(parts.end(), sources.begin(), sources.end());
    parts.insert(parts.end(), targets.begin(), targets.end());
  }
  if (parts.empty()) throw ShapeError("assemble_deep_features: no fields to interact");
  if (parts.size() == 1) return parts.front();
  return ops::concat_cols(tape, std::span<const Var>(parts));
}

template Var assemble_deep_features<float>(Tape<float>&, std::span<const Var>, std::span<const Var>,
                                           const InteractionConfig&);
template Var assemble_deep_features<double>(Tape<double>&, std::span<const Var>, std::span<const Var>,
                                            const InteractionConfig&);

}  // namespace dtr
