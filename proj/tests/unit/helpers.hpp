// Copyright 2026 The dtr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <unistd.h>
#include <vector>

#include <doctest.h>

#include "dtr/dataset.hpp"
#include "dtr/model.hpp"
#include "dtr/rng.hpp"
#include "dtr/synthetic.hpp"

namespace dtr::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("dtr_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::vector<double> random_vector(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

inline std::vector<double> random_binary_labels(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.bernoulli(0.4) ? 1.0 : 0.0;
  return v;
}

// A small synthetic corpus for fast model tests.
inline SyntheticSpec small_spec(std::size_t train = 40, std::size_t dev = 10) {
  SyntheticSpec s;
  s.vocab_size = 120;
  s.num_topics = 6;
  s.train_queries = train;
  s.dev_queries = dev;
  s.test_queries = dev;
  s.docs_per_query = 5;
  return s;
}

// Tiny encoders so every model kind trains in milliseconds.
inline ModelSpec small_model_spec(EncoderKind kind) {
  ModelSpec s;
  s.encoder = kind;
  s.cnn = {12, 8, 3};
  s.transformer = {1, 8, 2, 32};
  s.hidden = 10;
  s.subword_merges = 40;
  return s;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

}  // namespace dtr::testing
