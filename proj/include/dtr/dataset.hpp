// Copyright 2026 The dtr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace dtr {

struct FieldText {
  std::string field_name;
  std::string text;

  bool operator==(const FieldText&) const = default;
};

struct Document {
  std::string doc_id;
  std::vector<FieldText> target_fields;
  std::vector<double> traditional_features;
  double label = 0.0;

  bool operator==(const Document&) const = default;
};

struct RankingExample {
  std::string query_id;
  std::vector<FieldText> source_fields;
  std::vector<Document> documents;

  bool operator==(const RankingExample&) const = default;
};

using Dataset = std::vector<RankingExample>;

// Throws DataError naming the query and the violated rule.
void validate_example(const RankingExample& example);
// Per-example checks plus a dataset-wide constant feature count.
void validate_dataset(const Dataset& dataset);

// JSON-lines, one RankingExample per line. Blank lines are skipped.
Dataset load_dataset(const std::filesystem::path& path);
Dataset read_dataset(std::istream& in);
void write_dataset(const Dataset& dataset, const std::filesystem::path& path);
void write_dataset(const Dataset& dataset, std::ostream& out);

std::string example_to_json_line(const RankingExample& example);
RankingExample example_from_json_line(const std::string& line);

// All texts of the given side, for vocabulary building.
std::vector<std::string> collect_texts(const Dataset& dataset, bool source = true, bool target = true);

}  // namespace dtr
