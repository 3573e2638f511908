// Copyright 2026 The dtr Authors
// SPDX-License-Identifier: Apache-2.0

#include "dtr/dataset.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dtr/error.hpp"

namespace dtr {
namespace {

using Json = nlohmann::ordered_json;

[[noreturn]] void violation(const RankingExample& ex, const std::string& rule) {
  throw DataError("query '" + ex.query_id + "': " + rule);
}

std::vector<FieldText> fields_from_json(const Json& obj, const char* what) {
  if (!obj.is_object()) throw DataError(std::string("'") + what + "' must be an object of field -> text");
  std::vector<FieldText> out;
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!it.value().is_string()) throw DataError(std::string("'") + what + "." + it.key() + "' must be a string");
    out.push_back({it.key(), it.value().get<std::string>()});
  }
  return out;
}

Json fields_to_json(const std::vector<FieldText>& fields) {
  Json obj = Json::object();
  for (const auto& f : fields) obj[f.field_name] = f.text;
  return obj;
}

std::set<std::string> field_names(const std::vector<FieldText>& fields) {
  std::set<std::string> names;
  for (const auto& f : fields) names.insert(f.field_name);
  return names;
}

}  // namespace

void validate_example(const RankingExample& ex) {
  if (ex.query_id.empty()) violation(ex, "query_id must be non-empty");
  if (ex.source_fields.empty()) violation(ex, "needs at least one source field");
  if (ex.documents.empty()) violation(ex, "needs at least one document");
  for (const auto& f : ex.source_fields)
    if (f.field_name.empty()) violation(ex, "source field names must be non-empty");
  if (field_names(ex.source_fields).size() != ex.source_fields.size()) violation(ex, "duplicate source field name");
  const auto& first = ex.documents.front();
  const auto target_names = field_names(first.target_fields);
  for (const auto& d : ex.documents) {
    if (d.doc_id.empty()) violation(ex, "doc_id must be non-empty");
    if (d.target_fields.empty()) violation(ex, "document '" + d.doc_id + "' has no target fields");
    for (const auto& f : d.target_fields)
      if (f.field_name.empty()) violation(ex, "target field names must be non-empty");
    if (field_names(d.target_fields) != target_names || d.target_fields.size() != first.target_fields.size())
      violation(ex, "documents must carry the same target fields (document '" + d.doc_id + "')");
    if (d.traditional_features.size() != first.traditional_features.size())
      violation(ex, "documents must carry the same traditional feature count (document '" + d.doc_id + "' has " +
                        std::to_string(d.traditional_features.size()) + ", expected " +
                        std::to_string(first.traditional_features.size()) + ")");
    for (double x : d.traditional_features)
      if (!std::isfinite(x)) violation(ex, "traditional features must be finite (document '" + d.doc_id + "')");
    if (!std::isfinite(d.label) || d.label < 0.0 || d.label > 1.0)
      violation(ex, "label must be finite and in [0, 1] (document '" + d.doc_id + "')");
  }
}

void validate_dataset(const Dataset& dataset) {
  for (const auto& ex : dataset) validate_example(ex);
  if (dataset.empty()) return;
  const std::size_t nf = dataset.front().documents.front().traditional_features.size();
  for (const auto& ex : dataset)
    if (ex.documents.front().traditional_features.size() != nf)
      violation(ex, "traditional feature count differs from the rest of the dataset (" +
                        std::to_string(ex.documents.front().traditional_features.size()) + " vs " +
                        std::to_string(nf) + ")");
}

RankingExample example_from_json_line(const std::string& line) {
  Json j = Json::parse(line);
  if (!j.is_object()) throw DataError("expected a JSON object");
  RankingExample ex;
  if (!j.contains("query_id") || !j["query_id"].is_string()) throw DataError("missing string 'query_id'");
  ex.query_id = j["query_id"].get<std::string>();
  if (!j.contains("source")) throw DataError("missing 'source'");
  ex.source_fields = fields_from_json(j["source"], "source");
  if (!j.contains("docs") || !j["docs"].is_array()) throw DataError("missing array 'docs'");
  for (const auto& dj : j["docs"]) {
    if (!dj.is_object()) throw DataError("each doc must be an object");
    Document d;
    if (!dj.contains("doc_id") || !dj["doc_id"].is_string()) throw DataError("doc missing string 'doc_id'");
    d.doc_id = dj["doc_id"].get<std::string>();
    if (!dj.contains("target")) throw DataError("doc '" + d.doc_id + "' missing 'target'");
    d.target_fields = fields_from_json(dj["target"], "target");
    if (dj.contains("features")) {
      if (!dj["features"].is_array()) throw DataError("doc '" + d.doc_id + "': 'features' must be an array");
      for (const auto& x : dj["features"]) {
        if (!x.is_number()) throw DataError("doc '" + d.doc_id + "': features must be numbers");
        d.traditional_features.push_back(x.get<double>());
      }
    }
    if (!dj.contains("label") || !dj["label"].is_number()) throw DataError("doc '" + d.doc_id + "' missing numeric 'label'");
    d.label = dj["label"].get<double>();
    ex.documents.push_back(std::move(d));
  }
  return ex;
}

std::string example_to_json_line(const RankingExample& ex) {
  Json j;
  j["query_id"] = ex.query_id;
  j["source"] = fields_to_json(ex.source_fields);
  Json docs = Json::array();
  for (const auto& d : ex.documents) {
    Json dj;
    dj["doc_id"] = d.doc_id;
    dj["target"] = fields_to_json(d.target_fields);
    dj["features"] = d.traditional_features;
    dj["label"] = d.label;
    docs.push_back(std::move(dj));
  }
  j["docs"] = std::move(docs);
  return j.dump();
}

Dataset read_dataset(std::istream& in) {
  Dataset out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    RankingExample ex;
    try {
      ex = example_from_json_line(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("line " + std::to_string(line_no) + ": parse error: " + e.what());
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    }
    try {
      validate_example(ex);
      if (!out.empty() && ex.documents.front().traditional_features.size() !=
                              out.front().documents.front().traditional_features.size())
        violation(ex, "traditional feature count differs from the rest of the dataset");
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    }
    out.push_back(std::move(ex));
  }
  return out;
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset " + path.string());
  return read_dataset(in);
}

void write_dataset(const Dataset& dataset, std::ostream& out) {
  for (const auto& ex : dataset) out << example_to_json_line(ex) << '\n';
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write dataset " + path.string());
  write_dataset(dataset, out);
  if (!out) throw Error("failed writing dataset " + path.string());
}

std::vector<std::string> collect_texts(const Dataset& dataset, bool source, bool target) {
  std::vector<std::string> texts;
  for (const auto& ex : dataset) {
    if (source)
      for (const auto& f : ex.source_fields) texts.push_back(f.text);
    if (target)
      for (const auto& d : ex.documents)
        for (const auto& f : d.target_fields) texts.push_back(f.text);
  }
  return texts;
}

}  // namespace dtr
