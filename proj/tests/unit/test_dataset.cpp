// Copyright 2026 The dtr Authors
// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <set>
#include <sstream>

#include "dtr/error.hpp"
#include "dtr/text.hpp"
#include "helpers.hpp"

using namespace dtr;

namespace {

RankingExample tiny_example(const std::string& qid) {
  RankingExample ex;
  ex.query_id = qid;
  ex.source_fields = {{"query", "software engineer"}};
  ex.documents.push_back({"d1", {{"title", "Engineer"}, {"description", "writes \"code\"\n"}}, {1.0, 2.5}, 1.0});
  ex.documents.push_back({"d2", {{"title", ""}, {"description", "caf\xC3\xA9"}}, {-3.0, 0.0}, 0.0});
  return ex;
}

std::string error_of(const std::string& content) {
  std::istringstream in(content);
  try {
    read_dataset(in);
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

// Distinct query terms appearing in any target field: a separate count from
// the library's helper.
std::size_t overlap_oracle(const RankingExample& ex, const Document& d) {
  std::set<std::string> terms;
  for (const auto& w : tokenize_words(ex.source_fields.front().text)) terms.insert(w);
  std::set<std::string> seen;
  for (const auto& f : d.target_fields)
    for (const auto& w : tokenize_words(f.text))
      if (terms.contains(w)) seen.insert(w);
  return seen.size();
}

}  // namespace

TEST_SUITE("dataset") {
  TEST_CASE("JSON-lines round trip") {
    Dataset data{tiny_example("q1"), tiny_example("q2")};
    testing::TempDir dir("dataset");
    write_dataset(data, dir / "data.jsonl");
    const Dataset loaded = load_dataset(dir / "data.jsonl");
    CHECK(loaded.size() == 2);
    CHECK(loaded == data);
  }

  TEST_CASE("round trip of a generated corpus") {
    const auto corpus = generate_synthetic_corpus(testing::small_spec(20, 5), 3);
    std::stringstream buf;
    write_dataset(corpus.train, buf);
    CHECK(read_dataset(buf) == corpus.train);
  }

  TEST_CASE("empty file and blank lines") {
    testing::TempDir dir("empty");
    { std::ofstream(dir / "empty.jsonl"); }
    CHECK(load_dataset(dir / "empty.jsonl").empty());
    std::istringstream in("\n" + example_to_json_line(tiny_example("q")) + "\n   \n");
    CHECK(read_dataset(in).size() == 1);
  }

  TEST_CASE("invariant violations name the query and the rule") {
    const std::string bad_features =
        R"({"query_id":"q7","source":{"query":"a"},"docs":[)"
        R"({"doc_id":"x","target":{"title":"a"},"features":[1,2],"label":1},)"
        R"({"doc_id":"y","target":{"title":"b"},"features":[1],"label":0}]})";
    const std::string msg = error_of(bad_features);
    CHECK(msg.find("line 1") != std::string::npos);
    CHECK(msg.find("q7") != std::string::npos);
    CHECK(msg.find("feature") != std::string::npos);

    CHECK(error_of(R"({"query_id":"q","source":{},"docs":[{"doc_id":"x","target":{"t":"a"},"label":1}]})")
              .find("source") != std::string::npos);
    CHECK(error_of(R"({"query_id":"q","source":{"s":"a"},"docs":[]})").find("document") != std::string::npos);
    CHECK(error_of(R"({"query_id":"q","source":{"s":"a"},"docs":[)"
                   R"({"doc_id":"x","target":{"t":"a"},"label":1},{"doc_id":"y","target":{"u":"a"},"label":1}]})")
              .find("target") != std::string::npos);
  }

  TEST_CASE("parse errors carry the line number") {
    const std::string good = example_to_json_line(tiny_example("q"));
    const std::string msg = error_of(good + "\n" + good + "\n{not json\n");
    CHECK(msg.find("line 3") != std::string::npos);
    CHECK(error_of(R"({"query_id":"q","source":{"s":"a"},"docs":[{"doc_id":"x","target":{"t":"a"}}]})")
              .find("label") != std::string::npos);
  }

  TEST_CASE("dataset-wide feature count") {
    RankingExample a = tiny_example("a");
    RankingExample b = tiny_example("b");
    for (auto& d : b.documents) d.traditional_features.push_back(0.0);
    CHECK_NOTHROW(validate_example(b));
    CHECK_THROWS_AS(validate_dataset({a, b}), DataError);
  }

  TEST_CASE("non-finite labels and empty field names are rejected") {
    RankingExample a = tiny_example("a");
    a.documents[0].label = std::nan("");
    CHECK_THROWS_AS(validate_example(a), DataError);
    RankingExample b = tiny_example("b");
    b.source_fields[0].field_name = "";
    CHECK_THROWS_AS(validate_example(b), DataError);
  }

  TEST_CASE("missing file") {
    CHECK_THROWS_AS(load_dataset("/nonexistent/dir/data.jsonl"), DataError);
  }

  TEST_CASE("collect_texts") {
    Dataset data{tiny_example("q")};
    CHECK(collect_texts(data, true, false) == std::vector<std::string>{"software engineer"});
    CHECK(collect_texts(data, false, true).size() == 4);
  }
}

TEST_SUITE("synthetic") {
  TEST_CASE("same seed gives byte-identical datasets") {
    const auto spec = testing::small_spec(30, 10);
    const auto a = generate_synthetic_corpus(spec, 42);
    const auto b = generate_synthetic_corpus(spec, 42);
    const auto c = generate_synthetic_corpus(spec, 43);
    std::stringstream sa, sb, sc;
    write_dataset(a.train, sa);
    write_dataset(b.train, sb);
    write_dataset(c.train, sc);
    CHECK(sa.str() == sb.str());
    CHECK(sa.str() != sc.str());
  }

  TEST_CASE("split sizes and shape") {
    const auto spec = testing::small_spec(30, 10);
    const auto c = generate_synthetic_corpus(spec, 1);
    CHECK(c.train.size() == 30);
    CHECK(c.dev.size() == 10);
    CHECK(c.test.size() == 10);
    CHECK_NOTHROW(validate_dataset(c.train));
    for (const auto& ex : c.train) {
      CHECK(ex.documents.size() == spec.docs_per_query);
      std::size_t clicks = 0;
      for (const auto& d : ex.documents) {
        clicks += d.label == 1.0;
        CHECK(d.traditional_features.size() == spec.num_features);
        CHECK(d.target_fields.size() == spec.target_fields);
      }
      CHECK(clicks == 1);
    }
  }

  TEST_CASE("noise 0: the clicked document has strictly maximal overlap") {
    auto spec = testing::small_spec(200, 1);
    spec.noise = 0.0;
    spec.docs_per_query = 10;
    const auto c = generate_synthetic_corpus(spec, 5);
    for (const auto& ex : c.train) {
      std::size_t clicked = 0;
      for (std::size_t d = 0; d < ex.documents.size(); ++d)
        if (ex.documents[d].label > 0) clicked = d;
      const std::size_t best = overlap_oracle(ex, ex.documents[clicked]);
      CHECK(best >= 1);
      for (std::size_t d = 0; d < ex.documents.size(); ++d)
        if (d != clicked) CHECK(overlap_oracle(ex, ex.documents[d]) < best);
    }
  }

  TEST_CASE("noise 0.1: the overlap argmax misses the click about 10% of the time") {
    SyntheticSpec spec;
    spec.train_queries = 1000;
    spec.dev_queries = 1;
    spec.test_queries = 1;
    spec.noise = 0.1;
    const auto c = generate_synthetic_corpus(spec, 17);
    std::size_t misses = 0;
    for (const auto& ex : c.train) {
      std::size_t arg = 0, best = 0;
      for (std::size_t d = 0; d < ex.documents.size(); ++d) {
        const std::size_t o = overlap_oracle(ex, ex.documents[d]);
        if (o > best) best = o, arg = d;
      }
      misses += ex.documents[arg].label == 0.0;
      CHECK(query_term_overlap(ex.source_fields[0].text, ex.documents[arg]) == best);
    }
    const double rate = static_cast<double>(misses) / 1000.0;
    CHECK(std::abs(rate - 0.1) <= 0.03);
  }

  TEST_CASE("feature 0 correlates with the label") {
    const auto c = generate_synthetic_corpus(testing::small_spec(300, 1), 8);
    double pos = 0, neg = 0;
    std::size_t np = 0, nn = 0;
    for (const auto& ex : c.train)
      for (const auto& d : ex.documents) {
        if (d.label > 0) pos += d.traditional_features[0], ++np;
        else neg += d.traditional_features[0], ++nn;
      }
    CHECK(pos / np > neg / nn);
  }

  TEST_CASE("invalid specs are rejected") {
    auto spec = testing::small_spec();
    spec.docs_per_query = 0;
    CHECK_THROWS_AS(generate_synthetic_corpus(spec, 0), ConfigError);
    spec = testing::small_spec();
    spec.noise = 1.5;
    CHECK_THROWS_AS(generate_synthetic_corpus(spec, 0), ConfigError);
  }

  TEST_CASE("pretraining corpus uses the shared vocabulary") {
    const auto spec = testing::small_spec();
    const auto words = synthetic_words(spec);
    const std::set<std::string> vocab(words.begin(), words.end());
    for (const auto& s : generate_pretraining_corpus(spec, 50, 2))
      for (const auto& w : tokenize_words(s)) CHECK(vocab.contains(w));
    CHECK(generate_pretraining_corpus(spec, 20, 2) == generate_pretraining_corpus(spec, 20, 2));
  }
}
