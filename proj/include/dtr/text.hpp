// Copyright 2026 The dtr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace dtr {

using TokenId = std::int32_t;

// Lowercases and splits on Unicode whitespace and punctuation. Punctuation is
// dropped. Invalid UTF-8 bytes are treated as separators.
std::vector<std::string> tokenize_words(std::string_view text);

// Splits a UTF-8 string into code-point substrings.
std::vector<std::string> utf8_chars(std::string_view word);

class WordVocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kUnk = 1;
  static constexpr TokenId kReserved = 2;

  WordVocabulary();
  // Tokens in id order, reserved entries excluded.
  explicit WordVocabulary(std::vector<std::string> tokens);

  TokenId id(std::string_view token) const;
  const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return tokens_.size(); }

  // Word ids of `text`, truncated on the right to max_len (0 = unlimited).
  std::vector<TokenId> encode(std::string_view text, std::size_t max_len = 0) const;

  // Non-reserved tokens, one per line.
  void save(const std::filesystem::path& path) const;
  static WordVocabulary load(const std::filesystem::path& path);
  std::vector<std::string> regular_tokens() const { return {tokens_.begin() + kReserved, tokens_.end()}; }

  bool operator==(const WordVocabulary& o) const { return tokens_ == o.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

// Frequency-filtered word vocabulary; ids by descending count, ties lexicographic.
WordVocabulary build_word_vocab(std::span<const std::string> corpus, std::size_t min_count);

class SubwordVocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kUnk = 1;
  static constexpr TokenId kCls = 2;
  static constexpr TokenId kMask = 3;
  static constexpr TokenId kReserved = 4;

  SubwordVocabulary();
  // Subword units in id order (single characters first, then merges in the
  // order they were learned), reserved entries excluded.
  explicit SubwordVocabulary(std::vector<std::string> units);

  TokenId id(std::string_view unit) const;
  bool contains(std::string_view unit) const { return index_.contains(std::string(unit)); }
  const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return tokens_.size(); }
  std::size_t max_unit_chars() const { return max_unit_chars_; }

  void save(const std::filesystem::path& path) const;
  static SubwordVocabulary load(const std::filesystem::path& path);
  std::vector<std::string> regular_tokens() const { return {tokens_.begin() + kReserved, tokens_.end()}; }

  bool operator==(const SubwordVocabulary& o) const { return tokens_ == o.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  std::size_t max_unit_chars_ = 1;
};

// Byte-pair-encoding merge learning over the words of `corpus`. Ties between
// equally frequent pairs go to the lexicographically smallest (left, right).
// Stops early when no pair is left to merge.
SubwordVocabulary learn_subword_vocab(std::span<const std::string> corpus, std::size_t num_merges);

// [CLS] followed by the greedy longest-match segmentation of every word.
// Characters outside the learned alphabet become [UNK]. max_len counts the
// [CLS] token; 0 = unlimited.
std::vector<TokenId> tokenize_subwords(std::string_view text, const SubwordVocabulary& vocab,
                                       std::size_t max_len = 0);

}  // namespace dtr
