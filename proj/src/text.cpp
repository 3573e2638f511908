// Copyright 2026 The dtr Authors
// SPDX-License-Identifier: Apache-2.0

#include "dtr/text.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <utility>

#include "dtr/error.hpp"

namespace dtr {
namespace {

constexpr char32_t kInvalid = 0xFFFFFFFF;

// Decodes one code point starting at s[i]; advances i. Malformed sequences
// yield kInvalid and consume one byte.
char32_t decode_utf8(std::string_view s, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  std::size_t len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++i;
    return kInvalid;
  }
  if (i + len > s.size()) {
    ++i;
    return kInvalid;
  }
  for (std::size_t k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(s[i + k]);
    if ((b & 0xC0) != 0x80) {
      ++i;
      return kInvalid;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  i += len;
  return cp;
}

void encode_utf8(char32_t cp, std::string& out) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

bool is_space(char32_t c) {
  return c == ' ' || (c >= 0x09 && c <= 0x0D) || c == 0x85 || c == 0xA0 || c == 0x1680 ||
         (c >= 0x2000 && c <= 0x200A) || c == 0x2028 || c == 0x2029 || c == 0x202F || c == 0x205F ||
         c == 0x3000;
}

bool is_separator(char32_t c) {
  if (c == kInvalid || c < 0x20 || c == 0x7F) return true;
  if (c < 0x80) return !((c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'));
  return is_space(c) || (c >= 0x80 && c <= 0xBF) || c == 0xD7 || c == 0xF7 || (c >= 0x2000 && c <= 0x206F) ||
         (c >= 0x20A0 && c <= 0x20CF) || (c >= 0x2E00 && c <= 0x2E7F) || (c >= 0x3000 && c <= 0x303F) ||
         (c >= 0xFF01 && c <= 0xFF0F) || (c >= 0xFF1A && c <= 0xFF20) || (c >= 0xFF3B && c <= 0xFF40) ||
         (c >= 0xFF5B && c <= 0xFF65);
}

char32_t to_lower(char32_t c) {
  if (c >= 'A' && c <= 'Z') return c + 0x20;
  if (c < 0xC0) return c;
  if (c <= 0xDE) return c == 0xD7 ? c : c + 0x20;
  if (c >= 0x100 && c <= 0x137) return c | 1;
  if (c >= 0x139 && c <= 0x148) return (c & 1) ? c + 1 : c;
  if (c >= 0x14A && c <= 0x177) return c | 1;
  if (c == 0x178) return 0xFF;
  if (c >= 0x179 && c <= 0x17E) return (c & 1) ? c + 1 : c;
  if (c >= 0x391 && c <= 0x3A9 && c != 0x3A2) return c + 0x20;
  if (c >= 0x400 && c <= 0x40F) return c + 0x50;
  if (c >= 0x410 && c <= 0x42F) return c + 0x20;
  return c;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocabulary file " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

void write_lines(const std::filesystem::path& path, std::span<const std::string> lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write vocabulary file " + path.string());
  for (const auto& l : lines) out << l << '\n';
  if (!out) throw Error("failed writing vocabulary file " + path.string());
}

}  // namespace

std::vector<std::string> tokenize_words(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  std::size_t i = 0;
  while (i < text.size()) {
    const char32_t c = decode_utf8(text, i);
    if (is_separator(c)) {
      if (!current.empty()) out.push_back(std::move(current));
      current.clear();
      continue;
    }
    encode_utf8(to_lower(c), current);
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

std::vector<std::string> utf8_chars(std::string_view word) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < word.size()) {
    const std::size_t start = i;
    decode_utf8(word, i);
    out.emplace_back(word.substr(start, i - start));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Word vocabulary

WordVocabulary::WordVocabulary() : WordVocabulary(std::vector<std::string>{}) {}

WordVocabulary::WordVocabulary(std::vector<std::string> tokens) {
  tokens_ = {"<pad>", "<unk>"};
  for (auto& t : tokens) {
    if (t.empty()) throw DataError("word vocabulary: empty token");
    if (index_.contains(t)) throw DataError("word vocabulary: duplicate token '" + t + "'");
    index_.emplace(t, static_cast<TokenId>(tokens_.size()));
    tokens_.push_back(std::move(t));
  }
}

TokenId WordVocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

std::vector<TokenId> WordVocabulary::encode(std::string_view text, std::size_t max_len) const {
  std::vector<TokenId> ids;
  for (const auto& w : tokenize_words(text)) {
    if (max_len != 0 && ids.size() >= max_len) break;
    ids.push_back(id(w));
  }
  return ids;
}

void WordVocabulary::save(const std::filesystem::path& path) const {
  const auto lines = regular_tokens();
  write_lines(path, lines);
}

WordVocabulary WordVocabulary::load(const std::filesystem::path& path) { return WordVocabulary(read_lines(path)); }

WordVocabulary build_word_vocab(std::span<const std::string> corpus, std::size_t min_count) {
  if (min_count < 1) throw ConfigError("build_word_vocab: min_count must be >= 1");
  std::map<std::string, std::size_t> counts;
  for (const auto& line : corpus)
    for (auto& w : tokenize_words(line)) ++counts[std::move(w)];
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [w, c] : counts)
    if (c >= min_count) kept.emplace_back(w, c);
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens;
  tokens.reserve(kept.size());
  for (auto& [w, c] : kept) tokens.push_back(std::move(w));
  return WordVocabulary(std::move(tokens));
}

// ---------------------------------------------------------------------------
// Subword vocabulary

SubwordVocabulary::SubwordVocabulary() : SubwordVocabulary(std::vector<std::string>{}) {}

SubwordVocabulary::SubwordVocabulary(std::vector<std::string> units) {
  tokens_ = {"[PAD]", "[UNK]", "[CLS]", "[MASK]"};
  for (const auto& t : tokens_) index_.emplace(t, static_cast<TokenId>(index_.size()));
  for (auto& u : units) {
    if (u.empty()) throw DataError("subword vocabulary: empty unit");
    if (index_.contains(u)) throw DataError("subword vocabulary: duplicate unit '" + u + "'");
    max_unit_chars_ = std::max(max_unit_chars_, utf8_chars(u).size());
    index_.emplace(u, static_cast<TokenId>(tokens_.size()));
    tokens_.push_back(std::move(u));
  }
}

TokenId SubwordVocabulary::id(std::string_view unit) const {
  auto it = index_.find(std::string(unit));
  return it == index_.end() ? kUnk : it->second;
}

void SubwordVocabulary::save(const std::filesystem::path& path) const {
  const auto lines = regular_tokens();
  write_lines(path, lines);
}

SubwordVocabulary SubwordVocabulary::load(const std::filesystem::path& path) {
  return SubwordVocabulary(read_lines(path));
}

SubwordVocabulary learn_subword_vocab(std::span<const std::string> corpus, std::size_t num_merges) {
  std::map<std::string, std::size_t> word_counts;
  for (const auto& line : corpus)
    for (auto& w : tokenize_words(line)) ++word_counts[std::move(w)];

  std::vector<std::vector<std::string>> words;
  std::vector<std::size_t> freq;
  std::set<std::string> alphabet;
  for (const auto& [w, c] : word_counts) {
    words.push_back(utf8_chars(w));
    freq.push_back(c);
    alphabet.insert(words.back().begin(), words.back().end());
  }

  std::vector<std::string> units(alphabet.begin(), alphabet.end());
  std::set<std::string> known(alphabet.begin(), alphabet.end());
  for (std::size_t merge = 0; merge < num_merges; ++merge) {
    std::map<std::pair<std::string, std::string>, std::size_t> pair_counts;
    for (std::size_t k = 0; k < words.size(); ++k)
      for (std::size_t i = 0; i + 1 < words[k].size(); ++i) pair_counts[{words[k][i], words[k][i + 1]}] += freq[k];
    if (pair_counts.empty()) break;
    auto best = pair_counts.begin();
    for (auto it = pair_counts.begin(); it != pair_counts.end(); ++it)
      if (it->second > best->second) best = it;
    const auto [left, right] = best->first;
    const std::string merged = left + right;
    for (auto& symbols : words) {
      std::vector<std::string> next;
      next.reserve(symbols.size());
      for (std::size_t i = 0; i < symbols.size(); ++i) {
        if (i + 1 < symbols.size() && symbols[i] == left && symbols[i + 1] == right) {
          next.push_back(merged);
          ++i;
        } else {
          next.push_back(std::move(symbols[i]));
        }
      }
      symbols = std::move(next);
    }
    if (known.insert(merged).second) units.push_back(merged);
  }
  return SubwordVocabulary(std::move(units));
}

std::vector<TokenId> tokenize_subwords(std::string_view text, const SubwordVocabulary& vocab, std::size_t max_len) {
  std::vector<TokenId> ids{SubwordVocabulary::kCls};
  const auto full = [&] { return max_len != 0 && ids.size() >= max_len; };
  for (const auto& word : tokenize_words(text)) {
    const auto chars = utf8_chars(word);
    std::size_t i = 0;
    while (i < chars.size()) {
      if (full()) return ids;
      const std::size_t longest = std::min(vocab.max_unit_chars(), chars.size() - i);
      TokenId found = SubwordVocabulary::kUnk;
      std::size_t used = 1;
      for (std::size_t len = longest; len >= 1; --len) {
        std::string candidate;
        for (std::size_t k = i; k < i + len; ++k) candidate += chars[k];
        if (vocab.contains(candidate)) {
          found = vocab.id(candidate);
          used = len;
          break;
        }
      }
      ids.push_back(found);
      i += used;
    }
  }
  return ids;
}

}  // namespace dtr
