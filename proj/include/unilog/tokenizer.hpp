// Copyright 2026 The unilog Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Log text preprocessing: delimiter splitting, unigram word segmentation,
// normalization, and the token vocabulary.

#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "unilog/binary_io.hpp"
#include "unilog/common.hpp"

namespace unilog::tokenizer {

// Characters that always separate tokens, in addition to ASCII whitespace.
inline constexpr std::string_view kDelimiters = ".,:/;_=-\"";

bool is_delimiter(char c);

/// Frequency-ranked word list. Rank 0 is the most frequent word. Words are
/// stored lowercase.
class UnigramTable {
 public:
  explicit UnigramTable(std::vector<std::string> words_by_rank);

  /// One word per line, most frequent first (the wordninja format).
  static UnigramTable parse(std::string_view text);
  static UnigramTable load(const std::filesystem::path& path);
  /// The table compiled into the library.
  static const UnigramTable& embedded();
  /// The table used when a caller passes none: the embedded one unless
  /// replaced. Replace it only before any tokenization starts.
  static const UnigramTable& active();
  static void set_active(std::optional<UnigramTable> table);

  /// SHA-256 of the words in rank order, newline separated.
  Sha256 content_hash() const;

  std::optional<std::size_t> rank(std::string_view lower_word) const;
  /// log((rank + 1) * log(size)) for table words; nullopt otherwise.
  std::optional<double> word_cost(std::string_view lower_word) const;

  std::size_t size() const { return words_.size(); }
  std::size_t max_word_len() const { return max_word_len_; }
  const std::vector<std::string>& words() const { return words_; }

 private:
  struct StringHash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const { return std::hash<std::string_view>{}(s); }
  };
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t, StringHash, std::equal_to<>> ranks_;
  std::size_t max_word_len_ = 0;
  double log_size_ = 0.0;
};

// Per-character cost of text that no table word covers.
inline constexpr double kOutOfTablePenalty = 1000.0;
// Cost of a run of digits or a hex literal kept as one piece.
inline constexpr double kNumericPieceCost = 1.0;

/// True for pure digit strings and hex literals (`0x` prefix, or hex digits
/// with at least one decimal digit). Case-insensitive.
bool is_numeric_literal(std::string_view s);

/// Splits on whitespace and on every delimiter character; delimiters are
/// discarded and empty fragments dropped.
std::vector<std::string> split_delimiters(std::string_view raw);

/// Minimum-cost segmentation of a delimiter-free fragment. Pieces keep the
/// original casing and concatenate back to `fragment`. Adjacent characters no
/// table word covers are returned together as one residue piece.
std::vector<std::string> segment_unigram(std::string_view fragment, const UnigramTable& table);

/// Cost of one piece under the segmentation objective.
double piece_cost(std::string_view piece, const UnigramTable& table);

inline constexpr std::string_view kNumToken = "<num>";

/// Lowercases, maps numeric literals to <num>, and folds the inflectional
/// suffixes -ing, -ed and -s onto their stem.
std::string normalize(std::string_view token, const UnigramTable& table = UnigramTable::active());

/// A normalized token together with the byte range of the raw text it came
/// from.
struct TokenSpan {
  std::string token;
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// split_delimiters, segment_unigram, then normalize.
std::vector<std::string> tokenize(std::string_view raw,
                                  const UnigramTable& table = UnigramTable::active());
std::vector<TokenSpan> tokenize_with_spans(std::string_view raw,
                                           const UnigramTable& table = UnigramTable::active());

// ---------------------------------------------------------------------------
// Vocabulary

inline constexpr std::size_t kNumSentinels = 64;

struct SpecialIds {
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kUnk = 1;
  static constexpr TokenId kNum = 2;
  static constexpr TokenId kEos = 3;
  static constexpr TokenId kBos = 4;
  static constexpr TokenId kFirstSentinel = 5;
  static constexpr TokenId kFirstTaskPrefix = kFirstSentinel + static_cast<TokenId>(kNumSentinels);
  static constexpr TokenId kFirstRegular = kFirstTaskPrefix + 4;

  static constexpr TokenId sentinel(std::size_t i) {
    return kFirstSentinel + static_cast<TokenId>(i < kNumSentinels ? i : kNumSentinels - 1);
  }
  static constexpr bool is_sentinel(TokenId id) {
    return id >= kFirstSentinel && id < kFirstTaskPrefix;
  }
  static constexpr TokenId task_prefix(TaskKind t) {
    return kFirstTaskPrefix + static_cast<TokenId>(t);
  }
  static constexpr bool is_task_prefix(TokenId id) {
    return id >= kFirstTaskPrefix && id < kFirstRegular;
  }
};

std::string_view task_name(TaskKind t);
std::string_view task_prefix_token(TaskKind t);
std::optional<TaskKind> parse_task(std::string_view name);
std::optional<TaskKind> task_from_prefix_token(std::string_view token);

class Vocabulary {
 public:
  /// Only the reserved special tokens.
  Vocabulary();

  std::size_t size() const { return id_to_token_.size(); }
  TokenId id(std::string_view token) const;  // UNK for unknown tokens
  std::optional<TokenId> find(std::string_view token) const;
  const std::string& token(TokenId id) const;  // throws UsageError when out of range

  std::vector<TokenId> encode(std::span<const std::string> tokens) const;
  std::vector<std::string> decode(std::span<const TokenId> ids) const;

  /// Appends a regular token if absent; returns its id.
  TokenId add(std::string_view token);

  /// Versioned text format: a header naming the special ids followed by one
  /// `token<TAB>id` line per entry.
  std::string serialize() const;
  static Vocabulary parse(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);
  Sha256 content_hash() const { return sha256(serialize()); }

  bool operator==(const Vocabulary& other) const { return id_to_token_ == other.id_to_token_; }

 private:
  struct StringHash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const { return std::hash<std::string_view>{}(s); }
  };
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, TokenId, StringHash, std::equal_to<>> token_to_id_;
};

/// Tokens with count >= min_count receive ids in descending-frequency order
/// (ties broken by token text) after the reserved range.
Vocabulary build_vocab(std::span<const std::vector<std::string>> corpus, std::size_t min_count = 1);

/// Tokenized text together with its vocabulary ids.
struct TokenSequence {
  std::vector<std::string> tokens;
  std::vector<TokenId> ids;
};

TokenSequence make_sequence(std::string_view raw, const Vocabulary& vocab,
                            const UnigramTable& table = UnigramTable::active());

}  // namespace unilog::tokenizer
