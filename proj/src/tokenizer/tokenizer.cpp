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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "unilog/tokenizer.hpp"

namespace unilog::tokenizer {

extern const char* const kEmbeddedUnigramWords;

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' || c == '\f';
}

char ascii_lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = ascii_lower(c);
  return out;
}

bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_hex(char c) {
  return is_digit(c) || (c >= 'a' && c <= 'f') || (c >= 'A' && c <= 'F');
}

// Words whose trailing -s/-ed/-ing is not an inflection.
const std::unordered_set<std::string_view>& suffix_exceptions() {
  static const std::unordered_set<std::string_view> kWords = {
      "always",  "perhaps", "news",    "series",  "species", "whereas", "was",
      "has",     "does",    "goes",    "his",     "its",     "hers",    "ours",
      "yours",   "theirs",  "lens",    "canvas",  "atlas",   "alias",   "bias",
      "gas",     "hdfs",    "nfs",     "https",   "sys",     "during",  "nothing",
      "something", "anything", "everything", "string", "thing", "morning", "evening",
      "ceiling", "spring",  "bring",   "king",    "ring",    "sing",    "swing",
      "wing",    "sling",   "sting",   "ping",    "speed",   "seed",    "feed",
      "need",    "indeed",  "embed",   "bed",     "red",     "shed",    "bred",
      "hundred", "kindred", "sacred",  "naked",   "wicked",  "rugged",  "ragged",
      "bled",    "fled",    "led",     "wed",     "sled",    "proceed", "succeed",
      "exceed",  "breed",   "greed",   "weed",    "reed",    "tweed",   "steed",
  };
  return kWords;
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

bool is_vowel(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u'; }

// Best-ranked table entry among the candidates, if any is in the table.
std::optional<std::string> best_ranked(const std::vector<std::string>& candidates,
                                       const UnigramTable& table) {
  std::optional<std::string> best;
  std::size_t best_rank = std::numeric_limits<std::size_t>::max();
  for (const auto& c : candidates) {
    if (c.size() < 3) continue;
    if (auto r = table.rank(c); r && *r < best_rank) {
      best_rank = *r;
      best = c;
    }
  }
  return best;
}

std::string undouble(const std::string& stem) {
  const std::size_t n = stem.size();
  if (n >= 2 && stem[n - 1] == stem[n - 2] && is_alpha(stem[n - 1]) && !is_vowel(stem[n - 1])) {
    return stem.substr(0, n - 1);
  }
  return stem;
}

struct Fragment {
  std::size_t begin;
  std::size_t end;
};

std::vector<Fragment> split_with_offsets(std::string_view raw) {
  std::vector<Fragment> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= raw.size(); ++i) {
    if (i == raw.size() || is_space(raw[i]) || is_delimiter(raw[i])) {
      if (i > start) out.push_back({start, i});
      start = i + 1;
    }
  }
  return out;
}

struct Piece {
  std::size_t begin;
  std::size_t end;
};

std::vector<Piece> segment_pieces(std::string_view fragment, const UnigramTable& table) {
  const std::size_t n = fragment.size();
  if (n == 0) return {};
  const std::string lower = to_lower(fragment);
  const bool has_digit = std::any_of(lower.begin(), lower.end(), is_digit);
  constexpr std::size_t kMaxNumericLen = 64;

  std::vector<double> best(n + 1, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> back(n + 1, 0);
  std::vector<bool> residue(n + 1, false);
  best[0] = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    const std::size_t lo_word = i > table.max_word_len() ? i - table.max_word_len() : 0;
    const std::size_t lo_num = i > kMaxNumericLen ? i - kMaxNumericLen : 0;
    for (std::size_t j = has_digit ? std::min(lo_word, lo_num) : lo_word; j < i; ++j) {
      const std::string_view piece(lower.data() + j, i - j);
      double cost = std::numeric_limits<double>::infinity();
      if (j >= lo_word) {
        if (auto c = table.word_cost(piece)) cost = *c;
      }
      if (has_digit && j >= lo_num && is_numeric_literal(piece)) {
        cost = std::min(cost, kNumericPieceCost);
      }
      if (best[j] + cost < best[i]) {
        best[i] = best[j] + cost;
        back[i] = j;
        residue[i] = false;
      }
    }
    if (best[i - 1] + kOutOfTablePenalty < best[i]) {
      best[i] = best[i - 1] + kOutOfTablePenalty;
      back[i] = i - 1;
      residue[i] = true;
    }
  }

  std::vector<Piece> pieces;
  std::vector<bool> piece_is_residue;
  for (std::size_t i = n; i > 0; i = back[i]) {
    pieces.push_back({back[i], i});
    piece_is_residue.push_back(residue[i]);
  }
  std::reverse(pieces.begin(), pieces.end());
  std::reverse(piece_is_residue.begin(), piece_is_residue.end());

  std::vector<Piece> merged;
  for (std::size_t k = 0; k < pieces.size(); ++k) {
    if (k > 0 && piece_is_residue[k] && piece_is_residue[k - 1]) {
      merged.back().end = pieces[k].end;
    } else {
      merged.push_back(pieces[k]);
    }
  }
  return merged;
}

}  // namespace

bool is_delimiter(char c) { return kDelimiters.find(c) != std::string_view::npos; }

UnigramTable::UnigramTable(std::vector<std::string> words_by_rank) {
  for (auto& w : words_by_rank) {
    w = to_lower(w);
    if (w.empty() || ranks_.count(w)) continue;
    ranks_.emplace(w, words_.size());
    max_word_len_ = std::max(max_word_len_, w.size());
    words_.push_back(std::move(w));
  }
  if (words_.empty()) throw DataError("unigram table is empty");
  log_size_ = std::log(static_cast<double>(std::max<std::size_t>(words_.size(), 2)));
}

UnigramTable UnigramTable::parse(std::string_view text) {
  std::vector<std::string> words;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    // Tolerate "word<whitespace>frequency" lines by keeping the first field.
    std::size_t cut = 0;
    while (cut < line.size() && !is_space(line[cut])) ++cut;
    if (cut > 0) words.emplace_back(line.substr(0, cut));
    start = end + 1;
  }
  return UnigramTable(std::move(words));
}

UnigramTable UnigramTable::load(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  return parse(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

const UnigramTable& UnigramTable::embedded() {
  static const UnigramTable table = parse(kEmbeddedUnigramWords);
  return table;
}

namespace {
std::optional<UnigramTable>& active_override() {
  static std::optional<UnigramTable> table;
  return table;
}
}  // namespace

const UnigramTable& UnigramTable::active() {
  const auto& o = active_override();
  return o ? *o : embedded();
}

void UnigramTable::set_active(std::optional<UnigramTable> table) { active_override() = std::move(table); }

Sha256 UnigramTable::content_hash() const {
  std::string joined;
  for (const auto& w : words_) {
    joined += w;
    joined += '\n';
  }
  return sha256(joined);
}

std::optional<std::size_t> UnigramTable::rank(std::string_view lower_word) const {
  auto it = ranks_.find(lower_word);
  if (it == ranks_.end()) return std::nullopt;
  return it->second;
}

std::optional<double> UnigramTable::word_cost(std::string_view lower_word) const {
  auto r = rank(lower_word);
  if (!r) return std::nullopt;
  return std::log(static_cast<double>(*r + 1) * log_size_);
}

bool is_numeric_literal(std::string_view s) {
  if (s.empty()) return false;
  if (std::all_of(s.begin(), s.end(), is_digit)) return true;
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    return std::all_of(s.begin() + 2, s.end(), is_hex);
  }
  return std::all_of(s.begin(), s.end(), is_hex) && std::any_of(s.begin(), s.end(), is_digit);
}

std::vector<std::string> split_delimiters(std::string_view raw) {
  std::vector<std::string> out;
  for (const auto& f : split_with_offsets(raw)) out.emplace_back(raw.substr(f.begin, f.end - f.begin));
  return out;
}

double piece_cost(std::string_view piece, const UnigramTable& table) {
  const std::string lower = to_lower(piece);
  double cost = kOutOfTablePenalty * static_cast<double>(piece.size());
  if (auto c = table.word_cost(lower)) cost = std::min(cost, *c);
  if (is_numeric_literal(lower)) cost = std::min(cost, kNumericPieceCost);
  return cost;
}

std::vector<std::string> segment_unigram(std::string_view fragment, const UnigramTable& table) {
  std::vector<std::string> out;
  for (const auto& p : segment_pieces(fragment, table)) {
    out.emplace_back(fragment.substr(p.begin, p.end - p.begin));
  }
  return out;
}

std::string normalize(std::string_view token, const UnigramTable& table) {
  std::string w = to_lower(token);
  if (w.empty()) return w;
  if (is_numeric_literal(w)) return std::string(kNumToken);
  if (suffix_exceptions().count(w)) return w;

  std::vector<std::string> candidates;
  if (ends_with(w, "ing") && w.size() - 3 >= 3) {
    std::string stem = w.substr(0, w.size() - 3);
    candidates = {stem, stem + "e", undouble(stem)};
  } else if (ends_with(w, "ed") && w.size() - 2 >= 3) {
    std::string stem = w.substr(0, w.size() - 2);
    candidates = {stem, w.substr(0, w.size() - 1), undouble(stem)};
  } else if (ends_with(w, "s") && w.size() - 1 >= 3 && !ends_with(w, "ss") && !ends_with(w, "us") &&
             !ends_with(w, "is")) {
    candidates = {w.substr(0, w.size() - 1)};
    if (ends_with(w, "es")) candidates.push_back(w.substr(0, w.size() - 2));
  }
  if (candidates.empty()) return w;
  if (auto best = best_ranked(candidates, table)) return *best;
  return w;
}

std::vector<TokenSpan> tokenize_with_spans(std::string_view raw, const UnigramTable& table) {
  std::vector<TokenSpan> out;
  for (const auto& f : split_with_offsets(raw)) {
    const std::string_view fragment = raw.substr(f.begin, f.end - f.begin);
    for (const auto& p : segment_pieces(fragment, table)) {
      const std::string_view piece = fragment.substr(p.begin, p.end - p.begin);
      out.push_back({normalize(piece, table), f.begin + p.begin, f.begin + p.end});
    }
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view raw, const UnigramTable& table) {
  std::vector<std::string> out;
  for (auto& s : tokenize_with_spans(raw, table)) out.push_back(std::move(s.token));
  return out;
}

}  // namespace unilog::tokenizer
