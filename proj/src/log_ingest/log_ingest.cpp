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
#include <iostream>
#include <optional>
#include <regex>
#include <unordered_map>

#include "unilog/binary_io.hpp"
#include "unilog/common.hpp"
#include "unilog/log_ingest.hpp"

namespace unilog::ingest {

namespace {

constexpr std::string_view kReplacement = "\xEF\xBF\xBD";

// Length of the well-formed UTF-8 sequence starting at s[i], or 0.
std::size_t utf8_sequence_length(std::string_view s, std::size_t i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  if (b0 < 0x80) return 1;
  std::size_t len;
  unsigned char lo = 0x80, hi = 0xBF;
  if (b0 >= 0xC2 && b0 <= 0xDF) {
    len = 2;
  } else if (b0 >= 0xE0 && b0 <= 0xEF) {
    len = 3;
    if (b0 == 0xE0) lo = 0xA0;
    if (b0 == 0xED) hi = 0x9F;
  } else if (b0 >= 0xF0 && b0 <= 0xF4) {
    len = 4;
    if (b0 == 0xF0) lo = 0x90;
    if (b0 == 0xF4) hi = 0x8F;
  } else {
    return 0;
  }
  if (i + len > s.size()) return 0;
  for (std::size_t k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(s[i + k]);
    const unsigned char l = k == 1 ? lo : 0x80;
    const unsigned char h = k == 1 ? hi : 0xBF;
    if (b < l || b > h) return 0;
  }
  return len;
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::optional<bool> parse_label(const std::string& raw) {
  const std::string s = lower(raw);
  static const std::string_view kPositive[] = {"anomaly", "anomalous", "abnormal", "failure",
                                               "fail",    "1",         "true",     "positive"};
  static const std::string_view kNegative[] = {"normal", "no_failure", "nofailure", "0",
                                               "false",  "negative",   "ok"};
  for (auto p : kPositive) {
    if (s == p) return true;
  }
  for (auto n : kNegative) {
    if (s == n) return false;
  }
  return std::nullopt;
}

}  // namespace

std::size_t sanitize_utf8(std::string& text) {
  std::string out;
  std::size_t replaced = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    const std::size_t len = utf8_sequence_length(text, i);
    if (len == 0) {
      if (replaced == 0) out.assign(text, 0, i);
      out += kReplacement;
      ++replaced;
      ++i;
      continue;
    }
    if (replaced > 0) out.append(text, i, len);
    i += len;
  }
  if (replaced > 0) text = std::move(out);
  return replaced;
}

std::vector<LogRecord> split_log_lines(std::string_view text, std::string_view source_id,
                                       std::size_t* replaced_bytes) {
  std::vector<LogRecord> records;
  std::size_t replaced = 0;
  std::size_t line_index = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) {
      std::string raw(line);
      replaced += sanitize_utf8(raw);
      records.push_back({line_index, std::move(raw), std::string(source_id)});
    }
    ++line_index;
    start = end + 1;
  }
  if (replaced_bytes) *replaced_bytes = replaced;
  if (replaced > 0) {
    std::cerr << "warning: " << source_id << ": replaced " << replaced << " invalid UTF-8 byte(s)\n";
  }
  return records;
}

std::vector<LogRecord> load_log_lines(const std::filesystem::path& path, std::string_view source_id,
                                      std::size_t* replaced_bytes) {
  const Bytes bytes = read_file(path);
  return split_log_lines(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()),
                         source_id, replaced_bytes);
}

std::vector<LabeledWindow> window_logs(const std::vector<LogRecord>& records, std::size_t window,
                                       std::size_t stride) {
  if (window == 0 || stride == 0) throw UsageError("window_logs: window and stride must be >= 1");
  std::vector<LabeledWindow> out;
  for (std::size_t start = 0; start < records.size(); start += stride) {
    const std::size_t end = std::min(records.size(), start + window);
    LabeledWindow w;
    w.records.assign(records.begin() + static_cast<std::ptrdiff_t>(start),
                     records.begin() + static_cast<std::ptrdiff_t>(end));
    out.push_back(std::move(w));
    if (end == records.size()) break;
  }
  return out;
}

LabelMap parse_labels(std::string_view csv, LabelScheme scheme) {
  LabelMap labels;
  std::size_t start = 0;
  std::size_t row = 0;
  while (start < csv.size()) {
    std::size_t end = csv.find('\n', start);
    if (end == std::string_view::npos) end = csv.size();
    const std::string_view line = csv.substr(start, end - start);
    start = end + 1;
    ++row;
    if (trim(line).empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string_view::npos) {
      throw DataError("labels row " + std::to_string(row) + ": expected key,label");
    }
    std::string key = trim(line.substr(0, comma));
    std::string value = trim(line.substr(comma + 1));
    auto parsed = parse_label(value);
    if (!parsed) {
      if (labels.empty() && row == 1) continue;  // header row
      throw DataError("labels row " + std::to_string(row) + ": unknown label '" + value + "'");
    }
    if (scheme == LabelScheme::kPerLine) {
      if (key.empty() || !std::all_of(key.begin(), key.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        throw DataError("labels row " + std::to_string(row) + ": per-line key '" + key + "' is not a line index");
      }
    }
    if (!labels.emplace(key, *parsed).second) {
      throw DataError("labels row " + std::to_string(row) + ": duplicate key '" + key + "'");
    }
  }
  return labels;
}

LabelMap load_labels(const std::filesystem::path& path, LabelScheme scheme) {
  const Bytes bytes = read_file(path);
  return parse_labels(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), scheme);
}

std::vector<std::pair<std::string, std::vector<LogRecord>>> group_by_key(
    const std::vector<LogRecord>& records, std::string_view pattern) {
  const std::regex re{std::string(pattern)};
  std::vector<std::pair<std::string, std::vector<LogRecord>>> sessions;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& r : records) {
    std::smatch m;
    if (!std::regex_search(r.raw_text, m, re)) continue;
    const std::string key = m.str(0);
    auto [it, inserted] = index.emplace(key, sessions.size());
    if (inserted) sessions.emplace_back(key, std::vector<LogRecord>{});
    sessions[it->second].second.push_back(r);
  }
  return sessions;
}

bool window_is_positive(const LabeledWindow& window, const LabelMap& labels) {
  for (const auto& r : window.records) {
    auto it = labels.find(std::to_string(r.line_index));
    if (it != labels.end() && it->second) return true;
  }
  return false;
}

}  // namespace unilog::ingest
