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

// Loading raw log files and labels, windowing streams into sequences, and the
// seeded synthetic corpus used for desk-scale experiments.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace unilog::ingest {

struct LogRecord {
  std::size_t line_index = 0;
  std::string raw_text;
  std::string source_id;

  bool operator==(const LogRecord&) const = default;
};

enum class AnomalyLabel { kNormal, kAnomalous };
enum class FailureLabel { kNoFailure, kFailure };
struct SummaryLabel {
  std::vector<std::string> tokens;
  bool operator==(const SummaryLabel&) const = default;
};

using WindowLabel = std::variant<std::monostate, AnomalyLabel, FailureLabel, SummaryLabel>;

struct LabeledWindow {
  std::vector<LogRecord> records;
  WindowLabel label;
};

/// Reads a newline-delimited text file. Empty lines are skipped but still
/// consume a line index. Invalid UTF-8 bytes are replaced by U+FFFD; the count
/// of replaced bytes is written to `replaced_bytes` when given and reported as
/// a warning on stderr.
std::vector<LogRecord> load_log_lines(const std::filesystem::path& path,
                                      std::string_view source_id,
                                      std::size_t* replaced_bytes = nullptr);

/// Splits `text` the same way load_log_lines splits a file.
std::vector<LogRecord> split_log_lines(std::string_view text, std::string_view source_id,
                                       std::size_t* replaced_bytes = nullptr);

/// Replaces every byte that is not part of a well-formed UTF-8 sequence with
/// U+FFFD. Returns the number of replaced bytes.
std::size_t sanitize_utf8(std::string& text);

/// Fixed-size windows starting at 0, stride, 2*stride, ...; a shorter final
/// window is kept.
std::vector<LabeledWindow> window_logs(const std::vector<LogRecord>& records, std::size_t window,
                                       std::size_t stride);

inline constexpr std::size_t kDefaultWindow = 20;
inline constexpr std::size_t kDefaultStride = 20;

enum class LabelScheme { kPerLine, kPerBlock };

/// Binary labels keyed by line index (per_line) or session key (per_block).
/// true means the positive class (anomalous / failure).
using LabelMap = std::map<std::string, bool>;

/// Parses a two-column `key,label` CSV. A header row is detected and skipped.
/// Labels are case-insensitive: anomaly/anomalous/abnormal/failure/1/true are
/// positive, normal/no_failure/0/false negative.
LabelMap load_labels(const std::filesystem::path& path, LabelScheme scheme);
LabelMap parse_labels(std::string_view csv, LabelScheme scheme);

inline constexpr std::string_view kDefaultBlockPattern = R"(blk_-?[0-9]+)";

/// Groups records into sessions by the first match of `pattern` (HDFS block
/// ids by default). Records without a match are dropped. Sessions are ordered
/// by first appearance.
std::vector<std::pair<std::string, std::vector<LogRecord>>> group_by_key(
    const std::vector<LogRecord>& records, std::string_view pattern = kDefaultBlockPattern);

/// A window is positive when any of its records' line indices is labeled
/// positive (per-line scheme).
bool window_is_positive(const LabeledWindow& window, const LabelMap& labels);

struct SyntheticCorpusSpec {
  std::size_t n_templates = 10;
  std::size_t n_lines = 1000;
  double anomaly_rate = 0.05;
  std::uint64_t rng_seed = 7;
};

struct SyntheticCorpus {
  std::vector<LogRecord> records;
  /// Per-line anomaly flags, keyed by line index.
  std::map<std::size_t, bool> anomalous;
  /// Per-line keyword triple of the line's template, keyed by line index.
  std::map<std::size_t, std::vector<std::string>> summaries;
  /// Template index of every line; anomalous templates come after the normal ones.
  std::vector<std::size_t> template_of_line;
  std::vector<std::string> templates;

  LabelMap label_map() const;
  std::string text() const;
};

/// Deterministic in `spec`. Normal lines come from `n_templates` templates
/// with numeric and hex variable fields; anomalous lines come from a disjoint
/// set of templates sharing no words with the normal ones.
SyntheticCorpus generate_synthetic_corpus(const SyntheticCorpusSpec& spec);

/// Word pools the generator draws from, exposed for vocabulary tests.
const std::vector<std::string_view>& synthetic_normal_words();
const std::vector<std::string_view>& synthetic_anomaly_words();

/// Summary of a window: keyword triples of its distinct templates, in order
/// of first appearance.
std::vector<std::string> window_summary(const LabeledWindow& window, const SyntheticCorpus& corpus);

}  // namespace unilog::ingest
