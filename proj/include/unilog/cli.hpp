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

// The `unilog` command and the dataset plumbing it shares with the tests:
// turning log files (or the synthetic generator) into labeled token windows.

#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "unilog/log_ingest.hpp"
#include "unilog/model.hpp"
#include "unilog/training.hpp"

namespace unilog::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

// Runs the command line `args` (without the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

// --- datasets ------------------------------------------------------------------

// Where log lines come from. With no input paths the synthetic generator is
// used and supplies its own labels and summaries.
struct SourceOptions {
  std::vector<std::string> inputs;
  std::vector<std::string> exclude_datasets;
  std::string labels_path;
  std::string summaries_path;
  ingest::LabelScheme scheme = ingest::LabelScheme::kPerLine;
  std::string block_pattern{ingest::kDefaultBlockPattern};
  ingest::SyntheticCorpusSpec synthetic;
};

struct Source {
  std::string dataset;  // directory name or file stem
  std::vector<ingest::LogRecord> records;
};

// Summaries keyed like labels (line index as text, or a window key) ->
// normalized tokens.
using SummaryMap = std::map<std::string, std::vector<std::string>>;

struct Corpus {
  std::vector<Source> sources;
  std::optional<ingest::LabelMap> labels;
  std::optional<SummaryMap> summaries;
  bool synthetic = false;
};

// Relative paths that do not exist are retried under $UNILOG_DATA_DIR.
std::filesystem::path resolve_data_path(const std::string& path);

Corpus load_corpus(const SourceOptions& opts);

struct Window {
  std::string key;  // first line index, or the block id
  std::vector<ingest::LogRecord> records;
};

// Fixed windows over each source, or one window per block id when the labels
// are per block.
std::vector<Window> make_windows(const Corpus& corpus, std::size_t window, std::size_t stride);

bool window_label(const Window& w, const Corpus& corpus);
// Distinct line summaries of the window, concatenated in order.
std::vector<std::string> window_summary(const Window& w, const SummaryMap& summaries);

// Token ids of every line of the window, each line followed by EOS.
std::vector<TokenId> window_ids(const tokenizer::Vocabulary& vocab, const Window& w);

// "key,tok tok tok" rows.
SummaryMap parse_summaries(std::string_view csv);

}  // namespace unilog::cli
