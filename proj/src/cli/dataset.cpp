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
#include <cstdlib>
#include <set>

#include "unilog/binary_io.hpp"
#include "unilog/cli.hpp"
#include "unilog/tokenizer.hpp"

namespace unilog::cli {

namespace fs = std::filesystem;

fs::path resolve_data_path(const std::string& path) {
  fs::path p(path);
  if (fs::exists(p) || p.is_absolute()) return p;
  if (const char* root = std::getenv("UNILOG_DATA_DIR"); root && *root) {
    fs::path alt = fs::path(root) / p;
    if (fs::exists(alt)) return alt;
  }
  return p;
}

namespace {

bool excluded(const SourceOptions& opts, const std::string& dataset) {
  return std::find(opts.exclude_datasets.begin(), opts.exclude_datasets.end(), dataset) !=
         opts.exclude_datasets.end();
}

std::string line_key(std::size_t line) { return std::to_string(line); }

}  // namespace

Corpus load_corpus(const SourceOptions& opts) {
  Corpus corpus;
  if (opts.inputs.empty()) {
    ingest::SyntheticCorpus syn = ingest::generate_synthetic_corpus(opts.synthetic);
    corpus.synthetic = true;
    if (!excluded(opts, "synthetic")) corpus.sources.push_back({"synthetic", std::move(syn.records)});
    corpus.labels = syn.label_map();
    SummaryMap summaries;
    for (const auto& [line, words] : syn.summaries) {
      std::vector<std::string> tokens;
      for (const auto& w : words) {
        for (auto& t : tokenizer::tokenize(w)) tokens.push_back(std::move(t));
      }
      summaries.emplace(line_key(line), std::move(tokens));
    }
    corpus.summaries = std::move(summaries);
  } else {
    for (const std::string& input : opts.inputs) {
      const fs::path p = resolve_data_path(input);
      if (!fs::exists(p)) throw DataError("input not found: " + input);
      if (fs::is_directory(p)) {
        const std::string dataset = p.filename().empty() ? p.parent_path().filename().string()
                                                         : p.filename().string();
        if (excluded(opts, dataset)) continue;
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(p)) {
          if (entry.is_regular_file()) files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        for (const fs::path& f : files) corpus.sources.push_back({dataset, ingest::load_log_lines(f, dataset)});
      } else {
        const std::string dataset = p.stem().string();
        if (excluded(opts, dataset)) continue;
        corpus.sources.push_back({dataset, ingest::load_log_lines(p, dataset)});
      }
    }
    if (!opts.labels_path.empty()) {
      if (opts.scheme == ingest::LabelScheme::kPerLine && corpus.sources.size() > 1) {
        throw UsageError("per-line labels need exactly one input file");
      }
      corpus.labels = ingest::load_labels(resolve_data_path(opts.labels_path), opts.scheme);
    }
    if (!opts.summaries_path.empty()) {
      const Bytes raw = read_file(resolve_data_path(opts.summaries_path));
      corpus.summaries = parse_summaries(std::string_view(reinterpret_cast<const char*>(raw.data()), raw.size()));
    }
  }
  if (corpus.sources.empty()) throw UsageError("no input data left after exclusions");
  return corpus;
}

std::vector<Window> make_windows(const Corpus& corpus, std::size_t window, std::size_t stride) {
  if (window == 0 || stride == 0) throw UsageError("window and stride must be positive");
  std::vector<Window> out;
  const bool tag = corpus.sources.size() > 1;
  for (std::size_t s = 0; s < corpus.sources.size(); ++s) {
    const Source& src = corpus.sources[s];
    const std::string prefix = tag ? src.dataset + "#" + std::to_string(s) + ":" : "";
    for (ingest::LabeledWindow& w : ingest::window_logs(src.records, window, stride)) {
      std::string key = prefix + line_key(w.records.front().line_index);
      out.push_back({std::move(key), std::move(w.records)});
    }
  }
  return out;
}

bool window_label(const Window& w, const Corpus& corpus) {
  if (!corpus.labels) throw UsageError("this command needs labels (--labels)");
  ingest::LabeledWindow lw{w.records, {}};
  return ingest::window_is_positive(lw, *corpus.labels);
}

std::vector<std::string> window_summary(const Window& w, const SummaryMap& summaries) {
  std::vector<std::string> out;
  std::set<std::vector<std::string>> seen;
  for (const auto& r : w.records) {
    auto it = summaries.find(line_key(r.line_index));
    if (it == summaries.end() || !seen.insert(it->second).second) continue;
    out.insert(out.end(), it->second.begin(), it->second.end());
  }
  return out;
}

std::vector<TokenId> window_ids(const tokenizer::Vocabulary& vocab, const Window& w) {
  std::vector<TokenId> ids;
  for (const auto& r : w.records) {
    const tokenizer::TokenSequence seq = tokenizer::make_sequence(r.raw_text, vocab);
    ids.insert(ids.end(), seq.ids.begin(), seq.ids.end());
    ids.push_back(tokenizer::SpecialIds::kEos);
  }
  return ids;
}

SummaryMap parse_summaries(std::string_view csv) {
  SummaryMap out;
  std::size_t start = 0;
  std::size_t row = 0;
  while (start < csv.size()) {
    std::size_t end = csv.find('\n', start);
    if (end == std::string_view::npos) end = csv.size();
    std::string_view line = csv.substr(start, end - start);
    start = end + 1;
    ++row;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string_view::npos) {
      throw DataError("summaries row " + std::to_string(row) + ": expected key,summary");
    }
    const std::string key(line.substr(0, comma));
    if (row == 1 && key == "key") continue;
    if (!out.emplace(key, tokenizer::tokenize(line.substr(comma + 1))).second) {
      throw DataError("summaries row " + std::to_string(row) + ": duplicate key '" + key + "'");
    }
  }
  return out;
}

}  // namespace unilog::cli
