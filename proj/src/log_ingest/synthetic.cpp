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
#include <cstdio>
#include <set>

#include "unilog/common.hpp"
#include "unilog/log_ingest.hpp"

namespace unilog::ingest {

namespace {

// Placeholders inside template strings.
constexpr std::string_view kInt = "{int}";
constexpr std::string_view kHex = "{hex}";
constexpr std::string_view kBlock = "{blk}";
constexpr std::string_view kIp = "{ip}";

struct Template {
  std::string pattern;
  std::vector<std::string> keywords;
};

std::string capitalize(std::string_view w) {
  std::string s(w);
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

// Takes `n` words from the pool, cycling when it runs out.
std::vector<std::string> take_words(const std::vector<std::string_view>& pool, std::size_t& cursor,
                                    std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.emplace_back(pool[cursor++ % pool.size()]);
  return out;
}

Template make_normal_template(std::vector<std::string> w, Rng& rng) {
  // w: 2 component words followed by 6 body words.
  static constexpr std::string_view kFields[] = {kInt, kHex, kBlock, kIp};
  const std::string_view f1 = kFields[rng.uniform_int(4)];
  const std::string_view f2 = kFields[rng.uniform_int(4)];
  static constexpr std::string_view kJoins[] = {" ", "_", " ", "="};
  const std::string_view join = kJoins[rng.uniform_int(4)];
  std::string p = capitalize(w[0]) + capitalize(w[1]) + ": " + w[2] + " " + w[3] + " " +
                  std::string(f1) + " " + w[4] + std::string(join) + w[5] + " " + w[6] + " " +
                  std::string(f2) + " " + w[7];
  return {p, {w[0], w[2], w[4]}};
}

Template make_anomaly_template(std::vector<std::string> w) {
  // One numeric field, never adjacent to another field.
  std::string p = capitalize(w[0]) + capitalize(w[1]) + ": " + w[2] + " " + w[3] + " " + w[4] + " " +
                  std::string(kInt) + " " + w[5] + " " + w[6];
  return {p, {w[0], w[2], w[4]}};
}

std::string render(const std::string& pattern, Rng& rng) {
  std::string out;
  std::size_t i = 0;
  char buf[64];
  while (i < pattern.size()) {
    if (pattern[i] == '{') {
      const auto close = pattern.find('}', i);
      const std::string_view ph(pattern.data() + i, close - i + 1);
      if (ph == kInt) {
        std::snprintf(buf, sizeof buf, "%llu", static_cast<unsigned long long>(rng.uniform_int(100000)));
      } else if (ph == kHex) {
        std::snprintf(buf, sizeof buf, "0x%llx",
                      static_cast<unsigned long long>(0x1000 + rng.uniform_int(0xfffff000ULL)));
      } else if (ph == kBlock) {
        const bool neg = rng.bernoulli(0.5);
        std::snprintf(buf, sizeof buf, "blk_%s%llu", neg ? "-" : "",
                      static_cast<unsigned long long>(1000000000ULL + rng.uniform_int(9000000000000000000ULL)));
      } else {
        std::snprintf(buf, sizeof buf, "10.%d.%d.%d", static_cast<int>(rng.uniform_int(256)),
                      static_cast<int>(rng.uniform_int(256)), static_cast<int>(rng.uniform_int(256)));
      }
      out += buf;
      i = close + 1;
    } else {
      out.push_back(pattern[i++]);
    }
  }
  return out;
}

}  // namespace

const std::vector<std::string_view>& synthetic_normal_words() {
  static const std::vector<std::string_view> kWords = {
      "block",    "packet",   "replica",  "server",   "client",   "write",    "read",
      "request",  "response", "session",  "channel",  "buffer",   "cache",    "queue",
      "worker",   "thread",   "task",     "job",      "node",     "cluster",  "volume",
      "segment",  "record",   "table",    "index",    "commit",   "update",   "delete",
      "insert",   "start",    "stop",     "open",     "close",    "connect",  "accept",
      "transfer", "storage",  "memory",   "disk",     "network",  "route",    "address",
      "port",     "socket",   "timer",    "clock",    "event",    "signal",   "message",
      "report",   "check",    "verify",   "state",    "mode",     "level",    "limit",
      "size",     "count",    "offset",   "length",   "total",    "source",   "target",
      "local",    "remote",   "primary",  "backup",   "master",   "leader",   "follower",
      "election", "vote",     "term",     "ticket",   "user",     "group",    "policy",
      "rule",     "filter",   "scan",     "sync",     "flush",    "merge",    "split",
      "allocate", "release",  "lock",     "unlock",   "query",    "result",   "value",
      "field",    "entry",    "path",     "file",     "folder",   "archive",  "image",
      "device",   "sensor",   "power",    "fan",      "battery",  "module",   "card",
      "slot",     "link",     "interface", "physical", "ready",   "active",   "idle",
  };
  return kWords;
}

const std::vector<std::string_view>& synthetic_anomaly_words() {
  static const std::vector<std::string_view> kWords = {
      "panic",    "fatal",     "crash",    "corrupt",  "abort",    "violation", "overflow",
      "exception", "deadlock", "timeout",  "refuse",   "deny",     "fault",     "kill",
      "terminate", "halt",     "broken",   "invalid",  "illegal",  "critical",  "emergency",
      "failure",  "shutdown",  "trap",     "machine",  "interrupt", "parity",   "bogus",
      "garbage",  "stale",     "orphan",   "lost",     "leak",     "throttle",  "degrade",
      "smash",    "explode",   "alarm",    "alert",    "hazard",   "danger",    "toxic",
      "poison",   "rogue",     "mismatch", "unstable", "hang",     "freeze",    "burn",
  };
  return kWords;
}

LabelMap SyntheticCorpus::label_map() const {
  LabelMap m;
  for (const auto& [line, bad] : anomalous) m.emplace(std::to_string(line), bad);
  return m;
}

std::string SyntheticCorpus::text() const {
  std::string out;
  for (const auto& r : records) {
    out += r.raw_text;
    out += '\n';
  }
  return out;
}

SyntheticCorpus generate_synthetic_corpus(const SyntheticCorpusSpec& spec) {
  if (spec.n_templates == 0 || spec.n_lines == 0) {
    throw UsageError("synthetic corpus: n_templates and n_lines must be positive");
  }
  if (!(spec.anomaly_rate >= 0.0 && spec.anomaly_rate <= 1.0)) {
    throw UsageError("synthetic corpus: anomaly_rate must be in [0, 1]");
  }
  Rng rng(spec.rng_seed);

  std::vector<std::string_view> normal_pool = synthetic_normal_words();
  std::vector<std::string_view> anomaly_pool = synthetic_anomaly_words();
  shuffle(normal_pool, rng);
  shuffle(anomaly_pool, rng);

  SyntheticCorpus corpus;
  std::vector<Template> templates;
  std::size_t cursor = 0;
  for (std::size_t t = 0; t < spec.n_templates; ++t) {
    templates.push_back(make_normal_template(take_words(normal_pool, cursor, 8), rng));
  }
  const std::size_t n_anomaly_templates = std::max<std::size_t>(2, spec.n_templates / 3);
  cursor = 0;
  for (std::size_t t = 0; t < n_anomaly_templates; ++t) {
    templates.push_back(make_anomaly_template(take_words(anomaly_pool, cursor, 7)));
  }
  for (const auto& t : templates) corpus.templates.push_back(t.pattern);

  for (std::size_t i = 0; i < spec.n_lines; ++i) {
    const bool bad = rng.bernoulli(spec.anomaly_rate);
    const std::size_t t = bad ? spec.n_templates + rng.uniform_int(n_anomaly_templates)
                              : rng.uniform_int(spec.n_templates);
    corpus.records.push_back({i, render(templates[t].pattern, rng), "synthetic"});
    corpus.anomalous.emplace(i, bad);
    corpus.summaries.emplace(i, templates[t].keywords);
    corpus.template_of_line.push_back(t);
  }
  return corpus;
}

std::vector<std::string> window_summary(const LabeledWindow& window, const SyntheticCorpus& corpus) {
  std::vector<std::string> out;
  std::set<std::size_t> seen;
  for (const auto& r : window.records) {
    if (r.line_index >= corpus.template_of_line.size()) continue;
    if (!seen.insert(corpus.template_of_line[r.line_index]).second) continue;
    const auto& kw = corpus.summaries.at(r.line_index);
    out.insert(out.end(), kw.begin(), kw.end());
  }
  return out;
}

}  // namespace unilog::ingest
