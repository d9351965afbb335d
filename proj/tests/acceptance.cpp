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


// Desk-scale acceptance run. Prints one PASS/FAIL line per criterion and
// exits nonzero when any criterion fails. Tolerances are fixed below.
//
//   unilog_acceptance [--only 1,4,9]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "unilog/cli.hpp"
#include "unilog/compression.hpp"
#include "unilog/log_ingest.hpp"
#include "unilog/model.hpp"
#include "unilog/tasks.hpp"
#include "unilog/tokenizer.hpp"
#include "unilog/training.hpp"

using namespace unilog;
using model::Matrix;
using model::Parameter;
using tokenizer::SpecialIds;

namespace {

// --- pinned tolerances -----------------------------------------------------------

constexpr int kRoundTripFiles = 100;
constexpr double kLosslessSeconds = 300.0;
constexpr double kBoundSlackBits = 32.0;
constexpr double kUniformMinBits = 200.0;
constexpr double kUniformMaxBits = 232.0;
constexpr double kCompressionRatio = 0.5;
constexpr double kGradTolerance = 1e-4;
constexpr double kGradStep = 1e-5;
constexpr double kGradScaleFloor = 1e-4;
constexpr double kSoftmaxTolerance = 1e-6;
constexpr double kShiftTolerance = 1e-6;
constexpr double kSpanMaskMin = 0.15;
constexpr double kSpanMaskMax = 0.18;
constexpr double kBertMaskMean = 0.15;
constexpr double kBertMaskTolerance = 0.01;
constexpr double kTaskF1 = 0.9;
constexpr double kTaskSeconds = 1800.0;
constexpr double kF1FixtureTolerance = 5e-5;

// --- desk-scale training setup --------------------------------------------------

constexpr std::size_t kCorpusLines = 10000;
constexpr std::size_t kTrainLines = 8000;
constexpr std::uint64_t kPretrainSteps = 2048;
constexpr std::uint64_t kFinetuneSteps = 2048;
constexpr std::uint64_t kCompressionSteps = 512;
constexpr std::uint64_t kAblationSteps = 512;
constexpr double kDeskLr = 2e-3;
constexpr std::size_t kDeskBatch = 32;
constexpr int kDeskMaxLen = 64;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::span<const std::uint8_t> as_bytes(const std::string& s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

void note(const std::string& msg) { std::cerr << "  .. " << msg << std::endl; }

// --- corpora ------------------------------------------------------------------------

// HDFS-format lines: date, time, pid, level, component, message.
std::string hdfs_sample(std::size_t lines, std::uint64_t seed) {
  Rng rng(seed);
  auto ip = [&] {
    return "10.25" + std::to_string(rng.uniform_int(2)) + "." + std::to_string(rng.uniform_int(256)) + "." +
           std::to_string(rng.uniform_int(256));
  };
  auto blk = [&] {
    std::string b = rng.bernoulli(0.5) ? "blk_-" : "blk_";
    b += std::to_string(1000000000000000000ull + rng.uniform_int(8000000000000000000ull));
    return b;
  };
  std::string out;
  for (std::size_t i = 0; i < lines; ++i) {
    char head[64];
    std::snprintf(head, sizeof head, "0811%02d %02d%02d%02d %d ", static_cast<int>(9 + i * 3 / lines),
                  static_cast<int>(rng.uniform_int(24)), static_cast<int>(rng.uniform_int(60)),
                  static_cast<int>(rng.uniform_int(60)), static_cast<int>(1 + rng.uniform_int(40000)));
    std::string line = head;
    switch (rng.uniform_int(9)) {
      case 0:
        line += "INFO dfs.DataNode$DataXceiver: Receiving block " + blk() + " src: /" + ip() + ":" +
                std::to_string(40000 + rng.uniform_int(20000)) + " dest: /" + ip() + ":50010";
        break;
      case 1:
        line += "INFO dfs.FSNamesystem: BLOCK* NameSystem.allocateBlock: /mnt/hadoop/mapred/system/job_200811092030_" +
                std::to_string(1000 + rng.uniform_int(9000)) + "/job.jar. " + blk();
        break;
      case 2:
        line += "INFO dfs.DataNode$PacketResponder: PacketResponder " + std::to_string(rng.uniform_int(3)) +
                " for block " + blk() + " terminating";
        break;
      case 3:
        line += "INFO dfs.DataNode$PacketResponder: Received block " + blk() + " of size " +
                std::to_string(rng.bernoulli(0.8) ? 67108864 : rng.uniform_int(67108864)) + " from /" + ip();
        break;
      case 4:
        line += "INFO dfs.FSNamesystem: BLOCK* NameSystem.addStoredBlock: blockMap updated: " + ip() +
                ":50010 is added to " + blk() + " size 67108864";
        break;
      case 5:
        line += "INFO dfs.DataBlockScanner: Verification succeeded for " + blk();
        break;
      case 6: {
        const std::string b = blk();
        line += "INFO dfs.FSDataset: Deleting block " + b + " file /mnt/hadoop/dfs/data/current/subdir" +
                std::to_string(rng.uniform_int(64)) + "/" + b;
        break;
      }
      case 7:
        line += "INFO dfs.DataNode: " + ip() + ":50010 Served block " + blk() + " to /" + ip();
        break;
      default:
        line += "WARN dfs.DataNode: " + ip() + ":50010:Got exception while serving " + blk() + " to /" + ip() + ":";
        break;
    }
    out += line + "\n";
  }
  return out;
}

// A synthetic log with a random shape and one random byte-level distortion.
std::string randomized_file(Rng& rng) {
  ingest::SyntheticCorpusSpec spec;
  spec.n_lines = 1 + rng.uniform_int(400);
  spec.n_templates = 1 + rng.uniform_int(20);
  spec.anomaly_rate = rng.uniform() * 0.3;
  spec.rng_seed = rng.next_u64();
  std::string text = ingest::generate_synthetic_corpus(spec).text();
  switch (rng.uniform_int(7)) {
    case 0:
      break;
    case 1: {
      std::string crlf;
      for (char c : text) crlf += c == '\n' ? std::string("\r\n") : std::string(1, c);
      text = crlf;
      break;
    }
    case 2:
      while (!text.empty() && text.back() == '\n') text.pop_back();
      break;
    case 3:
      for (int k = 0; k < 20; ++k) {
        const auto pos = rng.uniform_int(text.size() + 1);
        text.insert(text.begin() + static_cast<std::ptrdiff_t>(pos), static_cast<char>(rng.uniform_int(256)));
      }
      break;
    case 4:
      for (char& c : text) {
        if (rng.bernoulli(0.05)) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
      }
      break;
    case 5: {
      std::string spaced;
      for (char c : text) {
        spaced += c;
        if (c == '\n' && rng.bernoulli(0.2)) spaced += rng.bernoulli(0.5) ? "\n" : "\t  ";
      }
      text = spaced;
      break;
    }
    default:
      text += "caf\xc3\xa9 \xe2\x9c\x93 na\xc3\xafve\n";
      break;
  }
  return text;
}

// Vocabulary of the seeded synthetic corpus, with a small random model.
model::Checkpoint codec_checkpoint() {
  ingest::SyntheticCorpusSpec spec;
  spec.n_lines = 2000;
  const auto corpus = ingest::generate_synthetic_corpus(spec);
  std::vector<std::vector<std::string>> toks;
  for (const auto& r : corpus.records) toks.push_back(tokenizer::tokenize(r.raw_text));
  tokenizer::Vocabulary vocab = tokenizer::build_vocab(toks);
  model::ModelConfig c;
  c.n_blocks = 1;
  c.n_heads = 2;
  c.d_head = 8;
  c.d_model = 16;
  c.d_ffn = 32;
  c.max_len = 64;
  c.n_rel_buckets = 16;
  c.vocab_size = static_cast<int>(vocab.size());
  return training::new_checkpoint(c, std::move(vocab), 1234);
}

std::vector<std::string> codec_files() {
  std::vector<std::string> files = {hdfs_sample(10000, 99)};
  Rng rng(2024);
  while (files.size() < static_cast<std::size_t>(kRoundTripFiles)) files.push_back(randomized_file(rng));
  return files;
}

// --- criterion 1 -------------------------------------------------------------------

Outcome lossless() {
  const auto t0 = Clock::now();
  const model::Checkpoint ckpt = codec_checkpoint();
  const auto files = codec_files();
  int ok = 0;
  for (const std::string& f : files) {
    try {
      const Bytes blob = compression::compress_bytes(ckpt, as_bytes(f));
      const Bytes back = compression::decompress_bytes(ckpt, blob);
      if (std::string(back.begin(), back.end()) == f) ++ok;
    } catch (const std::exception& e) {
      note(std::string("round trip threw: ") + e.what());
    }
  }
  // Flip every bit of the header of one blob.
  const Bytes blob = compression::compress_bytes(ckpt, as_bytes(files[1]));
  constexpr std::size_t kHeaderBytes = 4 + 2 + 32 + 32 + 8 + 8 + 4 + 8;
  int refused = 0;
  int flips = 0;
  for (std::size_t byte = 0; byte < kHeaderBytes; ++byte) {
    for (int bit = 0; bit < 8; ++bit) {
      Bytes bad = blob;
      bad[byte] ^= static_cast<std::uint8_t>(1u << bit);
      ++flips;
      try {
        compression::decompress_bytes(ckpt, bad);
      } catch (const DataError&) {
        ++refused;
      }
    }
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = ok == kRoundTripFiles && refused == flips && secs < kLosslessSeconds;
  o.detail = std::to_string(ok) + "/" + std::to_string(kRoundTripFiles) + " files round-trip (incl. 10k-line HDFS-format sample), " +
             std::to_string(refused) + "/" + std::to_string(flips) + " header bit flips refused, " + fmt("%.1f", secs) +
             " s (limit " + fmt("%.0f", kLosslessSeconds) + " s)";
  return o;
}

// --- criterion 2 -------------------------------------------------------------------

Outcome code_length() {
  using namespace compression;
  const model::Checkpoint ckpt = codec_checkpoint();
  double worst_slack = -std::numeric_limits<double>::infinity();
  int streams = 0;
  int within = 0;
  for (const std::string& f : codec_files()) {
    const TokenStream ts = build_token_stream(ckpt.vocab, as_bytes(f));
    ModelPredictor pred(ckpt);
    const EncodeResult r = ac_encode(ts.ids, pred);
    const double slack = static_cast<double>(r.bits) - code_length_bound_bits(ts.ids, pred);
    worst_slack = std::max(worst_slack, slack);
    within += slack <= kBoundSlackBits;
    ++streams;
  }
  Rng rng(77);
  for (int k = 0; k < 100; ++k) {
    std::vector<std::uint64_t> counts(2 + rng.uniform_int(500));
    for (auto& c : counts) c = rng.uniform_int(3) == 0 ? 1 : 1 + rng.uniform_int(100000);
    StaticPredictor pred(QuantizedPmf::from_counts(counts));
    std::vector<TokenId> ids(1 + rng.uniform_int(5000));
    for (auto& t : ids) t = static_cast<TokenId>(rng.uniform_int(counts.size()));
    const EncodeResult r = ac_encode(ids, pred);
    const double slack = static_cast<double>(r.bits) - code_length_bound_bits(ids, pred);
    worst_slack = std::max(worst_slack, slack);
    within += slack <= kBoundSlackBits;
    ++streams;
  }
  StaticPredictor uniform(QuantizedPmf::uniform(4));
  Rng iid(4);
  std::vector<TokenId> ids(100);
  for (auto& t : ids) t = static_cast<TokenId>(iid.uniform_int(4));
  const EncodeResult r = ac_encode(ids, uniform);
  const bool decodes = ac_decode(r.bytes, uniform, ids.size()) == ids;
  const auto bits = static_cast<double>(r.bits);
  Outcome o;
  o.pass = within == streams && bits >= kUniformMinBits && bits <= kUniformMaxBits && decodes;
  o.detail = std::to_string(within) + "/" + std::to_string(streams) + " streams within bound + 32 (worst slack " +
             fmt("%.0f", worst_slack) + " bits); uniform-4 x100 payload " + fmt("%.0f", bits) + " bits in [200, 232]";
  return o;
}

// --- shared desk-scale models ---------------------------------------------------------

struct DeskData {
  cli::Corpus corpus;
  std::vector<cli::Window> train;
  std::vector<cli::Window> test;
  tokenizer::Vocabulary vocab;
  std::string text;
};

DeskData& desk_data() {
  static std::optional<DeskData> d;
  if (d) return *d;
  d.emplace();
  cli::SourceOptions opts;
  opts.synthetic.n_lines = kCorpusLines;
  d->corpus = cli::load_corpus(opts);
  auto windows = cli::make_windows(d->corpus, 1, 1);
  d->train.assign(windows.begin(), windows.begin() + static_cast<std::ptrdiff_t>(kTrainLines));
  d->test.assign(windows.begin() + static_cast<std::ptrdiff_t>(kTrainLines), windows.end());
  std::vector<std::vector<std::string>> toks;
  for (const auto& w : d->train) toks.push_back(tokenizer::tokenize(w.records.front().raw_text));
  d->vocab = tokenizer::build_vocab(toks);
  ingest::SyntheticCorpusSpec spec;
  spec.n_lines = kCorpusLines;
  d->text = ingest::generate_synthetic_corpus(spec).text();
  return *d;
}

model::ModelConfig desk_config(std::size_t vocab) {
  model::ModelConfig c;
  c.d_model = 64;
  c.d_head = 16;
  c.d_ffn = 256;
  c.max_len = kDeskMaxLen;
  c.vocab_size = static_cast<int>(vocab);
  return c;
}

training::TrainConfig desk_train(std::uint64_t steps, std::uint64_t seed) {
  training::TrainConfig cfg;
  cfg.batch_size = kDeskBatch;
  cfg.lr = kDeskLr;
  cfg.pretrain_steps = steps;
  cfg.finetune_steps = steps;
  cfg.seed = seed;
  return cfg;
}

training::StepCallback progress(const std::string& what, std::uint64_t total) {
  return [what, total](std::uint64_t step, double loss, double) {
    if (step % 512 == 0 || step == total) note(what + " step " + std::to_string(step) + " loss " + fmt("%.4g", loss));
  };
}

std::vector<std::vector<TokenId>> ids_of(const std::vector<cli::Window>& ws, const tokenizer::Vocabulary& v) {
  std::vector<std::vector<TokenId>> out;
  for (const auto& w : ws) out.push_back(cli::window_ids(v, w));
  return out;
}

model::Checkpoint pretrained(training::Objective objective, std::uint64_t steps, std::uint64_t seed) {
  DeskData& d = desk_data();
  model::Checkpoint ck = training::new_checkpoint(desk_config(d.vocab.size()), d.vocab, seed);
  const auto seqs = ids_of(d.train, d.vocab);
  training::pretrain(ck, seqs, objective, desk_train(steps, seed),
                     progress(std::string("pretrain ") + std::string(training::objective_name(objective)), steps));
  return ck;
}

// The 2048-step unilog checkpoint, trained once and shared.
const model::Checkpoint& desk_pretrained() {
  static std::optional<model::Checkpoint> ck;
  if (!ck) ck.emplace(pretrained(training::Objective::kUnilogSpan, kPretrainSteps, 42));
  return *ck;
}

std::vector<training::TaskSample> task_samples(TaskKind task, const DeskData& d) {
  std::vector<training::TaskSample> out;
  if (task == TaskKind::kCompression) {
    std::vector<TokenId> stream;
    for (const auto& s : ids_of(d.train, d.vocab)) stream.insert(stream.end(), s.begin(), s.end());
    for (std::size_t i = 0; i < stream.size(); i += kDeskMaxLen) {
      const auto end = std::min(stream.size(), i + kDeskMaxLen);
      out.push_back({std::vector<TokenId>(stream.begin() + static_cast<std::ptrdiff_t>(i),
                                          stream.begin() + static_cast<std::ptrdiff_t>(end)),
                     0,
                     {}});
    }
    return out;
  }
  for (const auto& w : d.train) {
    training::TaskSample s;
    s.ids = cli::window_ids(d.vocab, w);
    const bool label = cli::window_label(w, d.corpus);
    if (task == TaskKind::kAnomaly && label) continue;
    s.label = label ? 1 : 0;
    if (task == TaskKind::kSummarization) s.summary = d.vocab.encode(cli::window_summary(w, *d.corpus.summaries));
    out.push_back(std::move(s));
  }
  return out;
}

model::Checkpoint finetuned(const model::Checkpoint& base, TaskKind task, std::uint64_t steps, std::uint64_t seed) {
  model::Checkpoint ck = base;
  const auto data = task_samples(task, desk_data());
  training::finetune(ck, task, data, desk_train(steps, seed),
                     progress(std::string("finetune ") + std::string(tokenizer::task_name(task)), steps));
  return ck;
}

std::vector<bool> test_labels() {
  std::vector<bool> t;
  for (const auto& w : desk_data().test) t.push_back(cli::window_label(w, desk_data().corpus));
  return t;
}

double anomaly_f1(model::Checkpoint& ck) {
  const auto seqs = ids_of(desk_data().test, ck.vocab);
  std::vector<bool> pred;
  for (const auto& v : tasks::detect_anomalies(ck, seqs)) pred.push_back(v.anomalous);
  return tasks::precision_recall_f1(pred, test_labels()).f1;
}

// --- criterion 3 -------------------------------------------------------------------

Outcome compression_win() {
  DeskData& d = desk_data();
  const model::Checkpoint ck = finetuned(desk_pretrained(), TaskKind::kCompression, kCompressionSteps, 42);
  const compression::TokenStream ts = compression::build_token_stream(ck.vocab, as_bytes(d.text));
  std::map<TokenId, double> freq;
  for (TokenId t : ts.ids) freq[t] += 1.0;
  const auto n = static_cast<double>(ts.ids.size());
  double baseline = 0.0;
  for (const auto& [t, c] : freq) baseline -= c * std::log2(c / n);
  compression::CompressStats stats;
  const Bytes blob = compression::compress_bytes(ck, as_bytes(d.text), &stats);
  const Bytes back = compression::decompress_bytes(ck, blob);
  const bool exact = std::string(back.begin(), back.end()) == d.text;
  const auto bits = static_cast<double>(stats.payload_bits);
  Outcome o;
  o.pass = exact && bits <= kCompressionRatio * baseline;
  o.detail = "model-coded token stream " + fmt("%.0f", bits) + " bits vs unigram baseline " + fmt("%.0f", baseline) +
             " bits (ratio " + fmt("%.3f", bits / baseline) + ", limit 0.5) over " + std::to_string(ts.ids.size()) +
             " tokens; whole-file rate " +
             fmt("%.1f", 100.0 * tasks::compression_rate(stats.blob_bytes, stats.original_bytes)) + "%" +
             (exact ? "" : "; ROUND TRIP FAILED");
  return o;
}

// --- criterion 4 -------------------------------------------------------------------

model::ModelConfig tiny_config() {
  model::ModelConfig c;
  c.n_blocks = 2;
  c.n_heads = 2;
  c.d_head = 4;
  c.d_model = 8;
  c.d_ffn = 16;
  c.dropout = 0.0;
  c.max_len = 24;
  c.n_rel_buckets = 8;
  c.vocab_size = SpecialIds::kFirstRegular + 7;
  return c;
}

void randomize(model::Transformer& m, std::uint64_t seed) {
  Rng rng(seed);
  for (Parameter* p : m.parameters()) {
    const bool around_one = p->name.ends_with(".g") || p->name.ends_with(".beta");
    for (Eigen::Index i = 0; i < p->value.size(); ++i) p->value.data()[i] = (around_one ? 1.0 : 0.0) + 0.3 * rng.normal();
  }
}

std::vector<TokenId> random_ids(Rng& rng, std::size_t n) {
  std::vector<TokenId> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back(SpecialIds::kFirstRegular + static_cast<TokenId>(rng.uniform_int(7)));
  return v;
}

std::vector<model::Example> grad_batch(std::optional<TaskKind> task, Rng& rng) {
  std::vector<model::Example> batch;
  for (std::size_t len : {5u, 7u}) {
    model::Example ex;
    const auto ids = random_ids(rng, len);
    std::vector<TokenId> shifted = {SpecialIds::kBos};
    shifted.insert(shifted.end(), ids.begin(), ids.end() - 1);
    std::vector<TokenId> prefixed = ids;
    if (task) prefixed.insert(prefixed.begin(), SpecialIds::task_prefix(*task));
    if (!task || task == TaskKind::kAnomaly) {
      const std::size_t off = task ? 1 : 0;
      prefixed[off + 1] = prefixed[off + 2] = SpecialIds::sentinel(0);
      prefixed[off + len - 1] = SpecialIds::sentinel(1);
      ex = {prefixed, shifted, ids};
    } else if (task == TaskKind::kFailure) {
      ex = {prefixed, {}, {static_cast<TokenId>(len % 2)}};
    } else if (task == TaskKind::kSummarization) {
      const auto summary = random_ids(rng, 3);
      std::vector<TokenId> dec = {SpecialIds::kBos};
      dec.insert(dec.end(), summary.begin(), summary.end());
      std::vector<TokenId> tgt = summary;
      tgt.push_back(SpecialIds::kEos);
      ex = {prefixed, dec, tgt};
    } else {
      ex = {{SpecialIds::task_prefix(*task)}, shifted, ids};
    }
    batch.push_back(std::move(ex));
  }
  return batch;
}

Outcome gradients() {
  model::Transformer m(tiny_config());
  randomize(m, 17);
  Rng data_rng(5);
  Rng pick(9);
  std::set<std::string> touched;
  double worst = 0.0;
  std::string worst_at;
  std::size_t checked = 0;
  const std::vector<std::optional<TaskKind>> variants = {std::nullopt, TaskKind::kAnomaly, TaskKind::kFailure,
                                                         TaskKind::kSummarization, TaskKind::kCompression};
  for (const auto& task : variants) {
    const auto batch = grad_batch(task, data_rng);
    auto loss_at = [&] {
      nn::Tape t(false);
      return t.scalar(m.batch_loss(t, batch, task, nullptr).loss);
    };
    m.zero_grad();
    {
      nn::Tape t;
      t.backward(m.batch_loss(t, batch, task, nullptr).loss);
    }
    for (Parameter* p : m.parameters()) {
      if (!p->grad.isZero()) touched.insert(p->name);
      const auto n = p->value.size();
      std::vector<Eigen::Index> entries;
      for (Eigen::Index i = 0; i < std::min<Eigen::Index>(n, 48); ++i) {
        entries.push_back(n <= 48 ? i : static_cast<Eigen::Index>(pick.uniform_int(static_cast<std::uint64_t>(n))));
      }
      for (Eigen::Index i : entries) {
        double& w = p->value.data()[i];
        const double saved = w;
        w = saved + kGradStep;
        const double up = loss_at();
        w = saved - kGradStep;
        const double down = loss_at();
        w = saved;
        const double numeric = (up - down) / (2.0 * kGradStep);
        const double analytic = p->grad.data()[i];
        const double rel = std::abs(numeric - analytic) / std::max(std::abs(numeric) + std::abs(analytic), kGradScaleFloor);
        ++checked;
        if (rel > worst) {
          worst = rel;
          worst_at = p->name;
        }
      }
    }
  }
  const std::size_t groups = m.parameters().size();
  Outcome o;
  o.pass = worst <= kGradTolerance && touched.size() == groups;
  o.detail = std::to_string(checked) + " entries over " + std::to_string(touched.size()) + "/" + std::to_string(groups) +
             " parameter groups, max relative error " + fmt("%.2e", worst) + " (" + worst_at + "), limit 1e-4";
  return o;
}

// --- criterion 5 -------------------------------------------------------------------

Outcome invariants() {
  std::vector<std::string> failed;
  // Causal mask: changing decoder token k leaves rows < k bit-identical.
  {
    model::Transformer m(tiny_config());
    randomize(m, 21);
    Rng rng(4);
    const auto input = random_ids(rng, 6);
    auto dec = random_ids(rng, 8);
    dec[0] = SpecialIds::kBos;
    const Matrix base = m.forward(input, dec, std::nullopt).logits;
    bool ok = true;
    for (std::size_t k = 1; k < dec.size(); ++k) {
      auto changed = dec;
      changed[k] = SpecialIds::kNum;
      const Matrix out = m.forward(input, changed, std::nullopt).logits;
      for (Eigen::Index r = 0; r < static_cast<Eigen::Index>(k); ++r) ok = ok && (out.row(r).array() == base.row(r).array()).all();
    }
    if (!ok) failed.push_back("causal");
  }
  // Zeroed sublayer outputs make a Pre-LN block the identity.
  {
    model::Transformer m(tiny_config());
    randomize(m, 8);
    for (const char* name : {"enc.1.attn.o", "enc.1.ffn.out", "enc.1.ffn.out_b"}) m.param(name).value.setZero();
    Rng rng(2);
    Matrix x(5, 8);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    nn::Tape t;
    const std::vector<nn::Segment> segs = {{0, 5}};
    const nn::Var out = m.encoder_block_forward(t, 1, t.constant(x), segs, nullptr);
    if (!(t.value(out).array() == x.array()).all()) failed.push_back("pre-ln identity");
  }
  double worst_row = 0.0;
  {
    Rng rng(6);
    Matrix x(50, 97);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = 40.0 * rng.normal();
    nn::Tape t(false);
    const Matrix& p = t.value(nn::softmax_rows(t, t.constant(x)));
    for (Eigen::Index r = 0; r < p.rows(); ++r) worst_row = std::max(worst_row, std::abs(p.row(r).sum() - 1.0));
    if (worst_row > kSoftmaxTolerance) failed.push_back("softmax");
  }
  {
    model::Transformer m(tiny_config());
    randomize(m, 12);
    int table_shaped = 0;
    for (const Parameter* p : std::as_const(m).parameters()) {
      table_shaped += p->value.rows() == m.config().vocab_size && p->value.cols() == m.config().d_model;
    }
    Matrix h = Matrix::Ones(2, m.config().d_model);
    auto logits = [&] {
      nn::Tape t(false);
      return Matrix(t.value(m.logits(t, t.constant(h))));
    };
    const Matrix before = logits();
    m.embedding().value(SpecialIds::kFirstRegular, 0) += 1.0;
    const Matrix after = logits();
    if (table_shaped != 1 || after(0, SpecialIds::kFirstRegular) - before(0, SpecialIds::kFirstRegular) != 1.0) {
      failed.push_back("tied embedding");
    }
  }
  double shift_err = 0.0;
  {
    Rng rng(31);
    const int n = 6;
    const int pre = 3;
    const int d = n + pre;
    Matrix content(n, d);
    Matrix prefix(pre, d);
    Matrix table(8, 1);
    for (Matrix* mat : {&content, &prefix, &table}) {
      for (Eigen::Index i = 0; i < mat->size(); ++i) mat->data()[i] = rng.normal();
    }
    auto scores = [&](const Matrix& x, int offset) {
      const int len = static_cast<int>(x.rows());
      nn::Tape t(false);
      nn::AttentionSpec spec;
      spec.rel_bias = t.constant(table);
      spec.bucket = [](int rel) { return model::relative_bucket(rel, 8); };
      const std::vector<nn::Segment> segs = {{0, len}};
      const nn::Var q = t.constant(x);
      const Matrix p = t.value(nn::attention(t, q, q, t.constant(Matrix::Identity(len, d)), segs, segs, spec));
      Matrix s(n, n);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) s(i, j) = std::log(p(offset + i, offset + j)) - std::log(p(offset + i, offset + i));
      }
      return s;
    };
    Matrix shifted(n + pre, d);
    shifted << prefix, content;
    shift_err = (scores(content, 0) - scores(shifted, pre)).cwiseAbs().maxCoeff();
    if (shift_err > kShiftTolerance) failed.push_back("relative shift");
  }
  Outcome o;
  o.pass = failed.empty();
  o.detail = "causal exact, Pre-LN identity exact, softmax max |row sum - 1| " + fmt("%.1e", worst_row) +
             ", tied embedding single storage, relative-shift max error " + fmt("%.1e", shift_err);
  for (const auto& f : failed) o.detail += "; FAILED " + f;
  return o;
}

// --- criterion 6 -------------------------------------------------------------------

Outcome masking() {
  constexpr int kSequences = 10000;
  constexpr std::size_t kLen = 100;
  Rng rng(606);
  double span_sum = 0.0;
  double bert_sum = 0.0;
  std::size_t bad_runs = 0;
  std::size_t runs = 0;
  const training::TrainConfig cfg;
  for (int s = 0; s < kSequences; ++s) {
    std::vector<TokenId> ids(kLen);
    for (auto& t : ids) t = SpecialIds::kFirstRegular + static_cast<TokenId>(rng.uniform_int(500));
    const auto sm = training::span_mask(ids, cfg.mask_budget, rng);
    span_sum += static_cast<double>(sm.mask_positions.size()) / kLen;
    std::vector<bool> masked(kLen, false);
    for (auto p : sm.mask_positions) masked[p] = true;
    for (std::size_t i = 0; i < kLen;) {
      if (!masked[i]) {
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j < kLen && masked[j]) ++j;
      ++runs;
      bad_runs += (j - i != 2 && j - i != 3);
      i = j;
    }
    const auto bm = training::bert_mask(ids, kBertMaskMean, rng, cfg.bert_corrupt_rate, SpecialIds::kFirstRegular + 500);
    bert_sum += static_cast<double>(bm.mask_positions.size()) / kLen;
  }
  const double span_mean = span_sum / kSequences;
  const double bert_mean = bert_sum / kSequences;
  Outcome o;
  o.pass = span_mean >= kSpanMaskMin && span_mean <= kSpanMaskMax && bad_runs == 0 &&
           std::abs(bert_mean - kBertMaskMean) <= kBertMaskTolerance;
  o.detail = "span_mask mean fraction " + fmt("%.4f", span_mean) + " in [0.15, 0.18], " + std::to_string(bad_runs) +
             "/" + std::to_string(runs) + " runs outside length 2-3; bert_mask mean " + fmt("%.4f", bert_mean) +
             " (0.15 +- 0.01)";
  return o;
}

// --- criterion 7 -------------------------------------------------------------------

Outcome task_f1() {
  const auto t0 = Clock::now();
  DeskData& d = desk_data();
  const model::Checkpoint& base = desk_pretrained();
  const std::vector<bool> truth = test_labels();

  model::Checkpoint anomaly = finetuned(base, TaskKind::kAnomaly, kFinetuneSteps, 42);
  const double f_anomaly = anomaly_f1(anomaly);

  model::Checkpoint failure = finetuned(base, TaskKind::kFailure, kFinetuneSteps, 42);
  std::vector<bool> pred;
  for (double p : tasks::predict_failures(failure, ids_of(d.test, failure.vocab))) pred.push_back(p >= 0.5);
  const double f_failure = tasks::precision_recall_f1(pred, truth).f1;

  model::Checkpoint summ = finetuned(base, TaskKind::kSummarization, kFinetuneSteps, 42);
  std::vector<std::vector<std::string>> got;
  std::vector<std::vector<std::string>> want;
  for (const auto& w : d.test) {
    got.push_back(summ.vocab.decode(tasks::summarize(summ, cli::window_ids(summ.vocab, w), 16)));
    want.push_back(cli::window_summary(w, *d.corpus.summaries));
  }
  const double f_summary = tasks::token_f1(got, want).f1;
  const double secs = seconds_since(t0);

  Outcome o;
  o.pass = f_anomaly >= kTaskF1 && f_failure >= kTaskF1 && f_summary >= kTaskF1 && secs < kTaskSeconds;
  std::size_t positives = static_cast<std::size_t>(std::count(truth.begin(), truth.end(), true));
  o.detail = "held-out " + std::to_string(truth.size()) + " lines (" + std::to_string(positives) +
             " anomalous): anomaly F1 " + fmt("%.3f", f_anomaly) + ", failure F1 " + fmt("%.3f", f_failure) +
             ", summarization token-F1 " + fmt("%.3f", f_summary) + " (each >= 0.9); " + fmt("%.0f", secs) +
             " s (limit 1800 s)";
  return o;
}

// --- criterion 8 -------------------------------------------------------------------

Outcome ablation() {
  double sum_span = 0.0;
  double sum_prefix = 0.0;
  std::string per_seed;
  const std::vector<std::uint64_t> seeds = {1, 2, 3};
  for (std::uint64_t seed : seeds) {
    double f[2];
    int k = 0;
    for (auto objective : {training::Objective::kUnilogSpan, training::Objective::kPrefixLm}) {
      const model::Checkpoint pre = pretrained(objective, kAblationSteps, seed);
      model::Checkpoint ft = finetuned(pre, TaskKind::kAnomaly, kAblationSteps, seed);
      f[k++] = anomaly_f1(ft);
    }
    sum_span += f[0];
    sum_prefix += f[1];
    per_seed += " seed " + std::to_string(seed) + ": " + fmt("%.3f", f[0]) + "/" + fmt("%.3f", f[1]) + ";";
  }
  const double mean_span = sum_span / static_cast<double>(seeds.size());
  const double mean_prefix = sum_prefix / static_cast<double>(seeds.size());
  Outcome o;
  o.pass = mean_span >= mean_prefix;
  o.detail = "mean anomaly F1 unilog_span " + fmt("%.3f", mean_span) + " vs prefix_lm " + fmt("%.3f", mean_prefix) +
             " (" + std::to_string(kAblationSteps) + "+" + std::to_string(kAblationSteps) + " steps;" + per_seed + ")";
  return o;
}

// --- criterion 9 -------------------------------------------------------------------

double piece_cost_oracle(const std::string& piece, const tokenizer::UnigramTable& table) {
  std::string lower = piece;
  for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  double cost = 1000.0 * static_cast<double>(piece.size());
  if (auto r = table.rank(lower)) {
    cost = std::min(cost, std::log((static_cast<double>(*r) + 1.0) * std::log(static_cast<double>(table.size()))));
  }
  auto digit = [](char c) { return c >= '0' && c <= '9'; };
  auto hex = [&](char c) { return digit(c) || (c >= 'a' && c <= 'f'); };
  bool numeric = std::all_of(lower.begin(), lower.end(), digit);
  if (!numeric && lower.size() > 2 && lower[0] == '0' && lower[1] == 'x') {
    numeric = std::all_of(lower.begin() + 2, lower.end(), hex);
  }
  if (!numeric) numeric = std::all_of(lower.begin(), lower.end(), hex) && std::any_of(lower.begin(), lower.end(), digit);
  if (numeric) cost = std::min(cost, 1.0);
  return cost;
}

Outcome tokenizer_checks() {
  const auto& table = tokenizer::UnigramTable::embedded();
  const std::vector<std::string> walk = tokenizer::tokenize("LocalFaultAlarm_clear");
  const bool walkthrough = walk == std::vector<std::string>{"local", "fault", "alarm", "clear"};
  Rng rng(2026);
  const auto& words = table.words();
  int agree = 0;
  constexpr int kFragments = 200;
  for (int f = 0; f < kFragments; ++f) {
    std::string s;
    const std::size_t target = 1 + rng.uniform_int(12);
    while (s.size() < target) {
      const auto kind = rng.uniform_int(4);
      if (kind < 2) s += words[rng.uniform_int(std::min<std::size_t>(words.size(), 3000))];
      else if (kind == 2) s += static_cast<char>('0' + rng.uniform_int(10));
      else s += static_cast<char>('a' + rng.uniform_int(26));
    }
    s.resize(target);
    if (rng.bernoulli(0.5)) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    double dp = 0.0;
    std::string joined;
    for (const auto& p : tokenizer::segment_unigram(s, table)) {
      dp += piece_cost_oracle(p, table);
      joined += p;
    }
    const std::size_t n = s.size();
    double best = std::numeric_limits<double>::infinity();
    for (std::uint32_t cuts = 0; cuts < (1u << (n - 1)); ++cuts) {
      double total = 0.0;
      std::size_t start = 0;
      for (std::size_t i = 1; i <= n; ++i) {
        if (i == n || (cuts >> (i - 1)) & 1u) {
          total += piece_cost_oracle(s.substr(start, i - start), table);
          start = i;
        }
      }
      best = std::min(best, total);
    }
    agree += joined == s && std::abs(dp - best) <= 1e-9 * std::max(1.0, best);
  }
  std::string got;
  for (const auto& t : walk) got += (got.empty() ? "" : ", ") + t;
  Outcome o;
  o.pass = walkthrough && agree == kFragments;
  o.detail = "\"LocalFaultAlarm_clear\" -> [" + got + "]; DP equals brute force on " + std::to_string(agree) + "/" +
             std::to_string(kFragments) + " fragments of <= 12 chars";
  return o;
}

// --- criterion 10 ------------------------------------------------------------------

Outcome metrics() {
  // 49 true positives, 1 false positive, no false negatives.
  std::vector<bool> pred(200, false);
  std::vector<bool> truth(200, false);
  for (int i = 0; i < 50; ++i) pred[static_cast<std::size_t>(i)] = true;
  for (int i = 0; i < 49; ++i) truth[static_cast<std::size_t>(i)] = true;
  const tasks::MetricsReport r = tasks::precision_recall_f1(pred, truth);
  const double expected = 2.0 * 0.98 * 1.0 / (0.98 + 1.0);
  const double rate = tasks::compression_rate(29, 1000);
  const std::string shown = fmt("%.1f", 100.0 * rate) + "%";
  Outcome o;
  o.pass = std::abs(r.precision - 0.98) < 1e-12 && r.recall == 1.0 && std::abs(r.f1 - 0.9899) <= kF1FixtureTolerance &&
           std::abs(r.f1 - expected) < 1e-12 && std::abs(tasks::f1_score(0.98, 1.0) - expected) < 1e-12 &&
           shown == "2.9%";
  o.detail = "P " + fmt("%.2f", r.precision) + " R " + fmt("%.2f", r.recall) + " -> F1 " + fmt("%.4f", r.f1) +
             "; compression 29/1000 -> " + shown;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Desk-scale acceptance run"};
  std::vector<int> only;
  app.add_option("--only", only, "Run only these criteria")->delimiter(',')->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"losslessness", lossless},     {"code-length bound", code_length}, {"compression win", compression_win},
      {"gradient check", gradients},  {"architecture invariants", invariants}, {"masking statistics", masking},
      {"task F1", task_f1},           {"objective ablation", ablation}, {"tokenizer", tokenizer_checks},
      {"metrics", metrics},
  };
  // Cheap criteria first; 3, 7 and 8 share the trained models.
  const std::vector<int> order = {10, 9, 6, 5, 4, 2, 1, 7, 3, 8};
  std::map<int, std::pair<Outcome, double>> results;
  for (int id : order) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto& [name, fn] = criteria[static_cast<std::size_t>(id - 1)];
    std::cerr << "criterion " << id << " (" << name << ")..." << std::endl;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    results[id] = {o, seconds_since(t0)};
  }
  int failures = 0;
  for (const auto& [id, r] : results) {
    const auto& [o, secs] = r;
    failures += !o.pass;
    std::printf("criterion %2d %s  %-24s %s [%.1f s]\n", id, o.pass ? "PASS" : "FAIL",
                criteria[static_cast<std::size_t>(id - 1)].first.c_str(), o.detail.c_str(), secs);
  }
  std::printf("%zu run, %d failed\n", results.size(), failures);
  return failures == 0 ? 0 : 1;
}
